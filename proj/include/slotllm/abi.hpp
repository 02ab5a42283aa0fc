// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Library symbols live in an inline namespace named after the scalar type, so
// a double-precision build (used by gradient checks) can link into the same
// binary as the default float build.

#pragma once

#ifdef SLOTLLM_DOUBLE
#define SLOTLLM_ABI f64
#else
#define SLOTLLM_ABI f32
#endif
