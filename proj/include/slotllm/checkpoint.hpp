// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-describing tensor container:
//
//   u64 little-endian header length | JSON header | raw float32 data
//
// The header carries {"magic", "version", "meta", "tensors"}; each tensor
// entry has name, section ("base" or "lora"), rows, cols and a byte offset
// into the data block. Files are written atomically.

#pragma once

#include "slotllm/tensor.hpp"
#include "slotllm/util.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

inline constexpr const char* kCheckpointMagic = "slotllm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::string section = "base";
    Matrix value;
};

struct CheckpointData {
    json meta;
    std::vector<NamedTensor> tensors;

    /// Throws std::out_of_range naming the tensor when absent.
    const NamedTensor& at(const std::string& name) const;
    bool has_section(const std::string& section) const;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
/// Throws std::runtime_error on a bad magic, unsupported version or truncated file.
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace slotllm
