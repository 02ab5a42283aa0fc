// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal line-chart rasterizer writing RGB PNGs.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace slotllm {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 440;
    bool log_y = false;
};

/// Draws every series (with a legend entry per label) and writes a PNG.
/// Throws when no series has a finite point.
void write_line_plot_png(const std::filesystem::path& path, const std::vector<PlotSeries>& series, const PlotSpec& spec);

}  // namespace slotllm
