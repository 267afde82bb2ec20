#pragma once

#include <filesystem>
#include <string>

#include "p2p/harness.hpp"

namespace p2p {

/// metrics.json, metrics.txt, mpjpe.svg, angular.svg and skeleton overlays
/// for the first, middle and last frame. Wall-clock goes to timing.json so
/// metrics.json is reproducible. Throws IoError.
void emit_report(const RolloutReport& report, const std::filesystem::path& out_dir);

std::string report_json(const RolloutReport& report);
std::string report_table(const RolloutReport& report);
/// Inverse of report_json for the metric fields and poses.
RolloutReport parse_report_json(const std::string& text);
RolloutReport read_report(const std::filesystem::path& metrics_json);

/// Per-frame line plot of one metric.
std::string metric_plot_svg(const RolloutReport& report, bool angular);
/// Front (x-y) and side (z-y) projections of prediction over ground truth.
std::string skeleton_svg(const PoseFrame& pred, const PoseFrame& gt, const std::vector<int>& parents, int frame);

}  // namespace p2p
