#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace quasistab {

/// Shortest round-trip decimal for x, so equal values always render as the
/// same bytes. Infinities come out as "inf"/"-inf", zero never carries a sign.
std::string format_double(double x);

/// Write content through a temp file and rename it into place, creating
/// parent directories as needed. Readers never see a half-written artifact.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

/// CSV with one header row; all columns must share a length.
std::string csv_table(const std::vector<std::string>& headers,
                      const std::vector<std::vector<double>>& columns);

/// Self-contained decay plot: value on a log axis against time, one
/// polyline plus axes and tick labels. No plotting dependency.
std::string svg_decay_plot(const std::vector<double>& times,
                           const std::vector<double>& values,
                           const std::string& y_label);

}  // namespace quasistab
