#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msl/panel.hpp"

namespace msl {

/// Wide format: header row, first column `t`, one column per path.
PathPanel read_panel_csv(const std::filesystem::path& path, bool scale_max = false);
void write_panel_csv(const std::filesystem::path& path, const PathPanel& panel);

/// Columns of equal length under the given header.
void write_columns_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace msl
