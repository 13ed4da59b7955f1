#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace disent {

/// Shortest-to-write lossless decimal form (17 significant digits).
std::string format_double(double value);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace disent
