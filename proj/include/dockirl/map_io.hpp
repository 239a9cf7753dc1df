#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dockirl/grid.hpp"

namespace dockirl {

/// Writes via a temporary sibling file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Formats with 6 significant digits (printf %.6g).
std::string format6(double v);
/// Rounds to the value that format6 would print.
double round6(double v);

/// Row-major CSV, one grid row per line, 6 significant digits.
std::string map_to_csv(const Map2D& map);
Map2D map_from_csv(std::string_view text);

/// Binary 8-bit PGM (P5). Values map linearly from [min, max] onto [0, 255];
/// a constant map renders as mid-gray (128).
std::string map_to_pgm(const Map2D& map);
/// Panels side by side, each normalised on its own, separated by `gap` black columns.
std::string panels_to_pgm(const std::vector<Map2D>& panels, int gap = 2);

}  // namespace dockirl
