#include "dockirl/map_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

namespace dockirl {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format6(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double round6(double v) { return std::strtod(format6(v).c_str(), nullptr); }

std::string map_to_csv(const Map2D& map) {
  std::string out;
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      if (c) out += ',';
      out += format6(map(r, c));
    }
    out += '\n';
  }
  return out;
}

Map2D map_from_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) throw std::runtime_error("csv: malformed number '" + field + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("csv: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: empty map");
  Map2D map(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int r = 0; r < map.rows(); ++r)
    for (int c = 0; c < map.cols(); ++c) map(r, c) = rows[r][c];
  return map;
}

namespace {

std::vector<unsigned char> to_gray(const Map2D& map) {
  std::vector<unsigned char> px(map.size(), 128);
  if (map.size() == 0) return px;
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  if (*hi > *lo) {
    for (std::size_t i = 0; i < map.size(); ++i)
      px[i] = static_cast<unsigned char>(std::lround(255.0 * (map[i] - *lo) / (*hi - *lo)));
  }
  return px;
}

std::string pgm_header(int width, int height) {
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

}  // namespace

std::string map_to_pgm(const Map2D& map) {
  const auto px = to_gray(map);
  std::string out = pgm_header(map.cols(), map.rows());
  out.append(px.begin(), px.end());
  return out;
}

std::string panels_to_pgm(const std::vector<Map2D>& panels, int gap) {
  if (panels.empty()) throw std::invalid_argument("panels_to_pgm: no panels");
  const int rows = panels.front().rows();
  int width = 0;
  for (const auto& p : panels) {
    if (p.rows() != rows) throw std::invalid_argument("panels_to_pgm: panel heights differ");
    width += p.cols();
  }
  width += gap * static_cast<int>(panels.size() - 1);
  std::vector<unsigned char> img(static_cast<std::size_t>(width) * rows, 0);
  int x0 = 0;
  for (const auto& p : panels) {
    const auto px = to_gray(p);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < p.cols(); ++c)
        img[static_cast<std::size_t>(r) * width + x0 + c] = px[static_cast<std::size_t>(r) * p.cols() + c];
    x0 += p.cols() + gap;
  }
  std::string out = pgm_header(width, rows);
  out.append(img.begin(), img.end());
  return out;
}

}  // namespace dockirl
