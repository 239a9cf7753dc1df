#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dockirl {

/// Grid cell; row 0 is the northern (top) edge, col 0 the western edge.
struct Cell {
  int row = 0;
  int col = 0;

  bool operator==(const Cell&) const = default;
};

/// Dense row-major scalar grid. Houses reward maps and visitation maps.
class Map2D {
 public:
  Map2D() = default;
  Map2D(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Map2D: negative size");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Map2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(Cell c) { return (*this)(c.row, c.col); }
  double at(Cell c) const { return (*this)(c.row, c.col); }

  bool contains(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < rows_ && c.col < cols_; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * cols_ + c.col; }
  Cell cell(std::size_t i) const {
    return {static_cast<int>(i / cols_), static_cast<int>(i % cols_)};
  }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  bool operator==(const Map2D&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

using RewardMap = Map2D;
using SvfMap = Map2D;

}  // namespace dockirl
