#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace dockirl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Closed axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool operator==(const Rect&) const = default;

  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  Rect translated(Vec2 d) const { return {x0 + d.x, y0 + d.y, x1 + d.x, y1 + d.y}; }

  /// Euclidean distance from p to the rectangle (0 inside).
  double distance_to(Vec2 p) const {
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    return std::hypot(dx, dy);
  }
};

/// Rectangle of size length x beam centred at `center`, long axis along `heading`.
struct OrientedRect {
  Vec2 center;
  double heading = 0.0;
  double half_length = 0.0;
  double half_beam = 0.0;

  std::array<Vec2, 4> corners() const;
};

/// Separating-axis test; touching boundaries count as intersecting.
bool intersects(const OrientedRect& box, const Rect& rect);

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

}  // namespace dockirl
