#include "dockirl/geometry.hpp"

#include <algorithm>
#include <limits>

namespace dockirl {

std::array<Vec2, 4> OrientedRect::corners() const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const Vec2 ax{c * half_length, s * half_length};
  const Vec2 ay{-s * half_beam, c * half_beam};
  return {center + ax + ay, center - ax + ay, center - ax - ay, center + ax - ay};
}

namespace {

void project(const std::array<Vec2, 4>& pts, Vec2 axis, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (const auto& p : pts) {
    const double d = p.dot(axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

}  // namespace

bool intersects(const OrientedRect& box, const Rect& rect) {
  const auto a = box.corners();
  const std::array<Vec2, 4> b{Vec2{rect.x0, rect.y0}, Vec2{rect.x1, rect.y0},
                              Vec2{rect.x1, rect.y1}, Vec2{rect.x0, rect.y1}};
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  const std::array<Vec2, 4> axes{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}, Vec2{c, s}, Vec2{-s, c}};
  for (const auto& axis : axes) {
    double alo, ahi, blo, bhi;
    project(a, axis, alo, ahi);
    project(b, axis, blo, bhi);
    if (ahi < blo || bhi < alo) return false;
  }
  return true;
}

}  // namespace dockirl
