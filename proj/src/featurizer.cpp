#include "dockirl/featurizer.hpp"

#include <cmath>
#include <stdexcept>

namespace dockirl {

void GridSpec::validate() const {
  if (cells_per_side < 8 || cells_per_side % 2 != 0 || !(window_m > 0.0))
    throw std::invalid_argument("grid spec: cells_per_side must be even and >= 8, window_m > 0");
}

Vec2 GridSpec::cell_center(Vec2 center, Cell c) const {
  const int half = cells_per_side / 2;
  const double res = resolution();
  return {center.x + (c.col - half) * res, center.y + (half - c.row) * res};
}

std::optional<Cell> GridSpec::cell_of(Vec2 center, Vec2 p) const {
  const int half = cells_per_side / 2;
  const double res = resolution();
  const int col = half + static_cast<int>(std::floor((p.x - center.x) / res + 0.5));
  const int row = half - static_cast<int>(std::floor((p.y - center.y) / res + 0.5));
  if (row < 0 || col < 0 || row >= cells_per_side || col >= cells_per_side) return std::nullopt;
  return Cell{row, col};
}

Map2D FeatureStack::channel(int ch) const {
  Map2D m(cells_, cells_);
  for (int r = 0; r < cells_; ++r)
    for (int c = 0; c < cells_; ++c) m(r, c) = (*this)(ch, r, c);
  return m;
}

FeatureStack extract_features(const World& world, const Trajectory& trajectory, std::size_t t_index,
                              const GridSpec& spec) {
  spec.validate();
  if (t_index >= trajectory.size()) throw std::out_of_range("extract_features: t_index out of range");
  const int n = spec.cells_per_side;
  const int half = n / 2;
  FeatureStack f(kNumChannels, n);
  const VesselState& s = trajectory.states[t_index];
  const Vec2 center = s.position();
  const Rect goal = world.bays[world.goal_bay];
  const Vec2 goal_center = goal.center();
  const double d_max = 0.5 * std::hypot(world.config.world_width(), world.config.world_height());
  const Vec2 vel = s.velocity();

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Vec2 p = spec.cell_center(center, {r, c});
      f(kEnvironment, r, c) = world.point_blocked(p) ? 1.0 : 0.0;
      f(kGoalProximity, r, c) = std::max(0.0, 1.0 - distance(p, goal_center) / d_max);
      f(kGoalRegion, r, c) = goal.contains(p) ? 1.0 : 0.0;
      f(kVelX, r, c) = vel.x;
      f(kVelY, r, c) = vel.y;
      f(kYawRate, r, c) = s.r;
      f(kPosX, r, c) = static_cast<double>(c - half) / half;
      f(kPosY, r, c) = static_cast<double>(half - r) / half;
    }
  }
  const std::size_t first = t_index + 1 >= kPastTrajectoryLength ? t_index + 1 - kPastTrajectoryLength : 0;
  for (std::size_t i = first; i <= t_index; ++i) {
    if (const auto cell = spec.cell_of(center, trajectory.states[i].position()))
      f(kPastTrajectory, cell->row, cell->col) = 1.0;
  }
  return f;
}

ExpertWindow expert_svf_window(const Trajectory& trajectory, std::size_t t_index, const GridSpec& spec,
                               int horizon, double gamma, const Map2D* stop) {
  spec.validate();
  if (t_index >= trajectory.size()) throw std::out_of_range("expert_svf_window: t_index out of range");
  if (horizon < 1) throw std::invalid_argument("expert_svf_window: horizon must be >= 1");
  const int n = spec.cells_per_side;
  ExpertWindow out{SvfMap(n, n), {}};
  const Vec2 center = trajectory.states[t_index].position();
  double weight = 1.0;
  for (int k = 0; k < horizon && t_index + k < trajectory.size(); ++k) {
    const auto cell = spec.cell_of(center, trajectory.states[t_index + k].position());
    if (!cell) break;
    out.svf.at(*cell) += weight;
    out.cells.push_back(*cell);
    if (stop && stop->at(*cell) != 0.0) break;
    weight *= gamma;
  }
  return out;
}

}  // namespace dockirl
