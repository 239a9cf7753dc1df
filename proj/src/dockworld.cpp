#include "dockirl/dockworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dockirl/rng.hpp"

namespace dockirl {

void WorldConfig::validate() const {
  const bool ok = dock_size_m > 0 && docks_per_side >= 1 && waterway_width_m > 0 &&
                  pier_width_m > 0 && margin_m > 0 && vessel_length_m > 0 && vessel_beam_m > 0;
  if (!ok) throw std::invalid_argument("world config: lengths must be positive and docks_per_side >= 1");
}

double WorldConfig::world_width() const {
  return docks_per_side * dock_size_m + (docks_per_side - 1) * pier_width_m + 2.0 * margin_m;
}

double WorldConfig::world_height() const {
  return 2.0 * dock_size_m + waterway_width_m + 2.0 * margin_m;
}

Vec2 VesselState::velocity() const {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  return {c * u - s * v, s * u + c * v};
}

Rect World::waterway() const {
  const double y0 = config.margin_m + config.dock_size_m;
  return {0.0, y0, config.world_width(), y0 + config.waterway_width_m};
}

double World::bay_entry_heading(int bay) const {
  return is_north_bay(bay) ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
}

std::vector<Rect> World::obstacles() const {
  std::vector<Rect> out = piers;
  out.insert(out.end(), walls.begin(), walls.end());
  for (std::size_t i = 0; i < bays.size(); ++i) {
    if (occupied[i]) out.push_back(bays[i]);
  }
  return out;
}

bool World::point_blocked(Vec2 p) const {
  if (!bounds().contains(p)) return true;
  for (const auto& r : piers)
    if (r.contains(p)) return true;
  for (const auto& r : walls)
    if (r.contains(p)) return true;
  for (std::size_t i = 0; i < bays.size(); ++i)
    if (occupied[i] && bays[i].contains(p)) return true;
  return false;
}

bool World::disc_free(Vec2 p, double radius) const {
  const Rect b = bounds();
  if (p.x - radius < b.x0 || p.x + radius > b.x1 || p.y - radius < b.y0 || p.y + radius > b.y1)
    return false;
  for (const auto& r : piers)
    if (r.distance_to(p) <= radius) return false;
  for (const auto& r : walls)
    if (r.distance_to(p) <= radius) return false;
  for (std::size_t i = 0; i < bays.size(); ++i)
    if (occupied[i] && bays[i].distance_to(p) <= radius) return false;
  return true;
}

OrientedRect World::footprint(const VesselState& s) const {
  return {{s.x, s.y}, s.psi, 0.5 * config.vessel_length_m, 0.5 * config.vessel_beam_m};
}

World layout_world(const WorldConfig& config) {
  config.validate();
  World w;
  w.config = config;
  const int n = config.docks_per_side;
  const double dock = config.dock_size_m;
  const double pier = config.pier_width_m;
  const double m = config.margin_m;
  const double width = config.world_width();
  const double height = config.world_height();
  const std::array<double, 2> row_y0{m, height - m - dock};

  for (double y0 : row_y0) {
    for (int i = 0; i < n; ++i) {
      const double x0 = m + i * (dock + pier);
      w.bays.push_back({x0, y0, x0 + dock, y0 + dock});
    }
  }
  for (double y0 : row_y0) {
    w.piers.push_back({std::max(0.0, m - pier), y0, m, y0 + dock});
    for (int i = 0; i + 1 < n; ++i) {
      const double x0 = m + i * (dock + pier) + dock;
      w.piers.push_back({x0, y0, x0 + pier, y0 + dock});
    }
    w.piers.push_back({width - m, y0, std::min(width, width - m + pier), y0 + dock});
  }
  w.walls.push_back({0.0, 0.0, width, m});
  w.walls.push_back({0.0, height - m, width, height});
  w.occupied.assign(w.bays.size(), false);
  return w;
}

namespace {

int nearest_free_bay(const World& w, Vec2 p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.bays.size(); ++i) {
    if (w.occupied[i]) continue;
    const double d = distance(w.bays[i].center(), p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

World build_world(const WorldConfig& config) {
  World w = layout_world(config);
  Rng rng(config.seed);

  std::vector<int> order(w.bays.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  for (std::size_t k = 0; k < order.size() / 2; ++k) w.occupied[order[k]] = true;

  const double len = config.vessel_length_m;
  const double half_diag = 0.5 * std::hypot(config.vessel_length_m, config.vessel_beam_m);
  const Rect water = w.waterway();
  const double x_lo = config.margin_m + len;
  const double x_hi = config.world_width() - config.margin_m - len;
  const double y_lo = water.y0 + len;
  const double y_hi = water.y1 - len;
  for (int attempt = 0; attempt < 1000 && x_lo <= x_hi && y_lo <= y_hi; ++attempt) {
    const double x = rng.uniform(x_lo, x_hi);
    const double y = rng.uniform(y_lo, y_hi);
    const double psi = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    if (!w.disc_free({x, y}, half_diag + len)) continue;
    w.spawn_pose = VesselState{x, y, psi, 0.0, 0.0, 0.0, 0.0};
    w.goal_bay = nearest_free_bay(w, {x, y});
    return w;
  }
  throw DegenerateWorld("no collision-free spawn found in 1000 attempts (seed " +
                        std::to_string(config.seed) + ")");
}

bool is_collision(const World& world, const VesselState& state) {
  const OrientedRect box = world.footprint(state);
  const Rect b = world.bounds();
  for (const auto& c : box.corners()) {
    if (!b.contains(c)) return true;
  }
  for (const auto& r : world.piers)
    if (intersects(box, r)) return true;
  for (const auto& r : world.walls)
    if (intersects(box, r)) return true;
  for (std::size_t i = 0; i < world.bays.size(); ++i)
    if (world.occupied[i] && intersects(box, world.bays[i])) return true;
  return false;
}

VesselState step_vessel(const VesselState& s, const std::array<double, 3>& force, double dt,
                        const VesselDynamics& dyn) {
  VesselState n = s;
  n.u = s.u + dt * (force[0] - dyn.damping_u * s.u) / dyn.mass;
  n.v = s.v + dt * (force[1] - dyn.damping_v * s.v) / dyn.mass;
  n.r = s.r + dt * (force[2] - dyn.damping_r * s.r) / dyn.yaw_inertia;

  // Pose integrates the mean of old and new body velocities, which is exact
  // for constant acceleration.
  const double u = 0.5 * (s.u + n.u);
  const double v = 0.5 * (s.v + n.v);
  const double r = 0.5 * (s.r + n.r);
  const double c = std::cos(s.psi);
  const double sn = std::sin(s.psi);
  n.x = s.x + dt * (c * u - sn * v);
  n.y = s.y + dt * (sn * u + c * v);
  n.psi = wrap_angle(s.psi + dt * r);
  n.t = s.t + dt;
  return n;
}

}  // namespace dockirl
