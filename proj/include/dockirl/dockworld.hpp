#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dockirl/geometry.hpp"

namespace dockirl {

struct WorldConfig {
  double dock_size_m = 3.0;
  int docks_per_side = 4;
  double waterway_width_m = 8.0;
  double pier_width_m = 1.0;
  double margin_m = 2.0;
  double vessel_length_m = 1.0;
  double vessel_beam_m = 0.5;
  std::uint64_t seed = 0;

  bool operator==(const WorldConfig&) const = default;

  /// Throws std::invalid_argument on non-positive lengths or dock count.
  void validate() const;
  double world_width() const;
  double world_height() const;
};

struct VesselState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double u = 0.0;
  double v = 0.0;
  double r = 0.0;
  double t = 0.0;

  bool operator==(const VesselState&) const = default;

  Vec2 position() const { return {x, y}; }
  /// World-frame velocity.
  Vec2 velocity() const;
};

/// Rigid-body constants of the fully actuated 3-DOF vessel.
struct VesselDynamics {
  double mass = 20.0;
  double yaw_inertia = 5.0;
  double damping_u = 10.0;
  double damping_v = 10.0;
  double damping_r = 2.0;
};

class DegenerateWorld : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Static dock geometry. Immutable once built.
///
/// Layout (world frame, origin at the bottom-left of the bounding box): a row
/// of bays along the south quay, the waterway, and a mirrored row along the
/// north quay. Piers separate neighbouring bays and close the outer end of
/// each row; quay walls fill the margin behind each row.
struct World {
  WorldConfig config;
  std::vector<Rect> bays;  ///< south row (west to east), then north row
  std::vector<Rect> piers;
  std::vector<Rect> walls;
  std::vector<bool> occupied;
  int goal_bay = 0;
  VesselState spawn_pose;

  bool operator==(const World&) const = default;

  Rect bounds() const { return {0.0, 0.0, config.world_width(), config.world_height()}; }
  Rect waterway() const;
  bool is_north_bay(int bay) const { return bay >= config.docks_per_side; }
  /// Heading that points from the waterway into the bay.
  double bay_entry_heading(int bay) const;
  /// Every rectangle the vessel must not touch: piers, walls and occupied bays.
  std::vector<Rect> obstacles() const;
  /// True when p is inside an obstacle or outside the bounding box.
  bool point_blocked(Vec2 p) const;
  /// True when a disc of the given radius around p is free and inside the box.
  bool disc_free(Vec2 p, double radius) const;
  OrientedRect footprint(const VesselState& s) const;
};

/// Piers, walls and bay rectangles for a config; no randomness involved.
World layout_world(const WorldConfig& config);

World build_world(const WorldConfig& config);

bool is_collision(const World& world, const VesselState& state);

/// One step of the damped rigid body under generalized body-frame forces
/// (surge force, sway force, yaw moment).
VesselState step_vessel(const VesselState& state, const std::array<double, 3>& force, double dt,
                        const VesselDynamics& dyn = {});

}  // namespace dockirl
