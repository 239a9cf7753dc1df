#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dockirl/dockworld.hpp"

namespace dockirl {

class NoPathFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrackingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationStalled : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Path {
  std::vector<Vec2> waypoints;
  double cost = 0.0;
};

struct Trajectory {
  std::vector<VesselState> states;
  double dt = 0.1;

  std::size_t size() const { return states.size(); }
};

struct RrtParams {
  int max_iters = 10000;
  double step_size = 0.3;
  double neighbor_radius = 1.0;
  double goal_bias = 0.05;
  double goal_tolerance = 0.3;
  /// Extra distance kept between the footprint's bounding circle and obstacles.
  double clearance = 0.2;
  /// Spacing of collision samples along an edge.
  double check_step = 0.05;
};

struct PdGains {
  std::array<double, 3> kp{40.0, 40.0, 10.0};
  std::array<double, 3> kd{25.0, 25.0, 6.0};
  std::array<double, 3> force_limit{50.0, 50.0, 20.0};
};

struct TrackingParams {
  PdGains gains;
  double dt = 0.1;
  double lookahead = 0.6;
  /// Distance over which the heading turns to face into the bay.
  double heading_blend = 1.5;
  double max_cross_track = 1.0;
  double time_budget = 300.0;
  /// Tracking stops once within this distance of the last waypoint and slower than stop_speed.
  double stop_radius = 0.1;
  double stop_speed = 0.1;
  /// Final heading; NaN keeps the heading of the last segment.
  double final_heading = std::numeric_limits<double>::quiet_NaN();
  VesselDynamics dynamics;
};

/// Standard RRT* over the vessel's position. The vessel is a point whose
/// collision check is a disc enclosing the footprint at any heading.
Path plan_rrt_star(const World& world, Vec2 start, Vec2 goal, const RrtParams& params,
                   std::uint64_t rng_seed);

/// True when every sample (at `step` spacing) along consecutive waypoints is
/// collision-free for the footprint oriented along its segment.
bool path_footprint_free(const World& world, const Path& path, double step = 0.05);

/// Carrot-following PD tracking of `path`, starting from the world's spawn pose.
Trajectory track_path(const World& world, const Path& path, const TrackingParams& params = {});
Trajectory track_path(const World& world, const Path& path, const VesselState& start,
                      const TrackingParams& params);

struct DatasetRecord {
  World world;
  Trajectory trajectory;
  bool is_train = true;
};

struct Dataset {
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> split(bool train) const;
};

struct GenerationParams {
  WorldConfig world;  ///< seed field is overwritten per record
  RrtParams rrt;
  TrackingParams tracking;
  /// Fraction of failed seeds above which generation is abandoned.
  double max_failure_rate = 0.2;
};

struct GenerationStats {
  int attempts = 0;
  int failures = 0;
};

/// Plans and tracks one expert demonstration in the world built from `seed`.
DatasetRecord generate_record(const GenerationParams& params, std::uint64_t seed);

Dataset generate_dataset(int n_train, int n_test, std::uint64_t base_seed,
                         const GenerationParams& params = {}, GenerationStats* stats = nullptr);

}  // namespace dockirl
