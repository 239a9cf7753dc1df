#pragma once

#include <optional>
#include <vector>

#include "dockirl/dockworld.hpp"
#include "dockirl/expert_gen.hpp"
#include "dockirl/grid.hpp"

namespace dockirl {

/// Square window translated (not rotated) with the vessel. The vessel sits at
/// the centre of cell (N/2, N/2).
struct GridSpec {
  int cells_per_side = 32;
  double window_m = 4.0;

  void validate() const;
  double resolution() const { return window_m / cells_per_side; }
  Cell center_cell() const { return {cells_per_side / 2, cells_per_side / 2}; }
  /// World position of a cell centre for a window centred on `center`.
  Vec2 cell_center(Vec2 center, Cell c) const;
  /// Cell containing p, or nullopt when p is outside the window.
  std::optional<Cell> cell_of(Vec2 center, Vec2 p) const;
};

enum Channel : int {
  kEnvironment = 0,
  kGoalProximity = 1,
  kGoalRegion = 2,
  kPastTrajectory = 3,
  kVelX = 4,
  kVelY = 5,
  kYawRate = 6,
  kPosX = 7,
  kPosY = 8,
  kNumChannels = 9,
};

constexpr int kEnvChannels = 4;
constexpr int kKinematicChannels = 5;

/// Channel-major [channels x N x N] feature grid.
class FeatureStack {
 public:
  FeatureStack() = default;
  FeatureStack(int channels, int cells) : channels_(channels), cells_(cells), data_(static_cast<std::size_t>(channels) * cells * cells, 0.0) {}

  int channels() const { return channels_; }
  int cells() const { return cells_; }
  double& operator()(int ch, int r, int c) { return data_[(static_cast<std::size_t>(ch) * cells_ + r) * cells_ + c]; }
  double operator()(int ch, int r, int c) const { return data_[(static_cast<std::size_t>(ch) * cells_ + r) * cells_ + c]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }
  Map2D channel(int ch) const;

  bool operator==(const FeatureStack&) const = default;

 private:
  int channels_ = 0;
  int cells_ = 0;
  std::vector<double> data_;
};

/// Number of past positions (current one included) drawn in the trajectory channel.
constexpr int kPastTrajectoryLength = 20;

FeatureStack extract_features(const World& world, const Trajectory& trajectory, std::size_t t_index,
                              const GridSpec& spec = {});

struct ExpertWindow {
  SvfMap svf;
  std::vector<Cell> cells;  ///< visited cells, one per counted step
};

/// Empirical discounted visitation of the recorded future inside the window.
/// Counting stops at the horizon, at the end of the trajectory, at the first
/// position outside the window, or right after the first cell flagged in
/// `stop` (when given).
ExpertWindow expert_svf_window(const Trajectory& trajectory, std::size_t t_index, const GridSpec& spec,
                               int horizon, double gamma, const Map2D* stop = nullptr);

}  // namespace dockirl
