#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dockirl/dockworld.hpp"
#include "dockirl/gridmdp.hpp"

namespace dockirl::oracles {

struct SuiteResult {
  std::string name;
  bool passed = false;
  int cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Exhaustive rollout enumeration: each distinct state sequence from `start`
/// with its probability, plus the discounted visitation it implies.
struct Enumeration {
  std::map<std::vector<int>, double> paths;
  SvfMap svf;
  double log_partition = 0.0;
};

/// Soft values and the time-indexed Boltzmann policy computed by plain
/// recursion over every action sequence (no tables shared with GridMDP).
Enumeration enumerate_soft_policy(const Map2D& blocked, const Map2D& terminal, const RewardMap& reward,
                                  double gamma, Cell start, int horizon);

/// Undiscounted case: every action sequence has probability exp(sum of
/// rewards) / Z, with sequences ending at the first terminal cell.
Enumeration enumerate_boltzmann_paths(const Map2D& blocked, const Map2D& terminal, const RewardMap& reward,
                                      Cell start, int horizon);

/// Same state-sequence distribution, read off a PolicyTable.
std::map<std::vector<int>, double> policy_path_distribution(const GridMDP& mdp, const PolicyTable& policy,
                                                            Cell start, int horizon);

/// Relative error used by the finite-difference suites.
double relative_error(double analytic, double numeric);

/// Every grid up to max_side x max_side, every horizon up to max_horizon, `maps` random rewards each.
SuiteResult svf_enumeration_suite(std::uint64_t seed, int max_side = 4, int max_horizon = 6, int maps = 5);
/// Exact finite differences of L_D per reward cell on 4x4 grids.
SuiteResult maxent_gradient_suite(std::uint64_t seed, int instances = 5);
/// Central differences of sum(d_reward * forward) for sampled network parameters.
SuiteResult rewardnet_gradient_suite(std::uint64_t seed, int sampled_params = 240, int cells = 8);
/// Network parameter -> reward -> soft VI log-partition chain on an 8x8 window.
SuiteResult end_to_end_gradient_suite(std::uint64_t seed, int sampled_params = 60);
/// SAT collision test against a 1 cm rasterisation of the footprint.
SuiteResult collision_raster_suite(std::uint64_t seed, int states = 10000);
/// Linear MaxEnt IRL on a 5x5 world: held-out greedy paths must end where the
/// known reward's do.
SuiteResult linear_irl_suite(std::uint64_t seed, int held_out = 20);

std::vector<SuiteResult> run_all(std::uint64_t seed = 0);

}  // namespace dockirl::oracles
