#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dockirl/grid.hpp"

namespace dockirl {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 8-connected moves plus stay. Action a moves by (a / 3 - 1, a % 3 - 1) in (row, col).
constexpr int kNumActions = 9;
constexpr int kStayAction = 4;

inline Cell action_offset(int a) { return {a / 3 - 1, a % 3 - 1}; }

/// Deterministic grid MDP. Moves that would leave the grid or enter a blocked
/// cell leave the agent where it is. Terminal cells absorb: they collect their
/// reward once and the episode ends there.
class GridMDP {
 public:
  GridMDP(int rows, int cols, double gamma);
  GridMDP(Map2D blocked, Map2D terminal, double gamma);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int num_states() const { return rows_ * cols_; }
  double gamma() const { return gamma_; }
  const Map2D& blocked() const { return blocked_; }
  const Map2D& terminal() const { return terminal_; }
  bool is_terminal(int s) const { return terminal_[static_cast<std::size_t>(s)] != 0.0; }
  int state(Cell c) const { return c.row * cols_ + c.col; }
  Cell cell(int s) const { return {s / cols_, s % cols_}; }

  int next(int s, int a) const { return next_[static_cast<std::size_t>(s) * kNumActions + a]; }

 private:
  void build_transitions();

  int rows_;
  int cols_;
  double gamma_;
  Map2D blocked_;
  Map2D terminal_;
  std::vector<int> next_;
};

/// Action probabilities per state, optionally indexed by the number of steps
/// still to go. A table with a single slice is stationary.
///
/// slice(k - 1) holds the policy for a decision taken with k transitions
/// remaining, i.e. the one produced by the k-th soft Bellman backup.
class PolicyTable {
 public:
  PolicyTable() = default;
  PolicyTable(int rows, int cols, int slices = 1);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int num_slices() const { return static_cast<int>(probs_.size()); }
  bool stationary() const { return probs_.size() == 1; }

  double& prob(int slice, int s, int a) { return probs_[slice][static_cast<std::size_t>(s) * kNumActions + a]; }
  double prob(int slice, int s, int a) const { return probs_[slice][static_cast<std::size_t>(s) * kNumActions + a]; }

  /// Slice used at time t of a rollout that visits `horizon` states.
  int slice_for(int t, int horizon) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::vector<double>> probs_;
};

struct SoftViResult {
  /// values[k] is the soft value with k backups; values[0] is the reward.
  std::vector<Map2D> values;
  PolicyTable policy;

  const Map2D& final_values() const { return values.back(); }
  /// log of the partition function over rollouts of `horizon` states from s.
  double log_partition(int s, int horizon) const;
};

/// Finite-horizon soft value iteration:
///   V_0 = r,  V_k(s) = logsumexp_a [ r(s) + gamma * V_{k-1}(s') ],
/// terminal cells pinned to r. Each backup also yields the Boltzmann policy
///   pi_k(a|s) = exp(r(s) + gamma * V_{k-1}(s') - V_k(s)).
SoftViResult soft_value_iteration(const GridMDP& mdp, const RewardMap& reward, int n_iters);

/// Discounted visitation sum_{k < horizon} gamma^k D_k with D_0 = initial.
/// Mass reaching a terminal cell is counted once and then leaves.
SvfMap expected_svf(const GridMDP& mdp, const PolicyTable& policy, const SvfMap& initial, int horizon);

/// Per-state step distributions D_0 .. D_{horizon-1} (no discount applied).
std::vector<SvfMap> state_distributions(const GridMDP& mdp, const PolicyTable& policy, const SvfMap& initial,
                                        int horizon);

SvfMap point_distribution(int rows, int cols, Cell c);

/// dL_D/dR = mu_D - E[mu].
RewardMap maxent_gradient(const SvfMap& expert_svf, const SvfMap& expected);

/// L_D(r) = <mu_D, r> - log Z(start), with the partition taken over rollouts of
/// `horizon` states. Its exact gradient in r is maxent_gradient(mu_D, E[mu]).
double maxent_objective(const GridMDP& mdp, const RewardMap& reward, const SvfMap& expert_svf, Cell start,
                        int horizon);

/// Discounted visitation of a given cell sequence.
SvfMap path_svf(const GridMDP& mdp, const std::vector<Cell>& path);

/// log-probability of a cell sequence under `policy`. A step the MDP cannot
/// make in one move is scored as the single move that heads toward it.
double path_log_likelihood(const GridMDP& mdp, const PolicyTable& policy, const std::vector<Cell>& path);

/// Most likely action at every step, starting from `start`, for `horizon` states.
std::vector<Cell> greedy_rollout(const GridMDP& mdp, const PolicyTable& policy, Cell start, int horizon);

/// Feature vector per state, row-major over the grid.
using StateFeatures = std::vector<std::vector<double>>;

std::vector<double> feature_expectations(const GridMDP& mdp, const PolicyTable& policy,
                                         const StateFeatures& features, const SvfMap& initial, int horizon);

struct LinearIrlParams {
  double learning_rate = 0.1;
  int iters = 200;
};

/// Gradient ascent on the MaxEnt log-likelihood with R(s) = theta . f(s).
std::vector<double> linear_maxent_irl(const GridMDP& mdp, const std::vector<std::vector<Cell>>& demos,
                                      const StateFeatures& features, const LinearIrlParams& params);

RewardMap linear_reward(const GridMDP& mdp, const StateFeatures& features, const std::vector<double>& theta);

}  // namespace dockirl
