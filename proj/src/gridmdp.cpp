#include "dockirl/gridmdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dockirl {

GridMDP::GridMDP(int rows, int cols, double gamma)
    : GridMDP(Map2D(rows, cols), Map2D(rows, cols), gamma) {}

GridMDP::GridMDP(Map2D blocked, Map2D terminal, double gamma)
    : rows_(blocked.rows()), cols_(blocked.cols()), gamma_(gamma), blocked_(std::move(blocked)),
      terminal_(std::move(terminal)) {
  if (rows_ < 1 || cols_ < 1) throw std::invalid_argument("GridMDP: empty grid");
  if (!blocked_.same_shape(terminal_)) throw ShapeMismatch("GridMDP: blocked/terminal shapes differ");
  if (!(gamma_ >= 0.0 && gamma_ <= 1.0)) throw std::invalid_argument("GridMDP: gamma must be in [0, 1]");
  build_transitions();
}

void GridMDP::build_transitions() {
  next_.resize(static_cast<std::size_t>(num_states()) * kNumActions);
  for (int s = 0; s < num_states(); ++s) {
    const Cell c = cell(s);
    for (int a = 0; a < kNumActions; ++a) {
      const Cell d = action_offset(a);
      const Cell t{c.row + d.row, c.col + d.col};
      const bool ok = blocked_.contains(t) && blocked_.at(t) == 0.0;
      next_[static_cast<std::size_t>(s) * kNumActions + a] = ok ? state(t) : s;
    }
  }
}

PolicyTable::PolicyTable(int rows, int cols, int slices)
    : rows_(rows), cols_(cols),
      probs_(static_cast<std::size_t>(slices), std::vector<double>(static_cast<std::size_t>(rows) * cols * kNumActions, 0.0)) {
  if (slices < 1) throw std::invalid_argument("PolicyTable: needs at least one slice");
}

int PolicyTable::slice_for(int t, int horizon) const {
  if (stationary()) return 0;
  const int remaining = horizon - 1 - t;
  if (remaining < 1 || remaining > num_slices())
    throw std::out_of_range("PolicyTable: horizon " + std::to_string(horizon) + " exceeds the " +
                            std::to_string(num_slices()) + " backups available");
  return remaining - 1;
}

double SoftViResult::log_partition(int s, int horizon) const {
  if (horizon < 1 || horizon > static_cast<int>(values.size()))
    throw std::out_of_range("log_partition: horizon exceeds the backups available");
  return values[static_cast<std::size_t>(horizon - 1)][static_cast<std::size_t>(s)];
}

SoftViResult soft_value_iteration(const GridMDP& mdp, const RewardMap& reward, int n_iters) {
  if (n_iters < 1) throw std::invalid_argument("soft_value_iteration: n_iters must be >= 1");
  if (reward.rows() != mdp.rows() || reward.cols() != mdp.cols())
    throw ShapeMismatch("soft_value_iteration: reward shape does not match the MDP");
  const int n = mdp.num_states();
  const double gamma = mdp.gamma();

  SoftViResult out;
  out.values.reserve(static_cast<std::size_t>(n_iters) + 1);
  out.values.push_back(reward);
  out.policy = PolicyTable(mdp.rows(), mdp.cols(), n_iters);

  std::array<double, kNumActions> q{};
  for (int k = 1; k <= n_iters; ++k) {
    const Map2D& prev = out.values.back();
    Map2D v(mdp.rows(), mdp.cols());
    for (int s = 0; s < n; ++s) {
      const double rs = reward[static_cast<std::size_t>(s)];
      if (mdp.is_terminal(s)) {
        v[static_cast<std::size_t>(s)] = rs;
        out.policy.prob(k - 1, s, kStayAction) = 1.0;
        continue;
      }
      double q_max = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) {
        q[a] = rs + gamma * prev[static_cast<std::size_t>(mdp.next(s, a))];
        q_max = std::max(q_max, q[a]);
      }
      double z = 0.0;
      for (int a = 0; a < kNumActions; ++a) z += std::exp(q[a] - q_max);
      const double value = q_max + std::log(z);
      v[static_cast<std::size_t>(s)] = value;
      for (int a = 0; a < kNumActions; ++a) out.policy.prob(k - 1, s, a) = std::exp(q[a] - value);
    }
    out.values.push_back(std::move(v));
  }
  return out;
}

std::vector<SvfMap> state_distributions(const GridMDP& mdp, const PolicyTable& policy, const SvfMap& initial,
                                        int horizon) {
  if (horizon < 1) throw std::invalid_argument("expected_svf: horizon must be >= 1");
  if (initial.rows() != mdp.rows() || initial.cols() != mdp.cols() || policy.rows() != mdp.rows() ||
      policy.cols() != mdp.cols())
    throw ShapeMismatch("expected_svf: shapes do not match the MDP");
  std::vector<SvfMap> out{initial};
  out.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t + 1 < horizon; ++t) {
    const int slice = policy.slice_for(t, horizon);
    const SvfMap& d = out.back();
    SvfMap next(mdp.rows(), mdp.cols());
    for (int s = 0; s < mdp.num_states(); ++s) {
      const double mass = d[static_cast<std::size_t>(s)];
      if (mass == 0.0 || mdp.is_terminal(s)) continue;
      for (int a = 0; a < kNumActions; ++a)
        next[static_cast<std::size_t>(mdp.next(s, a))] += mass * policy.prob(slice, s, a);
    }
    out.push_back(std::move(next));
  }
  return out;
}

SvfMap expected_svf(const GridMDP& mdp, const PolicyTable& policy, const SvfMap& initial, int horizon) {
  const auto dists = state_distributions(mdp, policy, initial, horizon);
  SvfMap svf(mdp.rows(), mdp.cols());
  double weight = 1.0;
  for (const auto& d : dists) {
    for (std::size_t i = 0; i < svf.size(); ++i) svf[i] += weight * d[i];
    weight *= mdp.gamma();
  }
  return svf;
}

SvfMap point_distribution(int rows, int cols, Cell c) {
  SvfMap m(rows, cols);
  m.at(c) = 1.0;
  return m;
}

RewardMap maxent_gradient(const SvfMap& expert_svf, const SvfMap& expected) {
  if (!expert_svf.same_shape(expected)) throw ShapeMismatch("maxent_gradient: SVF shapes differ");
  RewardMap g(expert_svf.rows(), expert_svf.cols());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = expert_svf[i] - expected[i];
  return g;
}

double maxent_objective(const GridMDP& mdp, const RewardMap& reward, const SvfMap& expert_svf, Cell start,
                        int horizon) {
  if (!reward.same_shape(expert_svf)) throw ShapeMismatch("maxent_objective: shapes differ");
  const auto vi = soft_value_iteration(mdp, reward, std::max(1, horizon - 1));
  double dot = 0.0;
  for (std::size_t i = 0; i < reward.size(); ++i) dot += expert_svf[i] * reward[i];
  return dot - vi.log_partition(mdp.state(start), horizon);
}

SvfMap path_svf(const GridMDP& mdp, const std::vector<Cell>& path) {
  SvfMap m(mdp.rows(), mdp.cols());
  double w = 1.0;
  for (const auto& c : path) {
    m.at(c) += w;
    w *= mdp.gamma();
  }
  return m;
}

double path_log_likelihood(const GridMDP& mdp, const PolicyTable& policy, const std::vector<Cell>& path) {
  const int horizon = static_cast<int>(path.size());
  double ll = 0.0;
  for (int t = 0; t + 1 < horizon; ++t) {
    const int s = mdp.state(path[t]);
    if (mdp.is_terminal(s)) break;
    const int target = mdp.state(path[t + 1]);
    const int slice = policy.slice_for(t, horizon);
    double p = 0.0;
    for (int a = 0; a < kNumActions; ++a)
      if (mdp.next(s, a) == target) p += policy.prob(slice, s, a);
    if (p == 0.0) {
      const int dr = (path[t + 1].row > path[t].row) - (path[t + 1].row < path[t].row);
      const int dc = (path[t + 1].col > path[t].col) - (path[t + 1].col < path[t].col);
      p = policy.prob(slice, s, (dr + 1) * 3 + (dc + 1));
    }
    ll += std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  return ll;
}

std::vector<Cell> greedy_rollout(const GridMDP& mdp, const PolicyTable& policy, Cell start, int horizon) {
  std::vector<Cell> path{start};
  int s = mdp.state(start);
  for (int t = 0; t + 1 < horizon; ++t) {
    if (mdp.is_terminal(s)) break;
    const int slice = policy.slice_for(t, horizon);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (policy.prob(slice, s, a) > policy.prob(slice, s, best)) best = a;
    s = mdp.next(s, best);
    path.push_back(mdp.cell(s));
  }
  return path;
}

std::vector<double> feature_expectations(const GridMDP& mdp, const PolicyTable& policy,
                                         const StateFeatures& features, const SvfMap& initial, int horizon) {
  if (static_cast<int>(features.size()) != mdp.num_states())
    throw ShapeMismatch("feature_expectations: one feature vector per state required");
  const std::size_t dim = features.front().size();
  const SvfMap svf = expected_svf(mdp, policy, initial, horizon);
  std::vector<double> out(dim, 0.0);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (features[static_cast<std::size_t>(s)].size() != dim) throw ShapeMismatch("feature_expectations: ragged features");
    for (std::size_t j = 0; j < dim; ++j) out[j] += svf[static_cast<std::size_t>(s)] * features[static_cast<std::size_t>(s)][j];
  }
  return out;
}

RewardMap linear_reward(const GridMDP& mdp, const StateFeatures& features, const std::vector<double>& theta) {
  if (static_cast<int>(features.size()) != mdp.num_states()) throw ShapeMismatch("linear_reward: feature count");
  RewardMap r(mdp.rows(), mdp.cols());
  for (int s = 0; s < mdp.num_states(); ++s) {
    const auto& f = features[static_cast<std::size_t>(s)];
    if (f.size() != theta.size()) throw ShapeMismatch("linear_reward: feature/weight dimension mismatch");
    double v = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) v += theta[j] * f[j];
    r[static_cast<std::size_t>(s)] = v;
  }
  return r;
}

std::vector<double> linear_maxent_irl(const GridMDP& mdp, const std::vector<std::vector<Cell>>& demos,
                                      const StateFeatures& features, const LinearIrlParams& params) {
  if (demos.empty()) throw std::invalid_argument("linear_maxent_irl: no demonstrations");
  if (static_cast<int>(features.size()) != mdp.num_states() || features.front().empty())
    throw ShapeMismatch("linear_maxent_irl: one non-empty feature vector per state required");
  int max_len = 1;
  for (const auto& d : demos) {
    if (d.empty()) throw std::invalid_argument("linear_maxent_irl: empty demonstration");
    for (const auto& c : d)
      if (!mdp.blocked().contains(c)) throw std::invalid_argument("linear_maxent_irl: demo leaves the grid");
    max_len = std::max(max_len, static_cast<int>(d.size()));
  }
  const std::size_t dim = features.front().size();
  std::vector<double> theta(dim, 0.0);

  for (int it = 0; it < params.iters; ++it) {
    const RewardMap reward = linear_reward(mdp, features, theta);
    const auto vi = soft_value_iteration(mdp, reward, std::max(1, max_len - 1));
    std::vector<double> grad(dim, 0.0);
    for (const auto& demo : demos) {
      const int horizon = static_cast<int>(demo.size());
      const SvfMap mu_d = path_svf(mdp, demo);
      const SvfMap mu = expected_svf(mdp, vi.policy, point_distribution(mdp.rows(), mdp.cols(), demo.front()), horizon);
      for (int s = 0; s < mdp.num_states(); ++s) {
        const double diff = mu_d[static_cast<std::size_t>(s)] - mu[static_cast<std::size_t>(s)];
        if (diff == 0.0) continue;
        for (std::size_t j = 0; j < dim; ++j) grad[j] += diff * features[static_cast<std::size_t>(s)][j];
      }
    }
    double max_abs = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      theta[j] += params.learning_rate * grad[j] / static_cast<double>(demos.size());
      max_abs = std::max(max_abs, std::abs(theta[j]));
    }
    if (!(max_abs <= 1e6)) throw std::runtime_error("linear_maxent_irl: weights diverged");
  }
  return theta;
}

}  // namespace dockirl
