#include "dockirl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "dockirl/featurizer.hpp"
#include "dockirl/rewardnet.hpp"
#include "dockirl/rng.hpp"
#include "dockirl/trainer.hpp"

namespace dockirl::oracles {

namespace {

struct Grid {
  const Map2D& blocked;
  const Map2D& terminal;

  int rows() const { return blocked.rows(); }
  int cols() const { return blocked.cols(); }

  // Written out again instead of borrowing GridMDP::next.
  int move(int s, int a) const {
    const int r = s / cols() + (a / 3 - 1);
    const int c = s % cols() + (a % 3 - 1);
    if (r < 0 || c < 0 || r >= rows() || c >= cols() || blocked(r, c) != 0.0) return s;
    return r * cols() + c;
  }
  bool is_terminal(int s) const { return terminal[static_cast<std::size_t>(s)] != 0.0; }
};

double soft_value(const Grid& g, const RewardMap& reward, double gamma, int s, int k) {
  const double r = reward[static_cast<std::size_t>(s)];
  if (k == 0 || g.is_terminal(s)) return r;
  double q[kNumActions];
  double top = -INFINITY;
  for (int a = 0; a < kNumActions; ++a) {
    q[a] = r + gamma * soft_value(g, reward, gamma, g.move(s, a), k - 1);
    top = std::max(top, q[a]);
  }
  double z = 0.0;
  for (double v : q) z += std::exp(v - top);
  return top + std::log(z);
}

void add_visits(SvfMap& svf, const std::vector<int>& path, double p, double gamma) {
  double w = p;
  for (int s : path) {
    svf[static_cast<std::size_t>(s)] += w;
    w *= gamma;
  }
}

std::string describe(const char* what, double err, double tol) {
  std::ostringstream out;
  out << what << ": max error " << err << " (tolerance " << tol << ")";
  return out.str();
}

Map2D random_mask(Rng& rng, int rows, int cols, double p) {
  Map2D m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < p ? 1.0 : 0.0;
  return m;
}

RewardMap random_reward(Rng& rng, int rows, int cols, double scale) {
  RewardMap r(rows, cols);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-scale, scale);
  return r;
}

Cell random_free_cell(Rng& rng, const Map2D& blocked) {
  std::vector<Cell> free;
  for (std::size_t i = 0; i < blocked.size(); ++i)
    if (blocked[i] == 0.0) free.push_back(blocked.cell(i));
  return free[rng.below(free.size())];
}

}  // namespace

Enumeration enumerate_soft_policy(const Map2D& blocked, const Map2D& terminal, const RewardMap& reward,
                                  double gamma, Cell start, int horizon) {
  const Grid g{blocked, terminal};
  Enumeration out{{}, SvfMap(blocked.rows(), blocked.cols()), 0.0};
  const int s0 = start.row * g.cols() + start.col;
  out.log_partition = soft_value(g, reward, gamma, s0, horizon - 1);

  std::vector<int> path{s0};
  std::function<void(int, double)> walk = [&](int t, double p) {
    const int s = path.back();
    if (t == horizon - 1 || g.is_terminal(s)) {
      out.paths[path] += p;
      add_visits(out.svf, path, p, gamma);
      return;
    }
    const int k = horizon - 1 - t;
    const double v = soft_value(g, reward, gamma, s, k);
    for (int a = 0; a < kNumActions; ++a) {
      const int next = g.move(s, a);
      const double pi = std::exp(reward[static_cast<std::size_t>(s)] + gamma * soft_value(g, reward, gamma, next, k - 1) - v);
      path.push_back(next);
      walk(t + 1, p * pi);
      path.pop_back();
    }
  };
  walk(0, 1.0);
  return out;
}

Enumeration enumerate_boltzmann_paths(const Map2D& blocked, const Map2D& terminal, const RewardMap& reward,
                                      Cell start, int horizon) {
  const Grid g{blocked, terminal};
  const int s0 = start.row * g.cols() + start.col;
  std::vector<std::pair<std::vector<int>, double>> leaves;  // path, sum of rewards
  std::vector<int> path{s0};
  std::function<void(int, double)> walk = [&](int t, double ret) {
    const int s = path.back();
    ret += reward[static_cast<std::size_t>(s)];
    if (t == horizon - 1 || g.is_terminal(s)) {
      leaves.emplace_back(path, ret);
      return;
    }
    for (int a = 0; a < kNumActions; ++a) {
      path.push_back(g.move(s, a));
      walk(t + 1, ret);
      path.pop_back();
    }
  };
  walk(0, 0.0);

  double top = -INFINITY;
  for (const auto& [p, ret] : leaves) top = std::max(top, ret);
  double z = 0.0;
  for (const auto& [p, ret] : leaves) z += std::exp(ret - top);
  Enumeration out{{}, SvfMap(blocked.rows(), blocked.cols()), top + std::log(z)};
  for (const auto& [p, ret] : leaves) {
    const double prob = std::exp(ret - out.log_partition);
    out.paths[p] += prob;
    add_visits(out.svf, p, prob, 1.0);
  }
  return out;
}

std::map<std::vector<int>, double> policy_path_distribution(const GridMDP& mdp, const PolicyTable& policy,
                                                            Cell start, int horizon) {
  std::map<std::vector<int>, double> out;
  std::vector<int> path{mdp.state(start)};
  std::function<void(int, double)> walk = [&](int t, double p) {
    const int s = path.back();
    if (t == horizon - 1 || mdp.is_terminal(s)) {
      out[path] += p;
      return;
    }
    const int slice = policy.slice_for(t, horizon);
    for (int a = 0; a < kNumActions; ++a) {
      path.push_back(mdp.next(s, a));
      walk(t + 1, p * policy.prob(slice, s, a));
      path.pop_back();
    }
  };
  walk(0, 1.0);
  return out;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-8) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / scale;
}

SuiteResult svf_enumeration_suite(std::uint64_t seed, int max_side, int max_horizon, int maps) {
  SuiteResult res{"svf-enumeration", true, 0, 0.0, 1e-6, {}};
  Rng rng(seed);
  auto compare_paths = [&](const std::map<std::vector<int>, double>& a, const std::map<std::vector<int>, double>& b) {
    double err = 0.0;
    for (const auto& [path, p] : a) {
      const auto it = b.find(path);
      err = std::max(err, std::abs(p - (it == b.end() ? 0.0 : it->second)));
    }
    for (const auto& [path, p] : b)
      if (!a.count(path)) err = std::max(err, p);
    return err;
  };

  for (int rows = 1; rows <= max_side; ++rows) {
    for (int cols = 1; cols <= max_side; ++cols) {
      for (int horizon = 1; horizon <= max_horizon; ++horizon) {
        for (int m = 0; m < maps; ++m) {
          // The first map of each group has neither walls nor terminals.
          Map2D blocked = m == 0 ? Map2D(rows, cols) : random_mask(rng, rows, cols, 0.2);
          Map2D terminal = m == 0 ? Map2D(rows, cols) : random_mask(rng, rows, cols, 0.15);
          if (blocked.sum() == static_cast<double>(blocked.size())) blocked[0] = 0.0;
          const RewardMap reward = random_reward(rng, rows, cols, 2.0);
          const Cell start = random_free_cell(rng, blocked);

          for (double gamma : {1.0, 0.9}) {
            const GridMDP mdp(blocked, terminal, gamma);
            const SoftViResult vi = soft_value_iteration(mdp, reward, std::max(1, horizon - 1));
            const SvfMap svf =
                expected_svf(mdp, vi.policy, point_distribution(rows, cols, start), horizon);
            const auto impl_paths = policy_path_distribution(mdp, vi.policy, start, horizon);

            const Enumeration oracle = gamma == 1.0
                                           ? enumerate_boltzmann_paths(blocked, terminal, reward, start, horizon)
                                           : enumerate_soft_policy(blocked, terminal, reward, gamma, start, horizon);
            double err = compare_paths(oracle.paths, impl_paths);
            for (std::size_t i = 0; i < svf.size(); ++i) err = std::max(err, std::abs(svf[i] - oracle.svf[i]));
            err = std::max(err, std::abs(vi.log_partition(mdp.state(start), horizon) - oracle.log_partition));
            res.max_error = std::max(res.max_error, err);
            ++res.cases;
          }
        }
      }
    }
  }
  res.passed = res.max_error <= res.tolerance;
  res.detail = describe("trajectory distribution, SVF and log-partition", res.max_error, res.tolerance);
  return res;
}

SuiteResult maxent_gradient_suite(std::uint64_t seed, int instances) {
  SuiteResult res{"maxent-gradient-fd", true, 0, 0.0, 1e-4, {}};
  Rng rng(seed);
  constexpr double h = 1e-5;
  for (int k = 0; k < instances; ++k) {
    const Map2D blocked = random_mask(rng, 4, 4, 0.15);
    const Map2D terminal = random_mask(rng, 4, 4, 0.1);
    const double gamma = k % 2 == 0 ? 0.9 : 1.0;
    const GridMDP mdp(blocked, terminal, gamma);
    RewardMap reward = random_reward(rng, 4, 4, 1.0);
    const Cell start = random_free_cell(rng, blocked);
    const int horizon = 2 + k % 5;

    // A random walk supplies the demonstration.
    std::vector<Cell> demo{start};
    while (static_cast<int>(demo.size()) < horizon && !mdp.is_terminal(mdp.state(demo.back())))
      demo.push_back(mdp.cell(mdp.next(mdp.state(demo.back()), static_cast<int>(rng.below(kNumActions)))));
    const SvfMap mu_d = path_svf(mdp, demo);

    const SoftViResult vi = soft_value_iteration(mdp, reward, horizon - 1);
    const SvfMap mu = expected_svf(mdp, vi.policy, point_distribution(4, 4, start), horizon);
    const RewardMap grad = maxent_gradient(mu_d, mu);
    for (std::size_t i = 0; i < reward.size(); ++i) {
      const double saved = reward[i];
      reward[i] = saved + h;
      const double up = maxent_objective(mdp, reward, mu_d, start, horizon);
      reward[i] = saved - h;
      const double down = maxent_objective(mdp, reward, mu_d, start, horizon);
      reward[i] = saved;
      res.max_error = std::max(res.max_error, relative_error(grad[i], (up - down) / (2 * h)));
      ++res.cases;
    }
  }
  res.passed = res.max_error <= res.tolerance;
  res.detail = describe("dL_D/dr per cell", res.max_error, res.tolerance);
  return res;
}

namespace {

FeatureStack random_features(Rng& rng, int cells) {
  FeatureStack f(kNumChannels, cells);
  for (auto& v : f.data()) v = rng.uniform(-1.0, 1.0);
  return f;
}

std::vector<std::size_t> sample_param_indices(Rng& rng, const NetParams& p, int count) {
  // Every tensor contributes, then the rest are drawn uniformly.
  std::vector<std::size_t> idx;
  for (const auto& t : p.tensors) idx.push_back(t.offset + rng.below(t.size));
  while (static_cast<int>(idx.size()) < count) idx.push_back(rng.below(p.size()));
  return idx;
}

}  // namespace

SuiteResult rewardnet_gradient_suite(std::uint64_t seed, int sampled_params, int cells) {
  SuiteResult res{"rewardnet-fd", true, 0, 0.0, 1e-4, {}};
  Rng rng(seed);
  NetParams params = init_params(seed);
  for (std::size_t i = 0; i < params.size(); ++i) params.values[i] += rng.uniform(-0.05, 0.05);
  const FeatureStack x = random_features(rng, cells);
  const RewardMap d = random_reward(rng, cells, cells, 1.0);

  // Finite differences are only meaningful while no ReLU changes state.
  auto pattern = [](const ForwardCache& c) {
    std::vector<char> on;
    for (const auto* z : {&c.z1a, &c.z1b, &c.z2a})
      for (double v : *z) on.push_back(v > 0.0);
    return on;
  };
  auto objective = [&](const NetParams& p, std::vector<char>* on) {
    ForwardCache c;
    const RewardMap out = forward(p, x, &c);
    *on = pattern(c);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += d[i] * out[i];
    return s;
  };

  ForwardCache cache;
  forward(params, x, &cache);
  const std::vector<char> base = pattern(cache);
  params.zero_grad();
  backward(params, cache, d);

  constexpr double h = 1e-4;
  int skipped = 0;
  std::vector<std::size_t> todo = sample_param_indices(rng, params, sampled_params);
  while (!todo.empty() && skipped < 10 * sampled_params) {
    const std::size_t i = todo.back();
    todo.pop_back();
    const double saved = params.values[i];
    std::vector<char> on_up, on_down;
    params.values[i] = saved + h;
    const double up = objective(params, &on_up);
    params.values[i] = saved - h;
    const double down = objective(params, &on_down);
    params.values[i] = saved;
    if (on_up != base || on_down != base) {
      ++skipped;
      todo.push_back(rng.below(params.size()));
      continue;
    }
    res.max_error = std::max(res.max_error, relative_error(params.grads[i], (up - down) / (2 * h)));
    ++res.cases;
  }
  res.passed = res.max_error <= res.tolerance && res.cases >= sampled_params && sampled_params >= 200;
  std::ostringstream out;
  out << describe("network parameters", res.max_error, res.tolerance) << ", " << skipped
      << " draws replaced for crossing a ReLU kink";
  res.detail = out.str();
  return res;
}

SuiteResult end_to_end_gradient_suite(std::uint64_t seed, int sampled_params) {
  SuiteResult res{"end-to-end-fd", true, 0, 0.0, 1e-3, {}};
  Rng rng(seed);
  constexpr int n = 8;
  NetParams params = init_params(seed + 1);

  FeatureStack f = random_features(rng, n);
  Map2D blocked(n, n), terminal(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      blocked(r, c) = (c == 1 && r < 5) ? 1.0 : 0.0;
      terminal(r, c) = (r >= 6 && c >= 5) ? 1.0 : 0.0;
      f(kEnvironment, r, c) = blocked(r, c);
      f(kGoalRegion, r, c) = terminal(r, c);
    }
  }
  const Cell start{n / 2, n / 2};
  std::vector<Cell> cells{start};
  for (const Cell step : {Cell{5, 4}, Cell{5, 5}, Cell{6, 5}}) cells.push_back(step);
  const double gamma = 0.95;
  ExpertWindow expert{SvfMap(n, n), cells};
  double w = 1.0;
  for (const Cell& c : cells) {
    expert.svf.at(c) += w;
    w *= gamma;
  }
  const SampleProblem problem{f, GridMDP(blocked, terminal, gamma), start, expert};
  const int horizon = problem.horizon();

  params.zero_grad();
  train_step(params, problem);

  auto objective = [&](const NetParams& p) {
    return maxent_objective(problem.mdp, forward(p, f), expert.svf, start, horizon);
  };
  constexpr double h = 1e-5;
  for (std::size_t i : sample_param_indices(rng, params, sampled_params)) {
    const double saved = params.values[i];
    params.values[i] = saved + h;
    const double up = objective(params);
    params.values[i] = saved - h;
    const double down = objective(params);
    params.values[i] = saved;
    // train_step accumulates the gradient of -L_D.
    res.max_error = std::max(res.max_error, relative_error(-params.grads[i], (up - down) / (2 * h)));
    ++res.cases;
  }
  res.passed = res.max_error <= res.tolerance;
  res.detail = describe("dL_D/dtheta through soft VI", res.max_error, res.tolerance);
  return res;
}

namespace {

bool raster_hits(const World& world, const VesselState& s, double half_length, double half_beam) {
  constexpr double step = 0.01;
  const double c = std::cos(s.psi), sn = std::sin(s.psi);
  const int nl = static_cast<int>(std::ceil(2 * half_length / step));
  const int nb = static_cast<int>(std::ceil(2 * half_beam / step));
  for (int i = 0; i <= nl; ++i) {
    const double a = -half_length + 2 * half_length * i / nl;
    for (int j = 0; j <= nb; ++j) {
      const double b = -half_beam + 2 * half_beam * j / nb;
      const Vec2 p{s.x + a * c - b * sn, s.y + a * sn + b * c};
      if (world.point_blocked(p)) return true;
    }
  }
  return false;
}

}  // namespace

SuiteResult collision_raster_suite(std::uint64_t seed, int states) {
  SuiteResult res{"collision-raster", true, 0, 0.0, 0.015, {}};
  Rng rng(seed);
  int disagreements = 0, outside_band = 0;
  for (int k = 0; k < states; ++k) {
    WorldConfig cfg;
    cfg.seed = seed * 7919 + static_cast<std::uint64_t>(k / 100);
    const World world = build_world(cfg);
    const Rect b = world.bounds();
    VesselState s{rng.uniform(b.x0, b.x1), rng.uniform(b.y0, b.y1), rng.uniform(-std::numbers::pi, std::numbers::pi)};
    if (k % 2 == 1) {
      // Odd draws hug an obstacle edge, where the two tests can disagree.
      const auto obstacles = world.obstacles();
      const Rect& o = obstacles[rng.below(obstacles.size())];
      const Vec2 edge{rng.uniform(o.x0, o.x1), rng.uniform(0.0, 1.0) < 0.5 ? o.y0 : o.y1};
      const Vec2 side{rng.uniform(0.0, 1.0) < 0.5 ? o.x0 : o.x1, rng.uniform(o.y0, o.y1)};
      const Vec2 p = rng.uniform() < 0.5 ? edge : side;
      s.x = p.x + rng.uniform(-0.6, 0.6);
      s.y = p.y + rng.uniform(-0.6, 0.6);
    }
    const double hl = 0.5 * cfg.vessel_length_m, hb = 0.5 * cfg.vessel_beam_m;
    const bool sat = is_collision(world, s);
    const bool raster = raster_hits(world, s, hl, hb);
    ++res.cases;
    if (sat == raster) continue;
    ++disagreements;
    const bool shrunk = raster_hits(world, s, hl - res.tolerance, hb - res.tolerance);
    const bool grown = raster_hits(world, s, hl + res.tolerance, hb + res.tolerance);
    if (shrunk || !grown) ++outside_band;
  }
  res.passed = outside_band == 0;
  std::ostringstream out;
  out << disagreements << " boundary disagreements, " << outside_band << " outside the 1.5 cm band";
  res.detail = out.str();
  res.max_error = outside_band;
  return res;
}

SuiteResult linear_irl_suite(std::uint64_t seed, int held_out) {
  SuiteResult res{"linear-maxent-irl", true, 0, 0.0, 0.9, {}};
  constexpr int n = 5;
  Map2D blocked(n, n);
  blocked(2, 1) = blocked(2, 2) = blocked(2, 3) = 1.0;
  const GridMDP mdp(blocked, Map2D(n, n), 0.95);
  const Cell goal{4, 2};

  // Distance to the goal, position and a bias.
  StateFeatures features(static_cast<std::size_t>(mdp.num_states()));
  for (int s = 0; s < mdp.num_states(); ++s) {
    const Cell c = mdp.cell(s);
    const double d = std::max(std::abs(c.row - goal.row), std::abs(c.col - goal.col));
    features[static_cast<std::size_t>(s)] = {-d / (n - 1), static_cast<double>(c.row) / (n - 1),
                                             static_cast<double>(c.col) / (n - 1), 1.0};
  }
  const std::vector<double> theta_true{3.0, 0.5, -0.2, 0.0};
  constexpr int horizon = 12;
  const SoftViResult vi_true = soft_value_iteration(mdp, linear_reward(mdp, features, theta_true), horizon - 1);

  std::vector<Cell> free;
  for (int s = 0; s < mdp.num_states(); ++s)
    if (blocked[static_cast<std::size_t>(s)] == 0.0) free.push_back(mdp.cell(s));
  Rng rng(seed);
  rng.shuffle(free);
  const std::size_t n_train = free.size() > static_cast<std::size_t>(held_out) ? free.size() - held_out : 1;

  std::vector<std::vector<Cell>> demos;
  for (std::size_t i = 0; i < n_train; ++i) demos.push_back(greedy_rollout(mdp, vi_true.policy, free[i], horizon));
  const std::vector<double> theta = linear_maxent_irl(mdp, demos, features, {0.1, 300});
  const SoftViResult vi = soft_value_iteration(mdp, linear_reward(mdp, features, theta), horizon - 1);

  int matched = 0;
  for (std::size_t i = n_train; i < free.size(); ++i) {
    const auto want = greedy_rollout(mdp, vi_true.policy, free[i], horizon);
    const auto got = greedy_rollout(mdp, vi.policy, free[i], horizon);
    matched += want.back() == got.back() ? 1 : 0;
    ++res.cases;
  }
  const double frac = res.cases > 0 ? static_cast<double>(matched) / res.cases : 0.0;
  res.max_error = 1.0 - frac;
  res.passed = res.cases > 0 && frac >= res.tolerance;
  std::ostringstream out;
  out << matched << "/" << res.cases << " held-out starts reach the demonstrated endpoint";
  res.detail = out.str();
  return res;
}

std::vector<SuiteResult> run_all(std::uint64_t seed) {
  return {svf_enumeration_suite(seed),     maxent_gradient_suite(seed), rewardnet_gradient_suite(seed),
          end_to_end_gradient_suite(seed), collision_raster_suite(seed), linear_irl_suite(seed)};
}

}  // namespace dockirl::oracles
