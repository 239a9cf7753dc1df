#include "dockirl/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "dockirl/map_io.hpp"
#include "dockirl/rng.hpp"

namespace dockirl {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Each call
/// must only write its own output slot, which keeps results order-independent.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw std::invalid_argument("config: bad value for " + key + ": '" + text + "'");
  return value;
}

/// Clips in place and returns a mask that is 1 where the value was left alone.
Map2D clip_rewards(RewardMap& reward) {
  Map2D mask(reward.rows(), reward.cols(), 1.0);
  for (std::size_t i = 0; i < reward.size(); ++i) {
    const double v = reward[i];
    if (!std::isfinite(v)) throw TrainingDiverged("reward map contains non-finite values");
    if (std::abs(v) > kRewardClip) {
      reward[i] = std::copysign(kRewardClip, v);
      mask[i] = 0.0;
    }
  }
  return mask;
}

}  // namespace

double normalized_svf_l1(const SvfMap& a, const SvfMap& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("normalized_svf_l1: shapes differ");
  const double sa = a.sum();
  const double sb = b.sum();
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs((sa > 0 ? a[i] / sa : 0.0) - (sb > 0 ? b[i] / sb : 0.0));
  return d;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (samples_per_trajectory < 1) fail("samples_per_trajectory must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(l2_lambda >= 0.0)) fail("l2_lambda must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (svf_horizon < 1) fail("svf_horizon must be >= 1");
  if (soft_vi_iters < svf_horizon - 1 || soft_vi_iters < 1) fail("soft_vi_iters must be >= svf_horizon - 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  grid().validate();
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key == "epochs") c.epochs = parse_number<int>(key, value);
    else if (key == "samples_per_trajectory") c.samples_per_trajectory = parse_number<int>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "l2_lambda") c.l2_lambda = parse_number<double>(key, value);
    else if (key == "gamma") c.gamma = parse_number<double>(key, value);
    else if (key == "svf_horizon") c.svf_horizon = parse_number<int>(key, value);
    else if (key == "soft_vi_iters") c.soft_vi_iters = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = parse_number<int>(key, value);
    else if (key == "cells_per_side") c.cells_per_side = parse_number<int>(key, value);
    else if (key == "window_m") c.window_m = parse_number<double>(key, value);
    else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string train_config_to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "epochs = " << c.epochs << '\n'
      << "samples_per_trajectory = " << c.samples_per_trajectory << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "learning_rate = " << format6(c.learning_rate) << '\n'
      << "l2_lambda = " << format6(c.l2_lambda) << '\n'
      << "gamma = " << format6(c.gamma) << '\n'
      << "svf_horizon = " << c.svf_horizon << '\n'
      << "soft_vi_iters = " << c.soft_vi_iters << '\n'
      << "seed = " << c.seed << '\n'
      << "checkpoint_every = " << c.checkpoint_every << '\n'
      << "cells_per_side = " << c.cells_per_side << '\n'
      << "window_m = " << format6(c.window_m) << '\n';
  return out.str();
}

SampleProblem make_sample_problem(const World& world, const Trajectory& trajectory, std::size_t t_index,
                                  const TrainConfig& config) {
  const GridSpec spec = config.grid();
  FeatureStack features = extract_features(world, trajectory, t_index, spec);
  Map2D terminal = features.channel(kGoalRegion);
  GridMDP mdp(features.channel(kEnvironment), terminal, config.gamma);
  ExpertWindow expert = expert_svf_window(trajectory, t_index, spec, config.svf_horizon, config.gamma, &terminal);
  return {std::move(features), std::move(mdp), spec.center_cell(), std::move(expert)};
}

namespace {

/// Solves the local MDP for the network's reward and compares against the
/// expert. When `sink` is given (it must hold the same weights) the gradient
/// of -L_D is accumulated into it.
SampleStats solve_sample(const NetParams& params, const SampleProblem& p, NetParams* sink) {
  ForwardCache cache;
  RewardMap reward = forward(params, p.features, sink ? &cache : nullptr);
  const Map2D mask = clip_rewards(reward);

  const int horizon = p.horizon();
  const SoftViResult vi = soft_value_iteration(p.mdp, reward, std::max(1, horizon - 1));
  const SvfMap initial = point_distribution(p.mdp.rows(), p.mdp.cols(), p.start);
  const SvfMap expected = expected_svf(p.mdp, vi.policy, initial, horizon);
  const RewardMap grad = maxent_gradient(p.expert.svf, expected);

  SampleStats stats;
  RewardMap d_reward(grad.rows(), grad.cols());
  double dot = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    d_reward[i] = -grad[i] * mask[i];
    stats.svf_l1 += std::abs(grad[i]);
    dot += p.expert.svf[i] * reward[i];
  }
  if (sink) backward(*sink, cache, d_reward);

  stats.transitions = horizon - 1;
  if (stats.transitions > 0)
    stats.nll = -path_log_likelihood(p.mdp, vi.policy, p.expert.cells) / stats.transitions;
  stats.log_likelihood_objective = dot - vi.log_partition(p.mdp.state(p.start), horizon);
  if (!std::isfinite(stats.nll) || !std::isfinite(stats.log_likelihood_objective))
    throw TrainingDiverged("non-finite loss");
  return stats;
}

}  // namespace

SampleStats train_step(NetParams& params, const SampleProblem& p) { return solve_sample(params, p, &params); }

SampleStats score_sample(const NetParams& params, const SampleProblem& p) { return solve_sample(params, p, nullptr); }

SampleStats train_step(NetParams& params, const World& world, const Trajectory& trajectory, std::size_t t_index,
                       const TrainConfig& config) {
  return train_step(params, make_sample_problem(world, trajectory, t_index, config));
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,mean_nll,mean_svf_l1,mean_grad_norm,wall_seconds\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + ',' + format6(e.mean_nll) + ',' + format6(e.mean_svf_l1) + ',' +
           format6(e.mean_grad_norm) + ',' + format6(e.wall_seconds) + '\n';
  }
  return out;
}

std::vector<std::size_t> sample_indices(const Trajectory& trajectory, int count, std::uint64_t seed,
                                        std::size_t record_index) {
  if (trajectory.size() == 0) throw std::invalid_argument("sample_indices: empty trajectory");
  Rng rng(mix_seed(seed, record_index));
  std::vector<std::size_t> out;
  for (int i = 0; i < count; ++i) out.push_back(static_cast<std::size_t>(rng.below(trajectory.size())));
  return out;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const CheckpointSink& sink) {
  return train(dataset, config, init_params(config.seed), sink);
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, NetParams initial, const CheckpointSink& sink) {
  config.validate();
  const auto records = dataset.split(true);
  if (records.empty()) throw std::invalid_argument("train: dataset has no training records");

  struct Sample {
    const DatasetRecord* record;
    std::size_t t_index;
  };
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t t : sample_indices(records[i]->trajectory, config.samples_per_trajectory, config.seed, i))
      samples.push_back({records[i], t});
  auto problem = [&](const Sample& s) {
    return make_sample_problem(s.record->world, s.record->trajectory, s.t_index, config);
  };

  TrainResult result{std::move(initial), {}};
  NetParams& params = result.params;
  if (config.epochs == 0) return result;

  auto score_all = [&](EpochStats& e) {
    std::vector<SampleStats> stats(samples.size());
    parallel_for(samples.size(), [&](std::size_t k) { stats[k] = score_sample(params, problem(samples[k])); });
    double nll = 0.0, l1 = 0.0;
    int counted = 0;
    for (const auto& s : stats) {
      l1 += s.svf_l1;
      if (s.transitions > 0) {
        nll += s.nll;
        ++counted;
      }
    }
    e.mean_nll = counted > 0 ? nll / counted : 0.0;
    e.mean_svf_l1 = l1 / static_cast<double>(samples.size());
    if (!std::isfinite(e.mean_nll) || !std::isfinite(e.mean_svf_l1))
      throw TrainingDiverged("non-finite loss in epoch " + std::to_string(e.epoch));
  };
  EpochStats before;
  score_all(before);
  result.report.initial_nll = before.mean_nll;

  AdamState adam;
  const AdamConfig adam_config{config.learning_rate, config.l2_lambda};
  Rng order_rng(mix_seed(config.seed, 0xfeedULL));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    double norm_sum = 0.0;
    int batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(config.batch_size));
      const std::size_t n = b1 - b0;
      std::vector<NetParams> locals(n, params);
      parallel_for(n, [&](std::size_t k) {
        locals[k].zero_grad();
        train_step(locals[k], problem(samples[order[b0 + k]]));
      });

      // Summed in sample order so the result does not depend on scheduling.
      params.zero_grad();
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < params.size(); ++i) params.grads[i] += locals[k].grads[i];
      double norm = 0.0;
      for (auto& g : params.grads) {
        g /= static_cast<double>(n);
        norm += g * g;
      }
      norm_sum += std::sqrt(norm);
      ++batches;
      apply_update(params, adam, adam_config);
    }

    EpochStats e;
    e.epoch = epoch;
    score_all(e);
    e.mean_grad_norm = batches > 0 ? norm_sum / batches : 0.0;
    e.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.report.epochs.push_back(e);

    if (sink && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) sink(epoch, params);
  }
  return result;
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kRandom: return "random";
    case Scenario::kInsideDock: return "inside_dock";
    case Scenario::kGoForward: return "go_forward";
    case Scenario::kMidway: return "midway";
  }
  return "unknown";
}

std::vector<std::pair<Scenario, std::size_t>> scenario_indices(const World& world, const Trajectory& trajectory) {
  std::vector<std::pair<Scenario, std::size_t>> out;
  if (trajectory.size() == 0) return out;
  const Rect goal = world.bays[world.goal_bay];
  const bool north = world.is_north_bay(world.goal_bay);
  const double edge_y = north ? goal.y0 : goal.y1;
  const Vec2 entrance{goal.center().x, edge_y};
  const auto& states = trajectory.states;

  if (goal.contains(states.back().position())) out.emplace_back(Scenario::kInsideDock, states.size() - 1);

  // In front of the goal bay: the first state facing the entrance from the waterway.
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Vec2 p = states[i].position();
    if (goal.contains(p) || std::abs(p.x - entrance.x) > 0.5 * goal.width()) continue;
    if (distance(p, entrance) <= 2.0) {
      out.emplace_back(Scenario::kGoForward, i);
      break;
    }
  }

  // Abreast of the pier between the goal and an occupied neighbour in the same row.
  const int per_side = world.config.docks_per_side;
  const int row_first = north ? per_side : 0;
  double best = 0.75;
  std::optional<std::size_t> midway;
  for (int nb : {world.goal_bay - 1, world.goal_bay + 1}) {
    if (nb < row_first || nb >= row_first + per_side || !world.occupied[static_cast<std::size_t>(nb)]) continue;
    const double pier_x = 0.5 * (goal.center().x + world.bays[static_cast<std::size_t>(nb)].center().x);
    for (std::size_t i = 0; i < states.size(); ++i) {
      const Vec2 p = states[i].position();
      const double off = north ? edge_y - p.y : p.y - edge_y;
      if (off < 0.5 || off > 1.75) continue;
      const double lateral = std::abs(p.x - pier_x);
      if (lateral < best) {
        best = lateral;
        midway = i;
      }
    }
  }
  if (midway) out.emplace_back(Scenario::kMidway, *midway);
  return out;
}

int count_branches(const SvfMap& svf, Cell start, const Map2D& goal_region, double min_fraction) {
  const double total = svf.sum();
  if (!(total > 0.0)) return 0;
  constexpr int kStartRadius = 2;
  constexpr double kSupport = 0.1;
  std::vector<char> keep(svf.size(), 0);
  double peak = 0.0;
  for (std::size_t i = 0; i < svf.size(); ++i) {
    const Cell c = svf.cell(i);
    const bool near_start = std::max(std::abs(c.row - start.row), std::abs(c.col - start.col)) <= kStartRadius;
    if (near_start || goal_region[i] != 0.0) continue;
    keep[i] = 1;
    peak = std::max(peak, svf[i]);
  }
  if (!(peak > 0.0)) return 0;
  for (std::size_t i = 0; i < svf.size(); ++i)
    if (keep[i] && svf[i] < kSupport * peak) keep[i] = 0;

  int branches = 0;
  std::vector<char> seen(svf.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < svf.size(); ++i) {
    if (!keep[i] || seen[i]) continue;
    double mass = 0.0;
    stack.push_back(i);
    seen[i] = 1;
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      mass += svf[j];
      const Cell c = svf.cell(j);
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const Cell nb{c.row + dr, c.col + dc};
          if (!svf.contains(nb)) continue;
          const std::size_t k = svf.index(nb);
          if (keep[k] && !seen[k]) {
            seen[k] = 1;
            stack.push_back(k);
          }
        }
    }
    if (mass >= min_fraction * total) ++branches;
  }
  return branches;
}

namespace {

SampleEval evaluate_sample(const NetParams& params, const DatasetRecord& rec, std::size_t record, std::size_t t_index,
                           Scenario scenario, const TrainConfig& config) {
  const SampleProblem p = make_sample_problem(rec.world, rec.trajectory, t_index, config);
  SampleEval e;
  e.record = record;
  e.t_index = t_index;
  e.scenario = scenario;
  e.start = p.start;
  e.reward = forward(params, p.features);
  clip_rewards(e.reward);

  const int k = p.horizon();
  const SoftViResult vi = soft_value_iteration(p.mdp, e.reward, config.soft_vi_iters);
  const SvfMap initial = point_distribution(p.mdp.rows(), p.mdp.cols(), p.start);
  e.policy_svf = expected_svf(p.mdp, vi.policy, initial, config.svf_horizon);
  e.expert_svf = p.expert.svf;
  e.transitions = k - 1;
  if (e.transitions > 0) e.nll = -path_log_likelihood(p.mdp, vi.policy, p.expert.cells) / e.transitions;
  e.svf_l1 = normalized_svf_l1(expected_svf(p.mdp, vi.policy, initial, k), p.expert.svf);

  e.goal_region = p.mdp.terminal();
  e.environment = p.mdp.blocked();
  double goal = 0.0;
  Vec2 mean{};
  const GridSpec spec = config.grid();
  const Vec2 origin = spec.cell_center({0.0, 0.0}, p.start);
  for (std::size_t i = 0; i < e.policy_svf.size(); ++i) {
    const double m = e.policy_svf[i];
    if (e.goal_region[i] != 0.0) {
      goal += m;
      e.environment[i] = 0.5;
    }
    mean = mean + (spec.cell_center({0.0, 0.0}, e.policy_svf.cell(i)) - origin) * m;
  }
  const double total = e.policy_svf.sum();
  e.goal_mass = total > 0.0 ? goal / total : 0.0;
  const Vec2 to_goal = rec.world.bays[rec.world.goal_bay].center() - rec.trajectory.states[t_index].position();
  if (mean.norm() > 0.0 && to_goal.norm() > 0.0)
    e.heading_error = std::acos(std::clamp(mean.dot(to_goal) / (mean.norm() * to_goal.norm()), -1.0, 1.0));
  else
    e.heading_error = std::numbers::pi;
  e.branches = count_branches(e.policy_svf, p.start, e.goal_region);
  return e;
}

}  // namespace

EvalReport evaluate(const NetParams& params, const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const auto records = dataset.split(false);
  struct Job {
    std::size_t record;
    std::size_t t_index;
    Scenario scenario;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& [scenario, t] : scenario_indices(records[i]->world, records[i]->trajectory))
      jobs.push_back({i, t, scenario});
    for (std::size_t t : sample_indices(records[i]->trajectory, config.samples_per_trajectory, config.seed, i))
      jobs.push_back({i, t, Scenario::kRandom});
  }
  EvalReport report;
  report.samples.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    report.samples[j] = evaluate_sample(params, *records[job.record], job.record, job.t_index, job.scenario, config);
  });
  return report;
}

double EvalReport::mean_nll() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& s : samples) {
    if (s.transitions > 0) {
      sum += s.nll;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

std::string EvalReport::to_csv() const {
  std::string out = "sample,record,t_index,scenario,nll,transitions,svf_l1,goal_mass,heading_error_deg,branches\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out += std::to_string(i) + ',' + std::to_string(s.record) + ',' + std::to_string(s.t_index) + ',' +
           scenario_name(s.scenario) + ',' + format6(s.nll) + ',' + std::to_string(s.transitions) + ',' +
           format6(s.svf_l1) + ',' + format6(s.goal_mass) + ',' + format6(s.heading_error * 180.0 / std::numbers::pi) +
           ',' + std::to_string(s.branches) + '\n';
  }
  return out;
}

void write_eval_outputs(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "metrics.csv", report.to_csv());
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    char name[64];
    std::snprintf(name, sizeof name, "sample_%04zu_%s.pgm", i, scenario_name(s.scenario));
    write_file_atomic(dir / name, panels_to_pgm({s.environment, s.reward, s.policy_svf}));
  }
}

}  // namespace dockirl
