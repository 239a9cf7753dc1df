#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dockirl/expert_gen.hpp"
#include "dockirl/featurizer.hpp"
#include "dockirl/gridmdp.hpp"
#include "dockirl/rewardnet.hpp"

namespace dockirl {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 200;
  int samples_per_trajectory = 8;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double l2_lambda = 1e-4;
  double gamma = 0.99;
  int svf_horizon = 64;
  /// Depth of the soft value iteration used at evaluation time. Training runs
  /// exactly as many backups as each sample's horizon needs.
  int soft_vi_iters = 128;
  std::uint64_t seed = 0;
  /// Save a checkpoint every this many epochs; 0 keeps only the final one.
  int checkpoint_every = 0;
  int cells_per_side = 32;
  double window_m = 4.0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const;
  GridSpec grid() const { return {cells_per_side, window_m}; }
};

/// Flat `key = value` lines; blank lines and `#` comments are ignored.
/// Unknown keys and malformed values throw std::invalid_argument.
TrainConfig parse_train_config(std::string_view text);
std::string train_config_to_text(const TrainConfig& config);

/// Rewards are clipped to this magnitude before planning.
constexpr double kRewardClip = 50.0;

/// Everything the MEDIRL update needs for one (trajectory, time index) pair.
struct SampleProblem {
  FeatureStack features;
  GridMDP mdp;
  Cell start;
  ExpertWindow expert;

  int horizon() const { return static_cast<int>(expert.cells.size()); }
};

SampleProblem make_sample_problem(const World& world, const Trajectory& trajectory, std::size_t t_index,
                                  const TrainConfig& config);

struct SampleStats {
  double nll = 0.0;      ///< mean negative log-likelihood per expert transition
  int transitions = 0;   ///< 0 when the sample starts in the goal or at the window edge
  double svf_l1 = 0.0;   ///< |mu_D - E[mu]|_1
  double log_likelihood_objective = 0.0;
};

/// Forward pass, soft VI, expected SVF and backward pass for one sample.
/// Gradients of -L_D are accumulated into params.grads.
SampleStats train_step(NetParams& params, const World& world, const Trajectory& trajectory, std::size_t t_index,
                       const TrainConfig& config);
SampleStats train_step(NetParams& params, const SampleProblem& problem);
/// Same statistics without touching any gradient buffer.
SampleStats score_sample(const NetParams& params, const SampleProblem& problem);

/// NLL and SVF error are measured on the fixed training samples with the
/// weights reached at the end of the epoch.
struct EpochStats {
  int epoch = 0;
  double mean_nll = 0.0;
  double mean_svf_l1 = 0.0;
  double mean_grad_norm = 0.0;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  /// Mean NLL of the training samples under the initial weights (0 when epochs = 0).
  double initial_nll = 0.0;

  std::string to_csv() const;
};

/// Called with the 1-based epoch number after each scheduled checkpoint epoch.
using CheckpointSink = std::function<void(int epoch, const NetParams& params)>;

struct TrainResult {
  NetParams params;
  TrainReport report;
};

/// Seeded sample indices for one training record.
std::vector<std::size_t> sample_indices(const Trajectory& trajectory, int count, std::uint64_t seed,
                                        std::size_t record_index);

TrainResult train(const Dataset& dataset, const TrainConfig& config, const CheckpointSink& sink = {});
/// Continues from given parameters instead of a fresh initialisation.
TrainResult train(const Dataset& dataset, const TrainConfig& config, NetParams initial,
                  const CheckpointSink& sink = {});

enum class Scenario { kRandom, kInsideDock, kGoForward, kMidway };
const char* scenario_name(Scenario s);

struct SampleEval {
  std::size_t record = 0;  ///< index into the test split
  std::size_t t_index = 0;
  Scenario scenario = Scenario::kRandom;
  Cell start;
  double nll = 0.0;
  int transitions = 0;
  double svf_l1 = 0.0;       ///< L1 distance between the normalised policy and expert SVFs
  double goal_mass = 0.0;    ///< fraction of policy SVF mass on goal-bay cells
  double heading_error = 0.0;  ///< radians between mean SVF displacement and the goal direction
  int branches = 0;
  Map2D environment;
  Map2D goal_region;
  RewardMap reward;
  SvfMap policy_svf;
  SvfMap expert_svf;
};

struct EvalReport {
  std::vector<SampleEval> samples;

  std::string to_csv() const;
  /// Mean NLL over samples with at least one expert transition.
  double mean_nll() const;
};

/// Indices in `trajectory` that illustrate each qualitative scenario; absent
/// scenarios are left out.
std::vector<std::pair<Scenario, std::size_t>> scenario_indices(const World& world, const Trajectory& trajectory);

EvalReport evaluate(const NetParams& params, const Dataset& dataset, const TrainConfig& config);

/// L1 distance between the two maps after each is scaled to unit mass.
double normalized_svf_l1(const SvfMap& a, const SvfMap& b);

/// Number of 8-connected clusters of significant visitation, ignoring a small
/// disc around the start and the goal region, that each hold at least
/// `min_fraction` of the total mass.
int count_branches(const SvfMap& svf, Cell start, const Map2D& goal_region, double min_fraction = 0.05);

/// Writes metrics.csv and one environment/reward/SVF triptych per sample.
void write_eval_outputs(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace dockirl
