#include "dockirl/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <ostream>

#include "dockirl/expert_gen.hpp"
#include "dockirl/map_io.hpp"
#include "dockirl/oracles.hpp"
#include "dockirl/rewardnet.hpp"
#include "dockirl/serialization.hpp"
#include "dockirl/trainer.hpp"

namespace dockirl {

namespace fs = std::filesystem;

namespace {

constexpr const char* kConfigSidecar = "train_config.txt";

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw std::runtime_error(std::string(what) + " not found: " + p.string());
}

int gen_data(int n_train, int n_test, std::uint64_t seed, const fs::path& out_path, std::ostream& out) {
  GenerationStats stats;
  const Dataset ds = generate_dataset(n_train, n_test, seed, {}, &stats);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_dataset(out_path, ds);
  out << "wrote " << ds.records.size() << " records to " << out_path.string() << " (" << stats.failures
      << " of " << stats.attempts << " seeds skipped)\n";
  return kExitOk;
}

int train_cmd(const fs::path& data, const fs::path& config_path, const fs::path& out_dir, std::ostream& out) {
  require_file(data, "dataset");
  require_file(config_path, "config");
  const TrainConfig config = parse_train_config(read_file(config_path));
  const Dataset ds = load_dataset(data);
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / kConfigSidecar, train_config_to_text(config));

  const auto sink = [&](int epoch, const NetParams& p) {
    char name[48];
    std::snprintf(name, sizeof name, "checkpoint_epoch_%04d.bin", epoch);
    save_checkpoint(out_dir / name, p);
  };
  const TrainResult result = train(ds, config, sink);
  save_checkpoint(out_dir / "checkpoint.bin", result.params);
  write_file_atomic(out_dir / "train_report.csv", result.report.to_csv());
  if (!result.report.epochs.empty()) {
    const auto& first = result.report.epochs.front();
    const auto& last = result.report.epochs.back();
    out << "epochs " << result.report.epochs.size() << ", mean expert NLL " << format6(result.report.initial_nll)
        << " (initial), " << format6(first.mean_nll) << " (epoch 1) -> "
        << format6(last.mean_nll) << '\n';
  }
  out << "checkpoint written to " << (out_dir / "checkpoint.bin").string() << '\n';
  return kExitOk;
}

int eval_cmd(const fs::path& data, const fs::path& checkpoint, const fs::path& out_dir, std::ostream& out) {
  require_file(data, "dataset");
  require_file(checkpoint, "checkpoint");
  TrainConfig config;
  const fs::path sidecar = checkpoint.parent_path() / kConfigSidecar;
  if (fs::is_regular_file(sidecar)) config = parse_train_config(read_file(sidecar));
  const NetParams params = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(data);
  const EvalReport report = evaluate(params, ds, config);
  write_eval_outputs(report, out_dir);
  out << "evaluated " << report.samples.size() << " samples, mean expert NLL " << format6(report.mean_nll())
      << '\n';
  return kExitOk;
}

int render_cmd(const fs::path& input, const fs::path& output, std::ostream& out) {
  require_file(input, "input map");
  const Map2D map = map_from_csv(read_file(input));
  write_file_atomic(output, map_to_pgm(map));
  out << "rendered " << map.rows() << "x" << map.cols() << " map to " << output.string() << '\n';
  return kExitOk;
}

int oracle_cmd(std::ostream& out) {
  bool ok = true;
  for (const auto& r : oracles::run_all()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases): " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep MaxEnt IRL for autonomous docking"};
  app.require_subcommand(1);

  int n_train = 500, n_test = 50;
  std::uint64_t seed = 0;
  std::string data, config, out_path, checkpoint, input;

  auto* gen = app.add_subcommand("gen-data", "Generate expert docking demonstrations");
  gen->add_option("--train", n_train, "Number of training records")->check(CLI::NonNegativeNumber);
  gen->add_option("--test", n_test, "Number of test records")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", seed, "Base seed");
  gen->add_option("--out", out_path, "Output JSONL path")->required();

  auto* tr = app.add_subcommand("train", "Train the reward network");
  tr->add_option("--data", data, "Dataset JSONL")->required();
  tr->add_option("--config", config, "key=value training config")->required();
  tr->add_option("--out", out_path, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--data", data, "Dataset JSONL")->required();
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--out", out_path, "Output directory")->required();

  auto* re = app.add_subcommand("render", "Render a CSV map as PGM");
  re->add_option("--input", input, "CSV map")->required();
  re->add_option("--out", out_path, "PGM path")->required();

  auto* oc = app.add_subcommand("oracle-check", "Run the brute-force and finite-difference suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return gen_data(n_train, n_test, seed, out_path, out);
    if (tr->parsed()) return train_cmd(data, config, out_path, out);
    if (ev->parsed()) return eval_cmd(data, checkpoint, out_path, out);
    if (re->parsed()) return render_cmd(input, out_path, out);
    if (oc->parsed()) return oracle_cmd(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dockirl
