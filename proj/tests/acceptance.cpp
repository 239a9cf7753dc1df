// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// Usage: acceptance [scratch_dir]

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dockirl/cli.hpp"
#include "dockirl/map_io.hpp"
#include "dockirl/oracles.hpp"
#include "dockirl/serialization.hpp"
#include "dockirl/trainer.hpp"

using namespace dockirl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash over every regular file in `dir`, in name order, including the names.
std::uint64_t hash_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a("");
  for (const auto& f : files) h = fnv1a(read_file(f), fnv1a(f.filename().string(), h));
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " " << what << ": " << detail << std::endl;
  if (!ok) ++failures;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "dockirl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::string suite_line(const oracles::SuiteResult& r) {
  return r.name + " " + (r.passed ? "ok" : "FAILED") + " (" + std::to_string(r.cases) + " cases, " + r.detail + ")";
}

void criterion1() {
  const auto t0 = Clock::now();
  const auto r = oracles::svf_enumeration_suite(0, 4, 6, 5);
  const double t = seconds_since(t0);
  report(1, r.passed && t < 30.0, "SVF oracle equivalence", suite_line(r) + ", " + format6(t) + " s");
}

void criterion2() {
  const auto t0 = Clock::now();
  const auto a = oracles::rewardnet_gradient_suite(0, 240, 8);
  const auto b = oracles::end_to_end_gradient_suite(0, 60);
  const double t = seconds_since(t0);
  report(2, a.passed && b.passed && t < 120.0, "gradient fidelity",
         suite_line(a) + "; " + suite_line(b) + ", " + format6(t) + " s");
}

void criterion3() {
  const auto t0 = Clock::now();
  const auto r = oracles::linear_irl_suite(0, 20);
  const double t = seconds_since(t0);
  report(3, r.passed && t < 60.0, "linear MaxEnt IRL", suite_line(r) + ", " + format6(t) + " s");
}

bool check_record(const DatasetRecord& rec, std::string& why) {
  const World& w = rec.world;
  if (w.bays.size() != 8) return why = "bay count", false;
  if (std::count(w.occupied.begin(), w.occupied.end(), true) != 4) return why = "occupied count", false;
  if (w.occupied[static_cast<std::size_t>(w.goal_bay)]) return why = "goal bay is occupied", false;
  const Vec2 spawn = w.spawn_pose.position();
  const double goal_d = distance(spawn, w.bays[static_cast<std::size_t>(w.goal_bay)].center());
  for (std::size_t i = 0; i < w.bays.size(); ++i)
    if (!w.occupied[i] && distance(spawn, w.bays[i].center()) < goal_d) return why = "goal is not the nearest free bay", false;
  const auto& states = rec.trajectory.states;
  if (states.empty()) return why = "empty trajectory", false;
  for (const auto& s : states)
    if (is_collision(w, s)) return why = "collision", false;
  const Rect goal = w.bays[static_cast<std::size_t>(w.goal_bay)];
  if (!goal.contains(states.back().position())) return why = "trajectory does not end in the goal bay", false;
  return true;
}

Dataset criterion4(const fs::path& dir) {
  const fs::path a = dir / "data_a.jsonl";
  const fs::path b = dir / "data_b.jsonl";
  auto t0 = Clock::now();
  const int code_a = run({"gen-data", "--train", "500", "--test", "50", "--seed", "7", "--out", a.string()});
  const double t_gen = seconds_since(t0);
  const int code_b = run({"gen-data", "--train", "500", "--test", "50", "--seed", "7", "--out", b.string()});
  if (code_a != 0 || code_b != 0) {
    report(4, false, "simulation protocol", "gen-data exited with " + std::to_string(code_a) + "/" + std::to_string(code_b));
    return {};
  }
  const std::string bytes_a = read_file(a);
  const bool identical = bytes_a == read_file(b);
  Dataset ds = dataset_from_jsonl(bytes_a);
  const std::size_t n_train = ds.split(true).size();
  const std::size_t n_test = ds.split(false).size();
  int bad = 0;
  std::string first_problem;
  for (const auto& rec : ds.records) {
    std::string why;
    if (!check_record(rec, why)) {
      if (bad++ == 0) first_problem = why;
    }
  }
  const bool ok = identical && n_train == 500 && n_test == 50 && bad == 0 && t_gen < 900.0;
  std::string detail = std::to_string(n_train) + " train + " + std::to_string(n_test) + " test records, " +
                       std::to_string(bad) + " failing record checks";
  if (bad) detail += " (first: " + first_problem + ")";
  detail += ", rerun " + std::string(identical ? "byte-identical" : "DIFFERS") + " (fnv " + hex(fnv1a(bytes_a)) +
            "), " + format6(t_gen) + " s per run";
  report(4, ok, "simulation protocol", detail);
  return ds;
}

constexpr const char* kSmokeConfig = "epochs = 30\nseed = 1\n";

struct SmokeOutcome {
  bool ran = false;
  NetParams params;
  TrainConfig config;
  Dataset subset;
};

SmokeOutcome criterion5(const Dataset& full, const fs::path& dir) {
  SmokeOutcome out;
  if (full.records.empty()) {
    report(5, false, "training smoke", "no dataset");
    return out;
  }
  int kept = 0;
  for (const auto& r : full.records) {
    if (r.is_train && kept >= 50) continue;
    if (r.is_train) ++kept;
    out.subset.records.push_back(r);
  }
  save_dataset(dir / "subset.jsonl", out.subset);
  write_file_atomic(dir / "smoke.cfg", kSmokeConfig);
  out.config = parse_train_config(kSmokeConfig);

  const auto t0 = Clock::now();
  const TrainResult res = train(out.subset, out.config);
  const double t = seconds_since(t0);
  const fs::path run_dir = dir / "run_a";
  fs::create_directories(run_dir);
  write_file_atomic(run_dir / "train_config.txt", train_config_to_text(out.config));
  save_checkpoint(run_dir / "checkpoint.bin", res.params);
  write_file_atomic(run_dir / "train_report.csv", res.report.to_csv());

  const auto& ep = res.report.epochs;
  // Transitions are counted between consecutive trained epochs.
  int transitions = 0, held = 0;
  for (std::size_t i = 1; i < ep.size(); ++i) {
    ++transitions;
    if (ep[i].mean_nll <= ep[i - 1].mean_nll) ++held;
  }
  const double final_nll = ep.empty() ? 0.0 : ep.back().mean_nll;
  const double ratio = res.report.initial_nll > 0.0 ? final_nll / res.report.initial_nll : 1.0;
  const double frac = transitions > 0 ? static_cast<double>(held) / transitions : 0.0;
  const bool ok = ep.size() == 30 && ratio <= 0.8 && frac >= 0.8 && t < 600.0;
  report(5, ok, "training smoke",
         std::to_string(kept) + " training records, NLL " + format6(res.report.initial_nll) + " -> " +
             format6(final_nll) + " (ratio " + format6(ratio) + "), non-increasing on " + std::to_string(held) + "/" +
             std::to_string(transitions) + " epoch transitions, " + format6(t) + " s");
  out.ran = true;
  // Evaluate what was written to disk, exactly as `dockirl eval` would.
  out.params = load_checkpoint(run_dir / "checkpoint.bin");
  return out;
}

void criterion6(const SmokeOutcome& smoke, const fs::path& dir) {
  if (!smoke.ran) {
    report(6, false, "qualitative behaviour", "no trained model");
    return;
  }
  const EvalReport ev = evaluate(smoke.params, smoke.subset, smoke.config);
  write_eval_outputs(ev, dir / "eval_a");

  int dock_n = 0, dock_ok = 0, fwd_n = 0, fwd_ok = 0, mid_n = 0, mid_ok = 0;
  double dock_min = 1.0, fwd_worst = 0.0;
  int mid_best = 0;
  for (const auto& s : ev.samples) {
    switch (s.scenario) {
      case Scenario::kInsideDock:
        ++dock_n;
        dock_ok += s.goal_mass >= 0.9;
        dock_min = std::min(dock_min, s.goal_mass);
        break;
      case Scenario::kGoForward:
        ++fwd_n;
        fwd_ok += s.heading_error <= std::numbers::pi / 4.0;
        fwd_worst = std::max(fwd_worst, s.heading_error);
        break;
      case Scenario::kMidway:
        ++mid_n;
        mid_ok += s.branches >= 2;
        mid_best = std::max(mid_best, s.branches);
        break;
      case Scenario::kRandom:
        break;
    }
  }
  const bool a = dock_n > 0 && dock_ok == dock_n;
  const bool b = fwd_n > 0 && fwd_ok >= 0.9 * fwd_n;
  const bool c = mid_ok >= 1;
  report(6, a && b && c, "qualitative behaviour",
         std::string("(a) ") + (a ? "ok" : "FAILED") + " inside_dock " + std::to_string(dock_ok) + "/" +
             std::to_string(dock_n) + " with goal mass >= 0.9 (min " + format6(dock_min) + "); (b) " +
             (b ? "ok" : "FAILED") + " go_forward " + std::to_string(fwd_ok) + "/" + std::to_string(fwd_n) +
             " within 45 deg (worst " + format6(fwd_worst * 180.0 / std::numbers::pi) + " deg); (c) " +
             (c ? "ok" : "FAILED") + " midway " + std::to_string(mid_ok) + "/" + std::to_string(mid_n) +
             " with >= 2 branches (max " + std::to_string(mid_best) + ")");
}

void criterion7(const SmokeOutcome& smoke, const fs::path& dir) {
  if (!smoke.ran) {
    report(7, false, "determinism", "no first run to compare against");
    return;
  }
  const fs::path run_b = dir / "run_b";
  const int t = run({"train", "--data", (dir / "subset.jsonl").string(), "--config", (dir / "smoke.cfg").string(),
                     "--out", run_b.string()});
  const int e = run({"eval", "--data", (dir / "subset.jsonl").string(), "--checkpoint",
                     (run_b / "checkpoint.bin").string(), "--out", (dir / "eval_b").string()});
  if (t != 0 || e != 0) {
    report(7, false, "determinism", "rerun exited with " + std::to_string(t) + "/" + std::to_string(e));
    return;
  }
  const std::uint64_t ck_a = fnv1a(read_file(dir / "run_a" / "checkpoint.bin"));
  const std::uint64_t ck_b = fnv1a(read_file(run_b / "checkpoint.bin"));
  const std::uint64_t ev_a = hash_dir(dir / "eval_a");
  const std::uint64_t ev_b = hash_dir(dir / "eval_b");
  report(7, ck_a == ck_b && ev_a == ev_b, "determinism",
         "checkpoint " + hex(ck_a) + (ck_a == ck_b ? " == " : " != ") + hex(ck_b) + ", evaluation outputs " +
             hex(ev_a) + (ev_a == ev_b ? " == " : " != ") + hex(ev_b));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dockirl_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  criterion1();
  criterion2();
  criterion3();
  const Dataset ds = criterion4(dir);
  const SmokeOutcome smoke = criterion5(ds, dir);
  criterion6(smoke, dir);
  criterion7(smoke, dir);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
