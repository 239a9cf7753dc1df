#include <doctest.h>

#include <cmath>
#include <random>

#include "dockirl/gridmdp.hpp"
#include "dockirl/oracles.hpp"

using namespace dockirl;

namespace {

RewardMap random_reward(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  RewardMap r(rows, cols);
  for (auto& v : r.values()) v = u(rng);
  return r;
}

double row_sum(const PolicyTable& p, int slice, int s) {
  double t = 0.0;
  for (int a = 0; a < kNumActions; ++a) t += p.prob(slice, s, a);
  return t;
}

}  // namespace

TEST_CASE("transitions: moves, walls and grid edges") {
  Map2D blocked(3, 3), terminal(3, 3);
  blocked(0, 1) = 1.0;
  const GridMDP mdp(blocked, terminal, 0.9);
  const int centre = mdp.state({1, 1});
  CHECK(mdp.next(centre, kStayAction) == centre);
  CHECK(mdp.next(centre, 0) == mdp.state({0, 0}));
  CHECK(mdp.next(centre, 1) == centre);  // into the wall
  CHECK(mdp.next(centre, 8) == mdp.state({2, 2}));
  CHECK(mdp.next(mdp.state({0, 0}), 0) == mdp.state({0, 0}));  // off the grid
  CHECK(action_offset(5) == Cell{0, 1});
  CHECK_THROWS(GridMDP(Map2D(3, 3), Map2D(3, 4), 0.9));
}

TEST_CASE("zero reward gives a uniform policy away from edges") {
  const GridMDP mdp(7, 7, 0.95);
  const SoftViResult vi = soft_value_iteration(mdp, RewardMap(7, 7), 1);
  const int s = mdp.state({3, 3});
  for (int a = 0; a < kNumActions; ++a) CHECK(vi.policy.prob(0, s, a) == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("every policy row is a distribution") {
  Map2D blocked(6, 5), terminal(6, 5);
  blocked(2, 2) = 1.0;
  terminal(5, 4) = 1.0;
  const GridMDP mdp(blocked, terminal, 0.97);
  const SoftViResult vi = soft_value_iteration(mdp, random_reward(6, 5, 4, 5.0), 12);
  CHECK(vi.policy.num_slices() == 12);
  CHECK(vi.values.size() == 13);
  for (int k = 0; k < vi.policy.num_slices(); ++k)
    for (int s = 0; s < mdp.num_states(); ++s) CHECK(row_sum(vi.policy, k, s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adding a constant to the reward leaves the policy unchanged without terminals") {
  const GridMDP mdp(5, 6, 0.9);
  const RewardMap r = random_reward(5, 6, 8);
  RewardMap shifted = r;
  for (auto& v : shifted.values()) v += 3.7;
  const SoftViResult a = soft_value_iteration(mdp, r, 9);
  const SoftViResult b = soft_value_iteration(mdp, shifted, 9);
  for (int k = 0; k < 9; ++k)
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int act = 0; act < kNumActions; ++act)
        CHECK(a.policy.prob(k, s, act) == doctest::Approx(b.policy.prob(k, s, act)).epsilon(1e-10));
}

TEST_CASE("3x3 grid with one terminal matches brute-force enumeration") {
  Map2D blocked(3, 3), terminal(3, 3);
  terminal(2, 2) = 1.0;
  const GridMDP mdp(blocked, terminal, 1.0);
  const RewardMap r = random_reward(3, 3, 2);
  const int h = 4;
  const SoftViResult vi = soft_value_iteration(mdp, r, h - 1);
  const auto paths = oracles::policy_path_distribution(mdp, vi.policy, {0, 0}, h);
  const auto ref = oracles::enumerate_boltzmann_paths(blocked, terminal, r, {0, 0}, h);
  REQUIRE(paths.size() == ref.paths.size());
  double total = 0.0;
  for (const auto& [seq, p] : ref.paths) {
    REQUIRE(paths.count(seq) == 1);
    CHECK(paths.at(seq) == doctest::Approx(p).epsilon(1e-10));
    total += p;
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(vi.log_partition(mdp.state({0, 0}), h) == doctest::Approx(ref.log_partition).epsilon(1e-10));
}

TEST_CASE("brute-force enumeration suite") {
  const auto res = oracles::svf_enumeration_suite(17, 3, 4, 2);
  INFO(res.detail);
  CHECK(res.passed);
  CHECK(res.max_error <= 1e-6);
}

TEST_CASE("a policy that always stays gives a geometric series") {
  const GridMDP mdp(4, 4, 0.8);
  PolicyTable stay(4, 4);
  for (int s = 0; s < mdp.num_states(); ++s) stay.prob(0, s, kStayAction) = 1.0;
  const int h = 10;
  const SvfMap svf = expected_svf(mdp, stay, point_distribution(4, 4, {1, 2}), h);
  CHECK(svf(1, 2) == doctest::Approx((1.0 - std::pow(0.8, h)) / 0.2).epsilon(1e-12));
  CHECK(svf.sum() == doctest::Approx(svf(1, 2)));
}

TEST_CASE("undiscounted step distributions each carry unit mass without terminals") {
  const GridMDP mdp(5, 5, 1.0);
  const SoftViResult vi = soft_value_iteration(mdp, random_reward(5, 5, 31), 7);
  const auto d = state_distributions(mdp, vi.policy, point_distribution(5, 5, {2, 2}), 8);
  REQUIRE(d.size() == 8);
  for (const auto& m : d) CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(expected_svf(mdp, vi.policy, point_distribution(5, 5, {2, 2}), 8).sum() == doctest::Approx(8.0));
}

TEST_CASE("maxent_gradient") {
  const SvfMap a = random_reward(4, 4, 1);
  const SvfMap b = random_reward(4, 4, 2);
  const RewardMap zero = maxent_gradient(a, a);
  for (double v : zero.values()) CHECK(v == 0.0);
  const RewardMap g = maxent_gradient(a, b);
  CHECK(g.sum() == doctest::Approx(a.sum() - b.sum()));
  CHECK(g(1, 3) == doctest::Approx(a(1, 3) - b(1, 3)));
  CHECK_THROWS_AS(maxent_gradient(a, SvfMap(4, 5)), ShapeMismatch);
}

TEST_CASE("maxent gradient matches finite differences of the objective") {
  const auto res = oracles::maxent_gradient_suite(5, 3);
  INFO(res.detail);
  CHECK(res.passed);
}

TEST_CASE("feature expectations") {
  const GridMDP mdp(4, 4, 0.9);
  const SoftViResult vi = soft_value_iteration(mdp, random_reward(4, 4, 12), 5);
  const SvfMap init = point_distribution(4, 4, {0, 3});
  const SvfMap svf = expected_svf(mdp, vi.policy, init, 6);

  StateFeatures indicator(16, std::vector<double>(16, 0.0));
  for (int s = 0; s < 16; ++s) indicator[static_cast<std::size_t>(s)][static_cast<std::size_t>(s)] = 1.0;
  const auto fe = feature_expectations(mdp, vi.policy, indicator, init, 6);
  for (std::size_t s = 0; s < 16; ++s) CHECK(fe[s] == doctest::Approx(svf[s]).epsilon(1e-12));

  const StateFeatures constant(16, std::vector<double>{1.0});
  const double total = (1.0 - std::pow(0.9, 6)) / 0.1;
  CHECK(feature_expectations(mdp, vi.policy, constant, init, 6)[0] == doctest::Approx(total).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  StateFeatures random(16, std::vector<double>(3));
  for (auto& f : random)
    for (auto& v : f) v = u(rng);
  const auto fr = feature_expectations(mdp, vi.policy, random, init, 6);
  const auto en = oracles::enumerate_soft_policy(Map2D(4, 4), Map2D(4, 4), random_reward(4, 4, 12), 0.9, {0, 3}, 6);
  for (std::size_t k = 0; k < 3; ++k) {
    double expect = 0.0;
    for (std::size_t s = 0; s < 16; ++s) expect += en.svf[s] * random[s][k];
    CHECK(fr[k] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("linear MaxEnt IRL recovers a reward whose greedy paths reach the expert endpoints") {
  const auto res = oracles::linear_irl_suite(0, 20);
  INFO(res.detail);
  CHECK(res.passed);
}

TEST_CASE("linear MaxEnt IRL edge cases") {
  const GridMDP mdp(3, 3, 1.0);
  StateFeatures f(9, std::vector<double>(9, 0.0));
  for (std::size_t s = 0; s < 9; ++s) f[s][s] = 1.0;
  CHECK_THROWS_AS(linear_maxent_irl(mdp, {}, f, {}), std::invalid_argument);

  // An expert that never moves from the centre makes the centre most rewarding.
  const std::vector<std::vector<Cell>> demos(4, std::vector<Cell>(5, Cell{1, 1}));
  const auto theta = linear_maxent_irl(mdp, demos, f, {0.1, 100});
  const RewardMap r = linear_reward(mdp, f, theta);
  for (std::size_t s = 0; s < 9; ++s)
    if (s != 4) CHECK(r[4] > r[s]);
}

TEST_CASE("policy slices are bounded by the backups computed") {
  const GridMDP mdp(3, 3, 0.9);
  const SoftViResult vi = soft_value_iteration(mdp, RewardMap(3, 3), 3);
  CHECK(vi.policy.slice_for(0, 4) == 2);
  CHECK(vi.policy.slice_for(2, 4) == 0);
  CHECK_THROWS(vi.policy.slice_for(0, 5));
  CHECK_THROWS(soft_value_iteration(mdp, RewardMap(3, 4), 3));
}

TEST_CASE("path_svf and path_log_likelihood") {
  const GridMDP mdp(4, 4, 0.5);
  const std::vector<Cell> path{{0, 0}, {0, 1}, {0, 1}, {1, 2}};
  const SvfMap svf = path_svf(mdp, path);
  CHECK(svf(0, 0) == 1.0);
  CHECK(svf(0, 1) == doctest::Approx(0.75));
  CHECK(svf(1, 2) == doctest::Approx(0.125));

  const SoftViResult vi = soft_value_iteration(mdp, RewardMap(4, 4), 3);
  const double ll = path_log_likelihood(mdp, vi.policy, path);
  CHECK(ll < 0.0);
  CHECK(std::isfinite(ll));
  CHECK(path_log_likelihood(mdp, vi.policy, {{2, 2}}) == 0.0);
}
