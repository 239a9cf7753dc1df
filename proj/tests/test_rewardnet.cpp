#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dockirl/oracles.hpp"
#include "dockirl/rewardnet.hpp"

using namespace dockirl;

namespace {

FeatureStack random_features(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureStack f(kNumChannels, n);
  for (auto& v : f.data()) v = u(rng);
  return f;
}

RewardMap random_map(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RewardMap m(n, n);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

using Planes = std::vector<std::vector<double>>;  // [channel][row * n + col]

Planes reference_conv(const Planes& in, int n, const NetParams& p, const std::string& layer, bool relu) {
  const auto& t = p.tensor(layer + ".weight");
  const int cout = t.shape[0], cin = t.shape[1], k = t.shape[2];
  const double* w = p.data(layer + ".weight");
  const double* b = p.data(layer + ".bias");
  Planes out(static_cast<std::size_t>(cout), std::vector<double>(static_cast<std::size_t>(n) * n));
  for (int o = 0; o < cout; ++o)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        double acc = b[o];
        for (int i = 0; i < cin; ++i)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int rr = r + ky - k / 2, cc = c + kx - k / 2;
              if (rr < 0 || cc < 0 || rr >= n || cc >= n) continue;
              acc += w[((o * cin + i) * k + ky) * k + kx] * in[static_cast<std::size_t>(i)][static_cast<std::size_t>(rr * n + cc)];
            }
        out[static_cast<std::size_t>(o)][static_cast<std::size_t>(r * n + c)] = relu ? std::max(0.0, acc) : acc;
      }
  return out;
}

RewardMap reference_forward(const NetParams& p, const FeatureStack& f) {
  const int n = f.cells();
  auto plane = [&](int ch) {
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) v[static_cast<std::size_t>(r * n + c)] = f(ch, r, c);
    return v;
  };
  Planes env;
  for (int ch = 0; ch < kEnvChannels; ++ch) env.push_back(plane(ch));
  Planes h = reference_conv(reference_conv(env, n, p, "conv1a", true), n, p, "conv1b", true);
  for (int ch = kEnvChannels; ch < kNumChannels; ++ch) h.push_back(plane(ch));
  const Planes out = reference_conv(reference_conv(h, n, p, "conv2a", true), n, p, "head", false);
  RewardMap m(n, n);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = out[0][i];
  return m;
}

}  // namespace

TEST_CASE("parameter layout") {
  const NetParams p;
  CHECK(p.tensor("conv1a.weight").shape == std::vector<int>{16, 4, 3, 3});
  CHECK(p.tensor("conv2a.weight").shape == std::vector<int>{16, 21, 3, 3});
  CHECK(p.tensor("head.weight").shape == std::vector<int>{1, 16, 1, 1});
  CHECK(p.tensor("head.bias").size == 1);
  CHECK(p.size() == 16 * 4 * 9 + 16 + 16 * 16 * 9 + 16 + 16 * 21 * 9 + 16 + 16 + 1);
  CHECK(p.grads.size() == p.size());
  CHECK_THROWS_AS(p.tensor("conv3.weight"), std::out_of_range);
}

TEST_CASE("initialisation is seeded, bounded and has zero biases") {
  const NetParams a = init_params(3);
  CHECK(a.values == init_params(3).values);
  CHECK_FALSE(a.values == init_params(4).values);
  for (const auto& t : a.tensors) {
    const double* v = a.values.data() + t.offset;
    if (t.name.ends_with(".bias")) {
      for (std::size_t i = 0; i < t.size; ++i) CHECK(v[i] == 0.0);
      continue;
    }
    const int fan_in = t.shape[1] * t.shape[2] * t.shape[3];
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < t.size; ++i) CHECK(std::abs(v[i]) <= bound);
  }
}

TEST_CASE("zero weights with biases give a constant map") {
  NetParams p;
  p.data("conv2a.bias")[3] = 0.5;
  p.data("conv2a.bias")[7] = -0.25;  // clipped by the ReLU
  p.data("head.weight")[3] = 2.0;
  p.data("head.weight")[7] = 5.0;
  p.data("head.bias")[0] = -0.1;
  const RewardMap r = forward(p, random_features(8, 1));
  for (double v : r.values()) CHECK(v == doctest::Approx(0.9));
}

TEST_CASE("output shape follows the window size") {
  const NetParams p = init_params(1);
  for (int n : {8, 16, 32}) {
    const RewardMap r = forward(p, random_features(n, 2));
    CHECK(r.rows() == n);
    CHECK(r.cols() == n);
  }
  CHECK_THROWS_AS(forward(p, FeatureStack(4, 8)), std::invalid_argument);
}

TEST_CASE("the head is linear") {
  NetParams p = init_params(5);
  const FeatureStack f = random_features(8, 5);
  const RewardMap base = forward(p, f);
  const double bias = p.data("head.bias")[0];
  for (int i = 0; i < 16; ++i) p.data("head.weight")[i] *= 2.0;
  const RewardMap doubled = forward(p, f);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(doubled[i] == doctest::Approx(2.0 * base[i] - bias));
}

TEST_CASE("forward agrees with a naive reference implementation") {
  NetParams p = init_params(9);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (const auto& t : p.tensors)
    if (t.name.ends_with(".bias"))
      for (std::size_t i = 0; i < t.size; ++i) p.values[t.offset + i] = u(rng);
  for (int n : {8, 12}) {
    const FeatureStack f = random_features(n, static_cast<std::uint64_t>(n));
    const RewardMap got = forward(p, f);
    const RewardMap ref = reference_forward(p, f);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward is linear in the upstream gradient") {
  NetParams p = init_params(2);
  const FeatureStack f = random_features(8, 3);
  ForwardCache cache;
  forward(p, f, &cache);

  p.zero_grad();
  backward(p, cache, RewardMap(8, 8));
  for (double g : p.grads) CHECK(g == 0.0);

  const RewardMap d = random_map(8, 4);
  p.zero_grad();
  backward(p, cache, d);
  const std::vector<double> once = p.grads;
  RewardMap d2 = d;
  for (auto& v : d2.values()) v *= 2.0;
  p.zero_grad();
  backward(p, cache, d2);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(p.grads[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));

  // Gradients accumulate across calls.
  backward(p, cache, d);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(p.grads[i] == doctest::Approx(3.0 * once[i]).epsilon(1e-12));

  CHECK_THROWS_AS(backward(p, cache, RewardMap(16, 16)), std::invalid_argument);
}

TEST_CASE("backward matches central differences") {
  const auto res = oracles::rewardnet_gradient_suite(11, 240, 8);
  INFO(res.detail);
  CHECK(res.passed);
  CHECK(res.max_error <= 1e-4);
}

TEST_CASE("the network is affine where no ReLU changes sign") {
  const NetParams p = init_params(6);
  const FeatureStack f = random_features(8, 6);
  ForwardCache c0;
  const RewardMap r0 = forward(p, f, &c0);
  const double eps = 1e-7;
  FeatureStack g = f;
  FeatureStack g2 = f;
  g(kVelX, 3, 3) += eps;
  g2(kVelX, 3, 3) += 2 * eps;
  ForwardCache c1;
  const RewardMap r1 = forward(p, g, &c1);
  const RewardMap r2 = forward(p, g2);
  auto signs = [](const std::vector<double>& z) {
    std::vector<bool> s;
    for (double v : z) s.push_back(v > 0.0);
    return s;
  };
  REQUIRE(signs(c0.z2a) == signs(c1.z2a));
  for (std::size_t i = 0; i < r0.size(); ++i) CHECK(r2[i] - r1[i] == doctest::Approx(r1[i] - r0[i]).epsilon(1e-5).scale(1e-9));
}

TEST_CASE("AdamW") {
  SUBCASE("zero gradient without decay leaves parameters unchanged") {
    NetParams p = init_params(1);
    const auto before = p.values;
    AdamState st;
    p.zero_grad();
    apply_update(p, st, {1e-2, 0.0});
    CHECK(p.values == before);
    CHECK(st.step == 1);
  }
  SUBCASE("decay is decoupled from the gradient") {
    NetParams p = init_params(1);
    const auto before = p.values;
    AdamState st;
    p.zero_grad();
    for (int i = 0; i < 10; ++i) apply_update(p, st, {1e-2, 0.5});
    for (std::size_t i = 0; i < p.size(); ++i)
      CHECK(p.values[i] == doctest::Approx(before[i] * std::pow(1.0 - 1e-2 * 0.5, 10)).epsilon(1e-12));
  }
  SUBCASE("minimises a quadratic") {
    NetParams p;
    std::fill(p.values.begin(), p.values.end(), 1.5);
    AdamState st;
    for (int it = 0; it < 500; ++it) {
      for (std::size_t i = 0; i < p.size(); ++i) p.grads[i] = 2.0 * p.values[i];
      apply_update(p, st, {0.05, 0.0});
    }
    for (double v : p.values) CHECK(std::abs(v) < 0.05);
  }
  SUBCASE("non-finite gradients are rejected") {
    NetParams p = init_params(1);
    AdamState st;
    p.zero_grad();
    p.grads[5] = std::nan("");
    CHECK_THROWS_AS(apply_update(p, st, {}), std::domain_error);
  }
}

TEST_CASE("checkpoint round trip") {
  const NetParams p = init_params(21);
  const std::string bytes = checkpoint_bytes(p);
  CHECK(bytes.rfind("DIRLCKPT", 0) == 0);
  const NetParams back = params_from_checkpoint(bytes);
  CHECK(checkpoint_bytes(back) == bytes);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(back.values[i] == static_cast<double>(static_cast<float>(p.values[i])));

  const auto path = std::filesystem::temp_directory_path() / "dockirl_test_ckpt.bin";
  save_checkpoint(path, p);
  CHECK(checkpoint_bytes(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(params_from_checkpoint(bad));
  CHECK_THROWS(params_from_checkpoint(bytes.substr(0, bytes.size() - 3)));
  CHECK_THROWS(params_from_checkpoint(bytes + "x"));
  CHECK_THROWS(load_checkpoint("/nonexistent/dir/ckpt.bin"));
}
