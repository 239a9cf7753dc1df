#include "dockirl/rewardnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "dockirl/map_io.hpp"
#include "dockirl/rng.hpp"

namespace dockirl {

namespace {

struct LayerDef {
  const char* name;
  ConvSpec spec;
};

constexpr LayerDef kLayers[] = {
    {"conv1a", NetParams::kConv1a},
    {"conv1b", NetParams::kConv1b},
    {"conv2a", NetParams::kConv2a},
    {"head", NetParams::kHead},
};

std::string weight_name(const char* layer) { return std::string(layer) + ".weight"; }
std::string bias_name(const char* layer) { return std::string(layer) + ".bias"; }

void conv_forward(const double* in, int cin, int n, const double* w, const double* b, int cout, int k,
                  double* out) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int o = 0; o < cout; ++o) {
    double* dst = out + o * plane;
    std::fill(dst, dst + plane, b[o]);
    for (int i = 0; i < cin; ++i) {
      const double* src = in + i * plane;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const double wv = w[((static_cast<std::size_t>(o) * cin + i) * k + ky) * k + kx];
          const int y0 = std::max(0, -dy), y1 = std::min(n, n - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(n, n - dx);
          for (int y = y0; y < y1; ++y) {
            double* drow = dst + static_cast<std::size_t>(y) * n;
            const double* srow = src + static_cast<std::size_t>(y + dy) * n + dx;
            for (int x = x0; x < x1; ++x) drow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

/// din may be null when the input gradient is not needed.
void conv_backward(const double* in, int cin, int n, const double* w, int cout, int k, const double* dout,
                   double* dw, double* db, double* din) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int o = 0; o < cout; ++o) {
    const double* g = dout + o * plane;
    double gsum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) gsum += g[p];
    db[o] += gsum;
    for (int i = 0; i < cin; ++i) {
      const double* src = in + i * plane;
      double* dsrc = din ? din + i * plane : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const std::size_t widx = ((static_cast<std::size_t>(o) * cin + i) * k + ky) * k + kx;
          const double wv = w[widx];
          const int y0 = std::max(0, -dy), y1 = std::min(n, n - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(n, n - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * n;
            const double* srow = src + static_cast<std::size_t>(y + dy) * n + dx;
            for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            if (dsrc) {
              double* drow = dsrc + static_cast<std::size_t>(y + dy) * n + dx;
              for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

void relu(const std::vector<double>& z, double* out) {
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward(const std::vector<double>& z, double* grad) {
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!(z[i] > 0.0)) grad[i] = 0.0;
}

}  // namespace

NetParams::NetParams() {
  std::size_t offset = 0;
  for (const auto& layer : kLayers) {
    const auto& s = layer.spec;
    const std::size_t wsize = static_cast<std::size_t>(s.out) * s.in * s.kernel * s.kernel;
    tensors.push_back({weight_name(layer.name), {s.out, s.in, s.kernel, s.kernel}, offset, wsize});
    offset += wsize;
    tensors.push_back({bias_name(layer.name), {s.out}, offset, static_cast<std::size_t>(s.out)});
    offset += s.out;
  }
  values.assign(offset, 0.0);
  grads.assign(offset, 0.0);
}

const TensorInfo& NetParams::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw std::out_of_range("NetParams: no tensor named " + name);
}

void NetParams::zero_grad() { std::fill(grads.begin(), grads.end(), 0.0); }

NetParams init_params(std::uint64_t seed) {
  NetParams p;
  Rng rng(seed);
  for (const auto& layer : kLayers) {
    const auto& s = layer.spec;
    const double bound = std::sqrt(6.0 / (s.in * s.kernel * s.kernel));
    const auto& t = p.tensor(weight_name(layer.name));
    for (std::size_t i = 0; i < t.size; ++i) p.values[t.offset + i] = rng.uniform(-bound, bound);
  }
  return p;
}

RewardMap forward(const NetParams& params, const FeatureStack& features, ForwardCache* cache) {
  if (features.channels() != kNumChannels || features.cells() < 1)
    throw std::invalid_argument("forward: expected a 9-channel feature stack");
  const int n = features.cells();
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  const int h = NetParams::kHidden;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.cells = n;
  c.env.assign(features.data().begin(), features.data().begin() + kEnvChannels * plane);
  c.z1a.assign(h * plane, 0.0);
  c.a1a.assign(h * plane, 0.0);
  c.z1b.assign(h * plane, 0.0);
  c.fused.assign((h + kKinematicChannels) * plane, 0.0);
  c.z2a.assign(h * plane, 0.0);
  c.a2a.assign(h * plane, 0.0);

  const auto& k1a = NetParams::kConv1a;
  const auto& k1b = NetParams::kConv1b;
  const auto& k2a = NetParams::kConv2a;
  conv_forward(c.env.data(), k1a.in, n, params.data("conv1a.weight"), params.data("conv1a.bias"), k1a.out,
               k1a.kernel, c.z1a.data());
  relu(c.z1a, c.a1a.data());
  conv_forward(c.a1a.data(), k1b.in, n, params.data("conv1b.weight"), params.data("conv1b.bias"), k1b.out,
               k1b.kernel, c.z1b.data());
  relu(c.z1b, c.fused.data());
  std::copy(features.data().begin() + kEnvChannels * plane, features.data().end(), c.fused.begin() + h * plane);
  conv_forward(c.fused.data(), k2a.in, n, params.data("conv2a.weight"), params.data("conv2a.bias"), k2a.out,
               k2a.kernel, c.z2a.data());
  relu(c.z2a, c.a2a.data());

  RewardMap out(n, n);
  conv_forward(c.a2a.data(), NetParams::kHead.in, n, params.data("head.weight"), params.data("head.bias"), 1, 1,
               out.values().data());
  return out;
}

void backward(NetParams& params, const ForwardCache& c, const RewardMap& d_reward) {
  const int n = c.cells;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  const int h = NetParams::kHidden;
  if (d_reward.rows() != n || d_reward.cols() != n || c.a2a.size() != h * plane)
    throw std::invalid_argument("backward: gradient does not match the cached forward pass");

  std::vector<double> d_a2a(h * plane, 0.0);
  conv_backward(c.a2a.data(), h, n, params.data("head.weight"), 1, 1, d_reward.values().data(),
                params.grad("head.weight"), params.grad("head.bias"), d_a2a.data());
  relu_backward(c.z2a, d_a2a.data());

  const auto& k2a = NetParams::kConv2a;
  std::vector<double> d_fused(k2a.in * plane, 0.0);
  conv_backward(c.fused.data(), k2a.in, n, params.data("conv2a.weight"), k2a.out, k2a.kernel, d_a2a.data(),
                params.grad("conv2a.weight"), params.grad("conv2a.bias"), d_fused.data());
  d_fused.resize(h * plane);  // kinematic inputs carry no parameters
  relu_backward(c.z1b, d_fused.data());

  const auto& k1b = NetParams::kConv1b;
  std::vector<double> d_a1a(h * plane, 0.0);
  conv_backward(c.a1a.data(), k1b.in, n, params.data("conv1b.weight"), k1b.out, k1b.kernel, d_fused.data(),
                params.grad("conv1b.weight"), params.grad("conv1b.bias"), d_a1a.data());
  relu_backward(c.z1a, d_a1a.data());

  const auto& k1a = NetParams::kConv1a;
  conv_backward(c.env.data(), k1a.in, n, params.data("conv1a.weight"), k1a.out, k1a.kernel, d_a1a.data(),
                params.grad("conv1a.weight"), params.grad("conv1a.bias"), nullptr);
}

void apply_update(NetParams& params, AdamState& state, const AdamConfig& config) {
  for (double g : params.grads)
    if (!std::isfinite(g)) throw std::domain_error("apply_update: non-finite gradient");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = params.grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params.values[i] -= config.learning_rate * (m_hat / (std::sqrt(v_hat) + config.epsilon) +
                                                config.l2_lambda * params.values[i]);
  }
}

namespace {

constexpr char kMagic[8] = {'D', 'I', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const NetParams& params) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  put_u64(out, params.values.size());
  for (double v : params.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

NetParams params_from_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw std::runtime_error("checkpoint: bad magic");
  if (in.uint(4) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  NetParams p;
  if (in.uint(4) != p.tensors.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (const auto& t : p.tensors) {
    const auto len = in.uint(4);
    if (in.take(len) != t.name) throw std::runtime_error("checkpoint: unexpected tensor " + t.name);
    if (in.uint(4) != t.shape.size()) throw std::runtime_error("checkpoint: rank mismatch for " + t.name);
    for (int d : t.shape)
      if (in.uint(4) != static_cast<std::uint64_t>(d)) throw std::runtime_error("checkpoint: shape mismatch for " + t.name);
  }
  if (in.uint(8) != p.values.size()) throw std::runtime_error("checkpoint: payload size mismatch");
  for (auto& v : p.values) v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(in.uint(4))));
  if (!in.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& params) {
  write_file_atomic(path, checkpoint_bytes(params));
}

NetParams load_checkpoint(const std::filesystem::path& path) { return params_from_checkpoint(read_file(path)); }

}  // namespace dockirl
