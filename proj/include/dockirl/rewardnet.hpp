#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dockirl/featurizer.hpp"
#include "dockirl/grid.hpp"

namespace dockirl {

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// 2-D convolution with stride 1 and zero "same" padding.
struct ConvSpec {
  int in = 0;
  int out = 0;
  int kernel = 3;
};

/// Weights of the two-stage reward network, stored flat with a matching
/// gradient buffer.
///
///   env channels (4) -> conv1a 3x3 (16) -> ReLU -> conv1b 3x3 (16) -> ReLU
///   concat kinematic channels (5) -> conv2a 3x3 (16) -> ReLU -> head 1x1 (1)
struct NetParams {
  static constexpr int kHidden = 16;
  static constexpr ConvSpec kConv1a{kEnvChannels, kHidden, 3};
  static constexpr ConvSpec kConv1b{kHidden, kHidden, 3};
  static constexpr ConvSpec kConv2a{kHidden + kKinematicChannels, kHidden, 3};
  static constexpr ConvSpec kHead{kHidden, 1, 1};

  std::vector<TensorInfo> tensors;
  std::vector<double> values;
  std::vector<double> grads;

  NetParams();

  std::size_t size() const { return values.size(); }
  const TensorInfo& tensor(const std::string& name) const;
  double* data(const std::string& name) { return values.data() + tensor(name).offset; }
  const double* data(const std::string& name) const { return values.data() + tensor(name).offset; }
  double* grad(const std::string& name) { return grads.data() + tensor(name).offset; }
  void zero_grad();
};

NetParams init_params(std::uint64_t seed);

/// Activations kept by forward() for the backward pass.
struct ForwardCache {
  int cells = 0;
  std::vector<double> env;  ///< [4 x N x N]
  std::vector<double> z1a, a1a, z1b;
  std::vector<double> fused;  ///< ReLU(z1b) followed by the kinematic channels, [21 x N x N]
  std::vector<double> z2a, a2a;
};

RewardMap forward(const NetParams& params, const FeatureStack& features, ForwardCache* cache = nullptr);

/// Accumulates d(sum(d_reward * output))/d(theta) into params.grads.
void backward(NetParams& params, const ForwardCache& cache, const RewardMap& d_reward);

struct AdamConfig {
  double learning_rate = 1e-3;
  double l2_lambda = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// AdamW step descending params.grads, with weight decay decoupled from the
/// adaptive moments. Throws std::domain_error on non-finite gradients.
void apply_update(NetParams& params, AdamState& state, const AdamConfig& config);

/// Versioned header, shape table, then little-endian float32 payload.
std::string checkpoint_bytes(const NetParams& params);
NetParams params_from_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const NetParams& params);
NetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dockirl
