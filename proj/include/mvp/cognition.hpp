#pragma once

// Progression cognition: a traffic feature F from the lane adjacency matrix and
// background counts, then multi-head attention from pursuers (queries) to
// evaders (keys) giving the group attention matrix W_g and per-pursuer targets.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvp/nn.hpp"
#include "mvp/roadnet.hpp"

namespace mvp::cognition {

struct CognitionSpec {
  std::size_t lanes = 0;
  std::size_t evaders = 0;
  std::size_t f_dim = 32;
  std::size_t heads = 4;
  std::size_t d_k = 16;
  std::size_t conv_channels = 4;
  std::size_t conv_kernel = 3;
  std::size_t conv_stride = 2;
};

// Pre-softmax logit assigned to captured evaders.
inline constexpr double kMaskedLogit = -1e9;

// bits of the lane code (big-endian, 0/1), then offset / lane length.
std::vector<double> location_embedding(const roadnet::RoadNetwork& net, const roadnet::Location& loc);
std::size_t embedding_width(std::size_t lane_count);

struct FeatureCache {
  std::vector<double> rt;
  std::vector<double> conv_pre;
  nn::MlpCache dense;
};

struct GroupAttention {
  std::size_t pursuers = 0;
  std::size_t evaders = 0;
  std::vector<double> w_g;                    // pursuers x evaders, row-major
  std::vector<std::uint32_t> targets;         // per pursuer
  std::vector<std::vector<std::uint32_t>> groups;  // per evader: pursuers targeting it

  double at(std::size_t n, std::size_t m) const { return w_g[n * evaders + m]; }
  std::span<const double> row(std::size_t n) const {
    return std::span<const double>(w_g).subspan(n * evaders, evaders);
  }
};

struct AttentionCache {
  std::vector<double> query_in;  // N x (e + f)
  std::vector<double> key_in;    // M x (e + f)
  std::vector<double> q;         // h x N x d_k
  std::vector<double> k;         // h x M x d_k
  std::vector<double> heads;     // h x N x M, softmax outputs
  std::vector<bool> captured;
};

// Argmax over live columns, lowest index on ties. Throws std::invalid_argument
// when every column is masked.
std::uint32_t masked_argmax(std::span<const double> row, const std::vector<bool>& captured);
std::vector<std::vector<std::uint32_t>> groups_from_targets(std::span<const std::uint32_t> targets,
                                                            std::size_t evaders);

class CognitionNet {
 public:
  CognitionNet() = default;
  explicit CognitionNet(CognitionSpec spec);

  const CognitionSpec& spec() const { return spec_; }
  std::size_t embed_width() const { return embed_; }
  std::size_t row_width() const { return embed_ + spec_.f_dim; }

  nn::ParamSet init(Rng& rng) const;
  void check(const nn::ParamSet& params) const;

  // RT is L x L (0/1), BV has L entries.
  std::vector<double> traffic_feature(const nn::ParamSet& params, std::span<const double> rt,
                                      std::span<const double> bv, FeatureCache* cache = nullptr) const;
  // Convolution stage alone; constant while RT and params are fixed.
  std::vector<double> conv_features(const nn::ParamSet& params, std::span<const double> rt) const;
  std::vector<double> feature_from_conv(const nn::ParamSet& params, std::span<const double> conv_pre,
                                        std::span<const double> bv) const;
  void feature_backward(const nn::ParamSet& params, const FeatureCache& cache,
                        std::span<const double> f_grad, nn::ParamSet& grads) const;

  // Query rows are embeddings of pursuer locations, key rows of evader
  // locations (each embed_width wide), both extended with F.
  GroupAttention group_attention(const nn::ParamSet& params, std::span<const double> pursuer_embed,
                                 std::span<const double> evader_embed, std::span<const double> f,
                                 const std::vector<bool>& captured,
                                 AttentionCache* cache = nullptr) const;
  // dL/dW_g (N x M) to parameter gradients; optionally dL/dF.
  void attention_backward(const nn::ParamSet& params, const AttentionCache& cache,
                          std::span<const double> wg_grad, nn::ParamSet& grads,
                          std::vector<double>* f_grad = nullptr) const;

 private:
  CognitionSpec spec_;
  std::size_t embed_ = 0;
  nn::Conv2d conv_;
  nn::Mlp dense_;
};

}  // namespace mvp::cognition
