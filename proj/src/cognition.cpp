#include "mvp/cognition.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mvp/kernels.hpp"

namespace mvp::cognition {

namespace {

const char* const kQuery = "attention.query";
const char* const kKey = "attention.key";
const char* const kOutWeight = "attention.out.weight";
const char* const kOutBias = "attention.out.bias";

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::size_t embedding_width(std::size_t lane_count) { return roadnet::code_width(lane_count) + 1; }

std::vector<double> location_embedding(const roadnet::RoadNetwork& net, const roadnet::Location& loc) {
  const auto code = roadnet::lane_code(loc.lane, net.lane_count());
  std::vector<double> out;
  out.reserve(code.bits.size() + 1);
  for (auto b : code.bits) out.push_back(b ? 1.0 : 0.0);
  out.push_back(loc.offset / net.lane(loc.lane).length);
  return out;
}

std::uint32_t masked_argmax(std::span<const double> row, const std::vector<bool>& captured) {
  std::size_t best = row.size();
  for (std::size_t m = 0; m < row.size(); ++m) {
    if (m < captured.size() && captured[m]) continue;
    if (best == row.size() || row[m] > row[best]) best = m;
  }
  if (best == row.size()) throw std::invalid_argument("no live evader to target");
  return static_cast<std::uint32_t>(best);
}

std::vector<std::vector<std::uint32_t>> groups_from_targets(std::span<const std::uint32_t> targets,
                                                            std::size_t evaders) {
  std::vector<std::vector<std::uint32_t>> groups(evaders);
  for (std::size_t n = 0; n < targets.size(); ++n) groups.at(targets[n]).push_back(static_cast<std::uint32_t>(n));
  return groups;
}

CognitionNet::CognitionNet(CognitionSpec spec) : spec_(spec) {
  require(spec_.lanes > 0 && spec_.evaders > 0, "cognition needs lanes and evaders");
  require(spec_.f_dim > 0 && spec_.heads > 0 && spec_.d_k > 0, "cognition widths must be positive");
  embed_ = embedding_width(spec_.lanes);
  conv_ = nn::Conv2d(spec_.lanes, spec_.lanes, spec_.conv_channels, spec_.conv_kernel, spec_.conv_stride,
                     "feature.");
  dense_ = nn::Mlp({conv_.output_size() + spec_.lanes, spec_.f_dim}, nn::Activation::Identity, "feature.");
}

nn::ParamSet CognitionNet::init(Rng& rng) const {
  nn::ParamSet p;
  conv_.add_params(p, rng);
  dense_.add_params(p, rng);
  const std::size_t h = spec_.heads, dk = spec_.d_k, w = row_width(), m = spec_.evaders;
  nn::Tensor q({h, dk, w}), k({h, dk, w}), ow({m, h * m}), ob({m});
  nn::init_uniform(q, w, rng);
  nn::init_uniform(k, w, rng);
  nn::init_uniform(ow, h * m, rng);
  nn::init_uniform(ob, h * m, rng);
  p.add(kQuery, std::move(q));
  p.add(kKey, std::move(k));
  p.add(kOutWeight, std::move(ow));
  p.add(kOutBias, std::move(ob));
  return p;
}

void CognitionNet::check(const nn::ParamSet& params) const {
  conv_.check(params);
  dense_.check(params);
  const std::size_t h = spec_.heads, dk = spec_.d_k, w = row_width(), m = spec_.evaders;
  auto expect = [&](const char* name, std::vector<std::size_t> shape) {
    const nn::Tensor* t = params.find(name);
    require(t && t->shape == shape, std::string("cognition parameter ") + name + " expected " +
                                        nn::shape_string(shape));
  };
  expect(kQuery, {h, dk, w});
  expect(kKey, {h, dk, w});
  expect(kOutWeight, {m, h * m});
  expect(kOutBias, {m});
}

std::vector<double> CognitionNet::conv_features(const nn::ParamSet& params, std::span<const double> rt) const {
  require(rt.size() == spec_.lanes * spec_.lanes, "RT must be L x L");
  return conv_.forward(params, rt);
}

std::vector<double> CognitionNet::feature_from_conv(const nn::ParamSet& params,
                                                    std::span<const double> conv_pre,
                                                    std::span<const double> bv) const {
  require(bv.size() == spec_.lanes, "BV must have one entry per lane");
  require(conv_pre.size() == conv_.output_size(), "conv feature size mismatch");
  std::vector<double> in(conv_pre.begin(), conv_pre.end());
  nn::relu_inplace(in);
  in.insert(in.end(), bv.begin(), bv.end());
  return dense_.forward(params, in);
}

std::vector<double> CognitionNet::traffic_feature(const nn::ParamSet& params, std::span<const double> rt,
                                                  std::span<const double> bv, FeatureCache* cache) const {
  require(bv.size() == spec_.lanes, "BV must have one entry per lane");
  std::vector<double> pre = conv_features(params, rt);
  std::vector<double> in = pre;
  nn::relu_inplace(in);
  in.insert(in.end(), bv.begin(), bv.end());
  if (!cache) return dense_.forward(params, in);
  cache->rt.assign(rt.begin(), rt.end());
  cache->conv_pre = std::move(pre);
  return dense_.forward(params, in, &cache->dense);
}

void CognitionNet::feature_backward(const nn::ParamSet& params, const FeatureCache& cache,
                                    std::span<const double> f_grad, nn::ParamSet& grads) const {
  if (cache.conv_pre.empty()) throw std::logic_error("feature backward called without a forward cache");
  std::vector<double> in_grad;
  dense_.backward(params, cache.dense, f_grad, grads, &in_grad);
  in_grad.resize(conv_.output_size());
  for (std::size_t i = 0; i < in_grad.size(); ++i)
    if (cache.conv_pre[i] <= 0.0) in_grad[i] = 0.0;
  conv_.backward(params, cache.rt, in_grad, grads);
}

GroupAttention CognitionNet::group_attention(const nn::ParamSet& params,
                                             std::span<const double> pursuer_embed,
                                             std::span<const double> evader_embed,
                                             std::span<const double> f, const std::vector<bool>& captured,
                                             AttentionCache* cache) const {
  const std::size_t e = embed_, fd = spec_.f_dim, w = row_width();
  const std::size_t h = spec_.heads, dk = spec_.d_k, m_count = spec_.evaders;
  require(f.size() == fd, "traffic feature width mismatch");
  require(pursuer_embed.size() % e == 0 && !pursuer_embed.empty(), "pursuer embeddings malformed");
  require(evader_embed.size() == m_count * e, "evader embeddings must cover every evader");
  require(captured.size() == m_count, "captured mask must cover every evader");
  const std::size_t n_count = pursuer_embed.size() / e;
  bool any_live = false;
  for (bool c : captured) any_live = any_live || !c;
  if (!any_live) throw std::invalid_argument("group attention needs at least one live evader");

  const nn::Tensor& wq = params.at(kQuery);
  const nn::Tensor& wk = params.at(kKey);
  const nn::Tensor& wo = params.at(kOutWeight);
  const nn::Tensor& bo = params.at(kOutBias);
  require(wq.shape == std::vector<std::size_t>{h, dk, w} && wo.shape == std::vector<std::size_t>{m_count, h * m_count},
          "attention parameters do not match the spec");

  auto rows = [&](std::span<const double> emb, std::size_t count) {
    std::vector<double> out(count * w);
    for (std::size_t r = 0; r < count; ++r) {
      std::copy_n(emb.begin() + r * e, e, out.begin() + r * w);
      std::copy(f.begin(), f.end(), out.begin() + r * w + e);
    }
    return out;
  };
  std::vector<double> qin = rows(pursuer_embed, n_count);
  std::vector<double> kin = rows(evader_embed, m_count);

  const auto& kt = kernels::active();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<double> q(h * n_count * dk), k(h * m_count * dk), heads(h * n_count * m_count);
  for (std::size_t i = 0; i < h; ++i) {
    const double* wqi = wq.data() + i * dk * w;
    const double* wki = wk.data() + i * dk * w;
    for (std::size_t n = 0; n < n_count; ++n)
      kt.gemv(wqi, qin.data() + n * w, nullptr, q.data() + (i * n_count + n) * dk, dk, w);
    for (std::size_t m = 0; m < m_count; ++m)
      kt.gemv(wki, kin.data() + m * w, nullptr, k.data() + (i * m_count + m) * dk, dk, w);
    for (std::size_t n = 0; n < n_count; ++n) {
      std::vector<double> logits(m_count);
      for (std::size_t m = 0; m < m_count; ++m)
        logits[m] = captured[m] ? kMaskedLogit
                                : scale * kt.dot(q.data() + (i * n_count + n) * dk,
                                                 k.data() + (i * m_count + m) * dk, dk);
      auto y = nn::softmax(logits);
      for (std::size_t m = 0; m < m_count; ++m) {
        if (captured[m]) y[m] = 0.0;
        heads[(i * n_count + n) * m_count + m] = y[m];
      }
    }
  }

  GroupAttention out;
  out.pursuers = n_count;
  out.evaders = m_count;
  out.w_g.assign(n_count * m_count, 0.0);
  std::vector<double> concat(h * m_count);
  for (std::size_t n = 0; n < n_count; ++n) {
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(heads.begin() + (i * n_count + n) * m_count, m_count, concat.begin() + i * m_count);
    double* row = out.w_g.data() + n * m_count;
    kt.gemv(wo.data(), concat.data(), bo.data(), row, m_count, h * m_count);
    for (std::size_t m = 0; m < m_count; ++m)
      if (captured[m]) row[m] = 0.0;
    out.targets.push_back(masked_argmax(out.row(n), captured));
  }
  out.groups = groups_from_targets(out.targets, m_count);

  if (cache) {
    cache->query_in = std::move(qin);
    cache->key_in = std::move(kin);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->heads = std::move(heads);
    cache->captured = captured;
  }
  return out;
}

void CognitionNet::attention_backward(const nn::ParamSet& params, const AttentionCache& cache,
                                      std::span<const double> wg_grad, nn::ParamSet& grads,
                                      std::vector<double>* f_grad) const {
  if (cache.heads.empty()) throw std::logic_error("attention backward called without a forward cache");
  const std::size_t e = embed_, w = row_width(), h = spec_.heads, dk = spec_.d_k, m_count = spec_.evaders;
  const std::size_t n_count = cache.query_in.size() / w;
  require(wg_grad.size() == n_count * m_count, "W_g gradient has the wrong size");

  const nn::Tensor& wq = params.at(kQuery);
  const nn::Tensor& wk = params.at(kKey);
  const nn::Tensor& wo = params.at(kOutWeight);
  nn::Tensor& gq = grads.at(kQuery);
  nn::Tensor& gk = grads.at(kKey);
  nn::Tensor& gwo = grads.at(kOutWeight);
  nn::Tensor& gbo = grads.at(kOutBias);
  const auto& kt = kernels::active();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<double> dg(wg_grad.begin(), wg_grad.end());
  for (std::size_t n = 0; n < n_count; ++n)
    for (std::size_t m = 0; m < m_count; ++m)
      if (cache.captured[m]) dg[n * m_count + m] = 0.0;

  // Output projection.
  std::vector<double> dheads(h * n_count * m_count, 0.0);
  std::vector<double> concat(h * m_count), dconcat(h * m_count);
  for (std::size_t n = 0; n < n_count; ++n) {
    const double* g = dg.data() + n * m_count;
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(cache.heads.begin() + (i * n_count + n) * m_count, m_count, concat.begin() + i * m_count);
    kt.ger(gwo.data(), g, concat.data(), m_count, h * m_count);
    kt.axpy(1.0, g, gbo.data(), m_count);
    std::fill(dconcat.begin(), dconcat.end(), 0.0);
    kt.gemv_t_acc(wo.data(), g, dconcat.data(), m_count, h * m_count);
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(dconcat.begin() + i * m_count, m_count, dheads.begin() + (i * n_count + n) * m_count);
  }

  std::vector<double> dqin(n_count * w, 0.0), dkin(m_count * w, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    std::vector<double> dq(n_count * dk, 0.0), dk_(m_count * dk, 0.0);
    for (std::size_t n = 0; n < n_count; ++n) {
      const std::size_t base = (i * n_count + n) * m_count;
      std::span<const double> y(cache.heads.data() + base, m_count);
      std::span<const double> dy(dheads.data() + base, m_count);
      auto dlogit = nn::softmax_backward(y, dy);
      const double* qn = cache.q.data() + (i * n_count + n) * dk;
      for (std::size_t m = 0; m < m_count; ++m) {
        if (cache.captured[m] || dlogit[m] == 0.0) continue;
        const double s = dlogit[m] * scale;
        const double* km = cache.k.data() + (i * m_count + m) * dk;
        kt.axpy(s, km, dq.data() + n * dk, dk);
        kt.axpy(s, qn, dk_.data() + m * dk, dk);
      }
    }
    double* gqi = gq.data() + i * dk * w;
    double* gki = gk.data() + i * dk * w;
    for (std::size_t n = 0; n < n_count; ++n) {
      kt.ger(gqi, dq.data() + n * dk, cache.query_in.data() + n * w, dk, w);
      kt.gemv_t_acc(wq.data() + i * dk * w, dq.data() + n * dk, dqin.data() + n * w, dk, w);
    }
    for (std::size_t m = 0; m < m_count; ++m) {
      kt.ger(gki, dk_.data() + m * dk, cache.key_in.data() + m * w, dk, w);
      kt.gemv_t_acc(wk.data() + i * dk * w, dk_.data() + m * dk, dkin.data() + m * w, dk, w);
    }
  }

  if (f_grad) {
    f_grad->assign(spec_.f_dim, 0.0);
    for (std::size_t n = 0; n < n_count; ++n) kt.axpy(1.0, dqin.data() + n * w + e, f_grad->data(), spec_.f_dim);
    for (std::size_t m = 0; m < m_count; ++m) kt.axpy(1.0, dkin.data() + m * w + e, f_grad->data(), spec_.f_dim);
  }
}

}  // namespace mvp::cognition
