#include "mvp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mvp/kernels.hpp"

namespace mvp::nn {

std::size_t element_count(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> dims) {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) s << (i ? "," : "") << dims[i];
  s << ']';
  return s.str();
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), values(element_count(shape), fill) {}

Tensor Tensor::from(std::vector<std::size_t> dims, std::vector<double> vals) {
  if (element_count(dims) != vals.size())
    throw std::invalid_argument("tensor shape " + shape_string(dims) + " does not match " +
                                std::to_string(vals.size()) + " values");
  Tensor t;
  t.shape = std::move(dims);
  t.values = std::move(vals);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void ParamSet::add(std::string name, Tensor t) {
  if (find(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

const Tensor* ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &tensors_[i];
  return nullptr;
}

const Tensor& ParamSet::at(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Tensor& ParamSet::at(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).at(name));
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  out.names_ = names_;
  out.tensors_.reserve(tensors_.size());
  for (const Tensor& t : tensors_) out.tensors_.emplace_back(t.shape, 0.0);
  return out;
}

void ParamSet::fill(double value) {
  for (Tensor& t : tensors_) std::fill(t.values.begin(), t.values.end(), value);
}

void ParamSet::scale(double factor) {
  for (Tensor& t : tensors_)
    for (double& v : t.values) v *= factor;
}

void ParamSet::add_scaled(const ParamSet& other, double factor) {
  if (!same_layout(other)) throw std::invalid_argument("parameter layouts differ");
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    k.axpy(factor, other.tensors_[i].data(), tensors_[i].data(), tensors_[i].size());
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].shape != other.tensors_[i].shape) return false;
  return true;
}

void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values) v = uniform(rng, -bound, bound);
}

Mlp::Mlp(std::vector<std::size_t> widths, Activation hidden, std::string prefix)
    : widths_(std::move(widths)), hidden_(hidden), prefix_(std::move(prefix)) {
  if (widths_.size() < 2) throw std::invalid_argument("an MLP needs input and output widths");
  for (std::size_t w : widths_)
    if (w == 0) throw std::invalid_argument("MLP widths must be positive");
}

void Mlp::add_params(ParamSet& params, Rng& rng) const {
  for (std::size_t k = 0; k < layer_count(); ++k) {
    const std::size_t in = widths_[k];
    const std::size_t out = widths_[k + 1];
    Tensor w({out, in});
    Tensor b({out});
    init_uniform(w, in, rng);
    init_uniform(b, in, rng);
    params.add(prefix_ + "dense" + std::to_string(k) + ".weight", std::move(w));
    params.add(prefix_ + "dense" + std::to_string(k) + ".bias", std::move(b));
  }
}

ParamSet Mlp::init(Rng& rng) const {
  ParamSet p;
  add_params(p, rng);
  return p;
}

std::vector<Mlp::Slot> Mlp::slots(const ParamSet& params) const {
  std::vector<Slot> out;
  out.reserve(layer_count());
  for (std::size_t k = 0; k < layer_count(); ++k) {
    const std::string base = prefix_ + "dense" + std::to_string(k);
    const Tensor* w = params.find(base + ".weight");
    const Tensor* b = params.find(base + ".bias");
    const std::vector<std::size_t> ws{widths_[k + 1], widths_[k]};
    const std::vector<std::size_t> bs{widths_[k + 1]};
    if (!w || !b || w->shape != ws || b->shape != bs)
      throw std::invalid_argument("parameters do not match layer " + base + " " + shape_string(ws));
    out.push_back({w, b});
  }
  return out;
}

void Mlp::check(const ParamSet& params) const { (void)slots(params); }

std::vector<double> Mlp::forward(const ParamSet& params, std::span<const double> input,
                                 MlpCache* cache) const {
  if (input.size() != input_width())
    throw std::invalid_argument("MLP input width " + std::to_string(input.size()) + ", expected " +
                                std::to_string(input_width()));
  const auto layers = slots(params);
  const auto& k = kernels::active();
  std::vector<double> x(input.begin(), input.end());
  if (cache) {
    cache->layer_inputs.assign(layer_count(), {});
    cache->pre.assign(layer_count(), {});
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> y(widths_[l + 1]);
    k.gemv(layers[l].weight->data(), x.data(), layers[l].bias->data(), y.data(), y.size(), x.size());
    if (cache) {
      cache->layer_inputs[l] = x;
      cache->pre[l] = y;
    }
    if (l + 1 < layers.size() && hidden_ == Activation::Relu) relu_inplace(y);
    x = std::move(y);
  }
  return x;
}

std::vector<double> Mlp::forward_batch(const ParamSet& params, std::span<const double> inputs,
                                       std::size_t rows) const {
  if (inputs.size() != rows * input_width())
    throw std::invalid_argument("MLP batch input has the wrong size");
  const auto layers = slots(params);
  const auto& k = kernels::active();
  std::vector<double> x(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> y(rows * widths_[l + 1]);
    k.gemm_nt(x.data(), layers[l].weight->data(), layers[l].bias->data(), y.data(), rows,
              widths_[l], widths_[l + 1]);
    if (l + 1 < layers.size() && hidden_ == Activation::Relu) relu_inplace(y);
    x = std::move(y);
  }
  return x;
}

void Mlp::backward(const ParamSet& params, const MlpCache& cache,
                   std::span<const double> output_grad, ParamSet& grads,
                   std::vector<double>* input_grad) const {
  if (cache.empty() || cache.layer_inputs.size() != layer_count())
    throw std::logic_error("MLP backward called without a forward cache");
  if (output_grad.size() != output_width())
    throw std::invalid_argument("MLP output gradient has the wrong width");
  const auto layers = slots(params);
  const auto& k = kernels::active();
  std::vector<double> g(output_grad.begin(), output_grad.end());
  for (std::size_t l = layer_count(); l-- > 0;) {
    if (l + 1 < layer_count() && hidden_ == Activation::Relu) {
      const auto& pre = cache.pre[l];
      for (std::size_t i = 0; i < g.size(); ++i)
        if (pre[i] <= 0.0) g[i] = 0.0;
    }
    const std::string base = prefix_ + "dense" + std::to_string(l);
    Tensor& gw = grads.at(base + ".weight");
    Tensor& gb = grads.at(base + ".bias");
    const auto& x = cache.layer_inputs[l];
    k.ger(gw.data(), g.data(), x.data(), g.size(), x.size());
    k.axpy(1.0, g.data(), gb.data(), g.size());
    if (l == 0 && !input_grad) break;
    std::vector<double> gx(x.size(), 0.0);
    k.gemv_t_acc(layers[l].weight->data(), g.data(), gx.data(), g.size(), x.size());
    g = std::move(gx);
  }
  if (input_grad) *input_grad = std::move(g);
}

Conv2d::Conv2d(std::size_t height, std::size_t width, std::size_t channels, std::size_t kernel,
               std::size_t stride, std::string prefix)
    : height_(height), width_(width), channels_(channels), kernel_(kernel), stride_(stride),
      prefix_(std::move(prefix)) {
  if (channels == 0 || kernel == 0 || stride == 0) throw std::invalid_argument("bad conv spec");
  if (height < kernel || width < kernel)
    throw std::invalid_argument("conv input " + std::to_string(height) + "x" + std::to_string(width) +
                                " smaller than kernel " + std::to_string(kernel));
  out_h_ = (height - kernel) / stride + 1;
  out_w_ = (width - kernel) / stride + 1;
}

void Conv2d::add_params(ParamSet& params, Rng& rng) const {
  Tensor w({channels_, kernel_, kernel_});
  Tensor b({channels_});
  init_uniform(w, kernel_ * kernel_, rng);
  init_uniform(b, kernel_ * kernel_, rng);
  params.add(prefix_ + "conv.weight", std::move(w));
  params.add(prefix_ + "conv.bias", std::move(b));
}

void Conv2d::check(const ParamSet& params) const {
  const Tensor* w = params.find(prefix_ + "conv.weight");
  const Tensor* b = params.find(prefix_ + "conv.bias");
  const std::vector<std::size_t> ws{channels_, kernel_, kernel_};
  if (!w || !b || w->shape != ws || b->shape != std::vector<std::size_t>{channels_})
    throw std::invalid_argument("parameters do not match conv layer " + shape_string(ws));
}

std::vector<double> Conv2d::forward(const ParamSet& params, std::span<const double> input) const {
  check(params);
  if (input.size() != height_ * width_) throw std::invalid_argument("conv input has the wrong size");
  const Tensor& w = params.at(prefix_ + "conv.weight");
  const Tensor& b = params.at(prefix_ + "conv.bias");
  std::vector<double> out(output_size());
  for (std::size_t c = 0; c < channels_; ++c) {
    const double* wc = w.data() + c * kernel_ * kernel_;
    for (std::size_t i = 0; i < out_h_; ++i) {
      for (std::size_t j = 0; j < out_w_; ++j) {
        double acc = b.values[c];
        for (std::size_t u = 0; u < kernel_; ++u) {
          const double* row = input.data() + (i * stride_ + u) * width_ + j * stride_;
          for (std::size_t v = 0; v < kernel_; ++v) acc += wc[u * kernel_ + v] * row[v];
        }
        out[(c * out_h_ + i) * out_w_ + j] = acc;
      }
    }
  }
  return out;
}

void Conv2d::backward(const ParamSet& params, std::span<const double> input,
                      std::span<const double> output_grad, ParamSet& grads,
                      std::vector<double>* input_grad) const {
  check(params);
  if (output_grad.size() != output_size()) throw std::invalid_argument("conv gradient has the wrong size");
  const Tensor& w = params.at(prefix_ + "conv.weight");
  Tensor& gw = grads.at(prefix_ + "conv.weight");
  Tensor& gb = grads.at(prefix_ + "conv.bias");
  if (input_grad) input_grad->assign(height_ * width_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    double* gwc = gw.data() + c * kernel_ * kernel_;
    const double* wc = w.data() + c * kernel_ * kernel_;
    for (std::size_t i = 0; i < out_h_; ++i) {
      for (std::size_t j = 0; j < out_w_; ++j) {
        const double g = output_grad[(c * out_h_ + i) * out_w_ + j];
        if (g == 0.0) continue;
        gb.values[c] += g;
        for (std::size_t u = 0; u < kernel_; ++u) {
          const std::size_t base = (i * stride_ + u) * width_ + j * stride_;
          for (std::size_t v = 0; v < kernel_; ++v) {
            gwc[u * kernel_ + v] += g * input[base + v];
            if (input_grad) (*input_grad)[base + v] += g * wc[u * kernel_ + v];
          }
        }
      }
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> y(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::exp(logits[i] - mx);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

std::vector<double> softmax_backward(std::span<const double> y, std::span<const double> dy) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  std::vector<double> dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
  return dx;
}

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void sgd_step(ParamSet& params, const ParamSet& grads, double lr) {
  params.add_scaled(grads, -lr);
}

}  // namespace mvp::nn
