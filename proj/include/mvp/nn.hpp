#pragma once

// Minimal differentiable building blocks: dense stacks, a single-input-channel
// 2-D convolution, softmax, and plain SGD. All values are 64-bit reals; inner
// loops go through mvp::kernels.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvp/rng.hpp"

namespace mvp::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  static Tensor from(std::vector<std::size_t> dims, std::vector<double> values);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(std::span<const std::size_t> dims);
std::string shape_string(std::span<const std::size_t> dims);

// Ordered collection of named parameter tensors (a network's parameters, or
// gradients with the same layout).
class ParamSet {
 public:
  void add(std::string name, Tensor t);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& operator[](std::size_t i) { return tensors_.at(i); }
  const Tensor& operator[](std::size_t i) const { return tensors_.at(i); }
  // Throws std::out_of_range for unknown names.
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  const Tensor* find(std::string_view name) const;

  ParamSet zeros_like() const;
  void fill(double value);
  void scale(double factor);
  // this += factor * other
  void add_scaled(const ParamSet& other, double factor);
  std::size_t scalar_count() const;
  bool same_layout(const ParamSet& other) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

enum class Activation { Identity, Relu };

struct MlpCache {
  // layer_inputs[k] is the input to dense layer k; pre[k] its pre-activation.
  std::vector<std::vector<double>> layer_inputs;
  std::vector<std::vector<double>> pre;

  bool empty() const { return layer_inputs.empty(); }
};

// Stack of dense layers; the activation applies between layers, the output
// layer is linear. Parameters are named "<prefix>dense<k>.weight" (out x in)
// and "<prefix>dense<k>.bias".
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, Activation hidden = Activation::Relu, std::string prefix = "");

  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }

  ParamSet init(Rng& rng) const;
  void add_params(ParamSet& params, Rng& rng) const;
  // Throws std::invalid_argument when shapes differ from the layer spec.
  void check(const ParamSet& params) const;

  std::vector<double> forward(const ParamSet& params, std::span<const double> input,
                              MlpCache* cache = nullptr) const;
  // `rows` inputs stored contiguously; returns rows x output_width.
  std::vector<double> forward_batch(const ParamSet& params, std::span<const double> inputs,
                                    std::size_t rows) const;
  // Accumulates parameter gradients into `grads` (same layout as params).
  // Throws std::logic_error on an empty cache.
  void backward(const ParamSet& params, const MlpCache& cache, std::span<const double> output_grad,
                ParamSet& grads, std::vector<double>* input_grad = nullptr) const;

 private:
  struct Slot {
    const Tensor* weight;
    const Tensor* bias;
  };
  std::vector<Slot> slots(const ParamSet& params) const;

  std::vector<std::size_t> widths_;
  Activation hidden_ = Activation::Relu;
  std::string prefix_;
};

// Single input channel, `channels` output maps, square kernel, no padding.
// Parameters "<prefix>conv.weight" (channels x k x k) and "<prefix>conv.bias".
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t height, std::size_t width, std::size_t channels, std::size_t kernel,
         std::size_t stride, std::string prefix = "");

  std::size_t out_height() const { return out_h_; }
  std::size_t out_width() const { return out_w_; }
  std::size_t channels() const { return channels_; }
  std::size_t output_size() const { return channels_ * out_h_ * out_w_; }

  void add_params(ParamSet& params, Rng& rng) const;
  void check(const ParamSet& params) const;

  // Output laid out channel-major: [c][i][j].
  std::vector<double> forward(const ParamSet& params, std::span<const double> input) const;
  void backward(const ParamSet& params, std::span<const double> input,
                std::span<const double> output_grad, ParamSet& grads,
                std::vector<double>* input_grad = nullptr) const;

 private:
  std::size_t height_ = 0, width_ = 0, channels_ = 0, kernel_ = 0, stride_ = 1;
  std::size_t out_h_ = 0, out_w_ = 0;
  std::string prefix_;
};

std::vector<double> softmax(std::span<const double> logits);
// Gradient w.r.t. the logits given the softmax output y and dL/dy.
std::vector<double> softmax_backward(std::span<const double> y, std::span<const double> dy);

void relu_inplace(std::span<double> v);

// p <- p - lr * g for every tensor.
void sgd_step(ParamSet& params, const ParamSet& grads, double lr);

}  // namespace mvp::nn
