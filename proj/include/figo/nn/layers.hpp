#pragma once

#include <string>
#include <vector>

#include "figo/nn/tensor.hpp"
#include "figo/rng.hpp"

namespace figo::nn {

/// 2-D convolution, weights (out, in, k, k). Caches its input and im2col
/// buffers from the last forward call for backward().
class Conv2d {
 public:
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int padding);

  Shape output_shape(const Shape& in) const;
  Tensor forward(const Tensor& x);
  /// Accumulates weight/bias gradients; returns d(loss)/d(input) unless
  /// need_input_grad is false (then an empty tensor).
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);

  void init_normal(Rng& rng, double stddev);

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_, k_, stride_, pad_;
  Shape in_shape_{};
  Shape out_shape_{};
  Buffer cols_;
};

/// Transposed convolution (the adjoint of Conv2d), weights (in, out, k, k).
class ConvTranspose2d {
 public:
  ConvTranspose2d(const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int padding);

  Shape output_shape(const Shape& in) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);

  void init_normal(Rng& rng, double stddev);

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_, k_, stride_, pad_;
  Tensor input_;
  Shape out_shape_{};
};

/// Fully connected layer on (n, features, 1, 1) tensors, weights (out, in).
class Linear {
 public:
  Linear(const std::string& name, int in_features, int out_features);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);

  void init_normal(Rng& rng, double stddev);

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_;
  Tensor input_;
};

// ---- stateless activations ------------------------------------------------

Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope);
inline Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }
inline Tensor relu_backward(const Tensor& x, const Tensor& g) { return leaky_relu_backward(x, g, 0.0); }
Tensor tanh(const Tensor& x);
Tensor tanh_backward(const Tensor& y, const Tensor& grad_out);

/// Mean over the spatial axes: (n, c, h, w) -> (n, c, 1, 1).
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Shape& in_shape, const Tensor& grad_out);

// ---- losses (mean over all elements) -------------------------------------

struct LossGrad {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(prediction)
};

LossGrad mse_to_constant(const Tensor& pred, double target);
LossGrad mae(const Tensor& pred, const Tensor& target);
/// Binary cross-entropy on logits, labels in {0, 1}; numerically stable form.
LossGrad bce_with_logits(const Tensor& logits, std::span<const double> labels);

double sigmoid(double z) noexcept;

}  // namespace figo::nn
