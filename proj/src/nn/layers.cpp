#include "figo/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "figo/error.hpp"

namespace figo::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// col has (channels*k*k) rows and (out_h*out_w) columns.
void im2col(const double* img, int channels, int height, int width, int k, int stride, int pad,
            int out_h, int out_w, double* col) {
  const int spatial = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * spatial;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill_n(dst, out_w, 0.0);
            continue;
          }
          const double* src = img + (static_cast<std::size_t>(c) * height + iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int channels, int height, int width, int k, int stride, int pad,
            int out_h, int out_w, double* img) {
  const int spatial = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * spatial;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          double* dst = img + (static_cast<std::size_t>(c) * height + iy) * width;
          const double* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void fill_normal(Parameter& p, Rng& rng, double stddev) {
  for (double& v : p.value) v = rng.normal(0.0, stddev);
}

}  // namespace

// ---- Conv2d -----------------------------------------------------------------

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
               int padding)
    : weight(name + ".weight", {static_cast<std::size_t>(out_channels),
                                static_cast<std::size_t>(in_channels),
                                static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)}),
      bias(name + ".bias", {static_cast<std::size_t>(out_channels)}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding) {}

Shape Conv2d::output_shape(const Shape& in) const {
  return {in.n, out_, (in.h + 2 * pad_ - k_) / stride_ + 1, (in.w + 2 * pad_ - k_) / stride_ + 1};
}

void Conv2d::init_normal(Rng& rng, double stddev) {
  fill_normal(weight, rng, stddev);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.shape.c != in_) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": expected " + std::to_string(in_) +
                                              " input channels, got " + to_string(x.shape));
  }
  in_shape_ = x.shape;
  out_shape_ = output_shape(x.shape);
  if (out_shape_.h < 1 || out_shape_.w < 1) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": input too small " + to_string(x.shape));
  }
  const int rows = in_ * k_ * k_;
  const int spatial = out_shape_.h * out_shape_.w;
  cols_.resize(static_cast<std::size_t>(x.shape.n) * rows * spatial);
  Tensor y(out_shape_);
  ConstMapMat w(weight.value.data(), out_, rows);
  for (int i = 0; i < x.shape.n; ++i) {
    double* col = cols_.data() + static_cast<std::size_t>(i) * rows * spatial;
    im2col(x.sample(i), in_, x.shape.h, x.shape.w, k_, stride_, pad_, out_shape_.h, out_shape_.w, col);
    MapMat out(y.sample(i), out_, spatial);
    out.noalias() = w * ConstMapMat(col, rows, spatial);
    for (int o = 0; o < out_; ++o) out.row(o).array() += bias.value[o];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool need_input_grad) {
  if (grad_out.shape != out_shape_) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": backward shape " +
                                              to_string(grad_out.shape) + " != " +
                                              to_string(out_shape_));
  }
  const int rows = in_ * k_ * k_;
  const int spatial = out_shape_.h * out_shape_.w;
  MapMat dw(weight.grad.data(), out_, rows);
  ConstMapMat w(weight.value.data(), out_, rows);
  Tensor dx;
  if (need_input_grad) dx = Tensor(in_shape_);
  Buffer dcol(need_input_grad ? static_cast<std::size_t>(rows) * spatial : 0);
  for (int i = 0; i < grad_out.shape.n; ++i) {
    ConstMapMat g(grad_out.sample(i), out_, spatial);
    ConstMapMat col(cols_.data() + static_cast<std::size_t>(i) * rows * spatial, rows, spatial);
    dw.noalias() += g * col.transpose();
    for (int o = 0; o < out_; ++o) bias.grad[o] += g.row(o).sum();
    if (need_input_grad) {
      MapMat(dcol.data(), rows, spatial).noalias() = w.transpose() * g;
      col2im(dcol.data(), in_, in_shape_.h, in_shape_.w, k_, stride_, pad_, out_shape_.h,
             out_shape_.w, dx.sample(i));
    }
  }
  return dx;
}

// ---- ConvTranspose2d ------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_channels, int out_channels,
                                 int kernel, int stride, int padding)
    : weight(name + ".weight", {static_cast<std::size_t>(in_channels),
                                static_cast<std::size_t>(out_channels),
                                static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)}),
      bias(name + ".bias", {static_cast<std::size_t>(out_channels)}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding) {}

Shape ConvTranspose2d::output_shape(const Shape& in) const {
  return {in.n, out_, (in.h - 1) * stride_ - 2 * pad_ + k_, (in.w - 1) * stride_ - 2 * pad_ + k_};
}

void ConvTranspose2d::init_normal(Rng& rng, double stddev) {
  fill_normal(weight, rng, stddev);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  if (x.shape.c != in_) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": expected " + std::to_string(in_) +
                                              " input channels, got " + to_string(x.shape));
  }
  input_ = x;
  out_shape_ = output_shape(x.shape);
  const int rows = out_ * k_ * k_;
  const int spatial = x.shape.h * x.shape.w;
  ConstMapMat w(weight.value.data(), in_, rows);
  Buffer col(static_cast<std::size_t>(rows) * spatial);
  Tensor y(out_shape_);
  const std::size_t plane = static_cast<std::size_t>(out_shape_.h) * out_shape_.w;
  for (int i = 0; i < x.shape.n; ++i) {
    MapMat(col.data(), rows, spatial).noalias() = w.transpose() * ConstMapMat(x.sample(i), in_, spatial);
    double* dst = y.sample(i);
    col2im(col.data(), out_, out_shape_.h, out_shape_.w, k_, stride_, pad_, x.shape.h, x.shape.w, dst);
    for (int o = 0; o < out_; ++o) {
      double* p = dst + o * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] += bias.value[o];
    }
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out, bool need_input_grad) {
  if (grad_out.shape != out_shape_) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": backward shape " +
                                              to_string(grad_out.shape) + " != " +
                                              to_string(out_shape_));
  }
  const int rows = out_ * k_ * k_;
  const Shape in_shape = input_.shape;
  const int spatial = in_shape.h * in_shape.w;
  const std::size_t plane = static_cast<std::size_t>(out_shape_.h) * out_shape_.w;
  MapMat dw(weight.grad.data(), in_, rows);
  ConstMapMat w(weight.value.data(), in_, rows);
  Buffer dcol(static_cast<std::size_t>(rows) * spatial);
  Tensor dx;
  if (need_input_grad) dx = Tensor(in_shape);
  for (int i = 0; i < grad_out.shape.n; ++i) {
    const double* g = grad_out.sample(i);
    for (int o = 0; o < out_; ++o) {
      double s = 0.0;
      for (std::size_t j = 0; j < plane; ++j) s += g[o * plane + j];
      bias.grad[o] += s;
    }
    im2col(g, out_, out_shape_.h, out_shape_.w, k_, stride_, pad_, in_shape.h, in_shape.w, dcol.data());
    ConstMapMat dc(dcol.data(), rows, spatial);
    ConstMapMat xin(input_.sample(i), in_, spatial);
    dw.noalias() += xin * dc.transpose();
    if (need_input_grad) MapMat(dx.sample(i), in_, spatial).noalias() = w * dc;
  }
  return dx;
}

// ---- Linear ---------------------------------------------------------------

Linear::Linear(const std::string& name, int in_features, int out_features)
    : weight(name + ".weight", {static_cast<std::size_t>(out_features), static_cast<std::size_t>(in_features)}),
      bias(name + ".bias", {static_cast<std::size_t>(out_features)}),
      in_(in_features),
      out_(out_features) {}

void Linear::init_normal(Rng& rng, double stddev) {
  fill_normal(weight, rng, stddev);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Tensor Linear::forward(const Tensor& x) {
  if (static_cast<int>(x.shape.per_sample()) != in_) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": expected " + std::to_string(in_) +
                                              " features, got " + to_string(x.shape));
  }
  input_ = x;
  Tensor y({x.shape.n, out_, 1, 1});
  ConstMapMat w(weight.value.data(), out_, in_);
  ConstMapMat xin(x.data.data(), x.shape.n, in_);
  MapMat out(y.data.data(), x.shape.n, out_);
  out.noalias() = xin * w.transpose();
  for (int i = 0; i < x.shape.n; ++i) {
    for (int o = 0; o < out_; ++o) out(i, o) += bias.value[o];
  }
  return y;
}

Tensor Linear::backward(const Tensor& grad_out, bool need_input_grad) {
  const int n = input_.shape.n;
  if (grad_out.shape.n != n || static_cast<int>(grad_out.shape.per_sample()) != out_) {
    throw Error(ErrorCode::ShapeMismatch, weight.name + ": backward shape mismatch");
  }
  ConstMapMat g(grad_out.data.data(), n, out_);
  ConstMapMat xin(input_.data.data(), n, in_);
  MapMat(weight.grad.data(), out_, in_).noalias() += g.transpose() * xin;
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_; ++o) bias.grad[o] += g(i, o);
  }
  Tensor dx;
  if (need_input_grad) {
    dx = Tensor(input_.shape);
    MapMat(dx.data.data(), n, in_).noalias() = g * ConstMapMat(weight.value.data(), out_, in_);
  }
  return dx;
}

// ---- activations ------------------------------------------------------------

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0 ? v : slope * v;
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!(x.data[i] > 0)) g.data[i] *= slope;
  }
  return g;
}

Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::tanh(v);
  return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= 1.0 - y.data[i] * y.data[i];
  return g;
}

Tensor global_avg_pool(const Tensor& x) {
  Tensor y({x.shape.n, x.shape.c, 1, 1});
  const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  for (int i = 0; i < x.shape.n; ++i) {
    for (int c = 0; c < x.shape.c; ++c) {
      const double* p = x.sample(i) + c * plane;
      double s = 0.0;
      for (std::size_t j = 0; j < plane; ++j) s += p[j];
      y.at(i, c, 0, 0) = s / static_cast<double>(plane);
    }
  }
  return y;
}

Tensor global_avg_pool_backward(const Shape& in_shape, const Tensor& grad_out) {
  Tensor g(in_shape);
  const std::size_t plane = static_cast<std::size_t>(in_shape.h) * in_shape.w;
  for (int i = 0; i < in_shape.n; ++i) {
    for (int c = 0; c < in_shape.c; ++c) {
      const double v = grad_out.at(i, c, 0, 0) / static_cast<double>(plane);
      std::fill_n(g.sample(i) + c * plane, plane, v);
    }
  }
  return g;
}

// ---- losses -----------------------------------------------------------------

LossGrad mse_to_constant(const Tensor& pred, double target) {
  LossGrad out{0.0, Tensor(pred.shape)};
  const double n = static_cast<double>(pred.data.size());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target;
    out.loss += d * d;
    out.grad.data[i] = 2.0 * d / n;
  }
  out.loss /= n;
  return out;
}

LossGrad mae(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) {
    throw Error(ErrorCode::ShapeMismatch, "mae: " + to_string(pred.shape) + " vs " + to_string(target.shape));
  }
  LossGrad out{0.0, Tensor(pred.shape)};
  const double n = static_cast<double>(pred.data.size());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    out.loss += std::abs(d);
    out.grad.data[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n;
  }
  out.loss /= n;
  return out;
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossGrad bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  if (logits.data.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "bce_with_logits: label count mismatch");
  }
  LossGrad out{0.0, Tensor(logits.shape)};
  const double n = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double z = logits.data[i];
    const double y = labels[i];
    // max(z,0) - z*y + log(1 + exp(-|z|))
    out.loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    out.grad.data[i] = (sigmoid(z) - y) / n;
  }
  out.loss /= n;
  return out;
}

}  // namespace figo::nn
