#include "figo/nn/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "figo/error.hpp"

namespace figo::nn {

std::string to_string(const Shape& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

Parameter::Parameter(std::string n, std::vector<std::size_t> d) : name(std::move(n)), dims(std::move(d)) {
  const std::size_t count =
      std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  value.assign(count, 0.0);
  grad.assign(count, 0.0);
}

void Parameter::zero_grad() noexcept { std::fill(grad.begin(), grad.end(), 0.0); }

std::uint64_t checksum(std::span<const Parameter* const> params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const std::size_t n = p->value.size() * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape.n != b.shape.n || a.shape.h != b.shape.h || a.shape.w != b.shape.w) {
    throw Error(ErrorCode::ShapeMismatch,
                "concat_channels: " + to_string(a.shape) + " vs " + to_string(b.shape));
  }
  Tensor out({a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
  const std::size_t na = a.shape.per_sample();
  const std::size_t nb = b.shape.per_sample();
  for (int i = 0; i < a.shape.n; ++i) {
    std::copy_n(a.sample(i), na, out.sample(i));
    std::copy_n(b.sample(i), nb, out.sample(i) + na);
  }
  return out;
}

void split_channels(const Tensor& joined, int c_first, Tensor& a, Tensor& b) {
  const Shape s = joined.shape;
  a = Tensor({s.n, c_first, s.h, s.w});
  b = Tensor({s.n, s.c - c_first, s.h, s.w});
  const std::size_t na = a.shape.per_sample();
  const std::size_t nb = b.shape.per_sample();
  for (int i = 0; i < s.n; ++i) {
    std::copy_n(joined.sample(i), na, a.sample(i));
    std::copy_n(joined.sample(i) + na, nb, b.sample(i));
  }
}

}  // namespace figo::nn
