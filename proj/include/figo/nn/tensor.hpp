#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace figo::nn {

/// Cache-line aligned storage. Eigen's vectorised kernels pick their
/// summation order from pointer alignment, so with plain malloc'd buffers two
/// identical seeded runs could round differently.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t per_sample() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Dense NCHW tensor of doubles.
struct Tensor {
  Shape shape;
  Buffer data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.count(), fill) {}

  double* sample(int i) noexcept { return data.data() + shape.per_sample() * static_cast<std::size_t>(i); }
  const double* sample(int i) const noexcept {
    return data.data() + shape.per_sample() * static_cast<std::size_t>(i);
  }
  double& at(int n, int c, int y, int x) noexcept {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
  double at(int n, int c, int y, int x) const noexcept {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
};

/// Learnable tensor plus its accumulated gradient.
struct Parameter {
  std::string name;
  std::vector<std::size_t> dims;
  Buffer value;
  Buffer grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> d);
  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() noexcept;
};

/// FNV-1a over the raw bytes of every parameter value, in order.
std::uint64_t checksum(std::span<const Parameter* const> params);

/// Concatenate along channels; both inputs must agree on n, h, w.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Inverse of concat_channels for gradients: first `c_first` channels go to `a`.
void split_channels(const Tensor& joined, int c_first, Tensor& a, Tensor& b);

}  // namespace figo::nn
