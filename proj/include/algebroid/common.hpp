#ifndef ALGEBROID_COMMON_HPP
#define ALGEBROID_COMMON_HPP

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace algebroid {

/// Deterministic RNG. mt19937_64 has a standard-specified sequence and the
/// uniform draw below avoids std::uniform_real_distribution, whose output is
/// implementation-defined; reports must be byte-identical for a given seed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
  std::mt19937_64 eng_;
};

/// Axis-aligned sampling box in chart coordinates, one [lo, hi] per axis.
using Box = std::vector<std::array<double, 2>>;

std::vector<double> sample_box(const Box& box, Rng& rng);

template <typename T>
class Array2 {
public:
  Array2() = default;
  Array2(int n0, int n1, T init = T{}) : n0_(n0), n1_(n1), v_(static_cast<std::size_t>(n0) * n1, init) {}
  T& operator()(int i, int j) { return v_[static_cast<std::size_t>(i) * n1_ + j]; }
  const T& operator()(int i, int j) const { return v_[static_cast<std::size_t>(i) * n1_ + j]; }
  int rows() const { return n0_; }
  int cols() const { return n1_; }

private:
  int n0_ = 0, n1_ = 0;
  std::vector<T> v_;
};

template <typename T>
class Array3 {
public:
  Array3() = default;
  Array3(int n0, int n1, int n2, T init = T{})
      : n0_(n0), n1_(n1), n2_(n2), v_(static_cast<std::size_t>(n0) * n1 * n2, init) {}
  T& operator()(int i, int j, int k) {
    return v_[(static_cast<std::size_t>(i) * n1_ + j) * n2_ + k];
  }
  const T& operator()(int i, int j, int k) const {
    return v_[(static_cast<std::size_t>(i) * n1_ + j) * n2_ + k];
  }
  int dim0() const { return n0_; }
  int dim1() const { return n1_; }
  int dim2() const { return n2_; }

private:
  int n0_ = 0, n1_ = 0, n2_ = 0;
  std::vector<T> v_;
};

template <typename T>
class Array4 {
public:
  Array4() = default;
  Array4(int n0, int n1, int n2, int n3, T init = T{})
      : n0_(n0), n1_(n1), n2_(n2), n3_(n3),
        v_(static_cast<std::size_t>(n0) * n1 * n2 * n3, init) {}
  T& operator()(int i, int j, int k, int l) {
    return v_[((static_cast<std::size_t>(i) * n1_ + j) * n2_ + k) * n3_ + l];
  }
  const T& operator()(int i, int j, int k, int l) const {
    return v_[((static_cast<std::size_t>(i) * n1_ + j) * n2_ + k) * n3_ + l];
  }

private:
  int n0_ = 0, n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<T> v_;
};

}  // namespace algebroid

#endif
