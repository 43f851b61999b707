#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include <Eigen/Core>

namespace truncgen {

// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = mix64(h ^ p);
  return h;
}

/// Standard-normal stream on top of std::mt19937_64.
///
/// std::normal_distribution is implementation-defined, so the Box-Muller
/// transform is spelled out here to keep draws identical across standard
/// libraries (external oracle scripts replay the same stream).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector(Eigen::Index n) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>((*this)());
    return v;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace truncgen
