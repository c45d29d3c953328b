#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace greg {

/// Seeded generator with a portable output sequence.
///
/// The engine is MT19937-64 (bit-exact across standard libraries). The
/// standard distributions are implementation-defined, so the real-valued
/// draws are derived here from the raw 64-bit outputs:
///   uniform()  = (u >> 11) * 2^-53                      in [0, 1)
///   normal()   = Box-Muller on two uniforms, cosine branch, one draw per call
///   index(n)   = u mod n, rejecting draws from the biased tail
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t u = engine_();
    while (u >= limit) u = engine_();
    return u % n;
  }

  /// Fisher-Yates with `index`.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Derives an independent stream seed, e.g. per sample or per restart.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined key.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

/// Uniform draw from the closed ball B(center, radius): a normalized Gaussian
/// direction scaled by radius * u^(1/d).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> uniform_in_ball(
    Rng& rng, const Eigen::MatrixBase<Derived>& center, typename Derived::Scalar radius) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = center.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> direction(d);
  Scalar norm = 0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) direction(i) = static_cast<Scalar>(rng.normal());
    norm = direction.norm();
  } while (norm == Scalar(0));
  const Scalar scale =
      radius * static_cast<Scalar>(std::pow(rng.uniform(), 1.0 / static_cast<double>(d))) / norm;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> point = center.reshaped();
  point += scale * direction;
  return point;
}

}  // namespace greg
