#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace novelkit {

/// Dense row-major matrix of doubles. All feature blocks, model parameters
/// and pseudo-label matrices in this library use this one representation.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool operator==(const Matrix&) const = default;
};

/// Deterministic PRNG (splitmix64) with hand-rolled distributions.
/// The standard <random> distributions are implementation-defined, which
/// would break seeded reproducibility across toolchains and the frozen
/// expected values in the tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the partner draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform index in [0, n) without modulo bias.
  std::size_t index(std::size_t n) {
    std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::size_t>(r % n);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// Combines two seeds into a derived stream id.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                           std::uint64_t d) {
    return mix(mix(mix(a, b), c), d);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream tags keeping derived seeds of independent random streams apart.
namespace stream {
inline constexpr std::uint64_t synth = 0x01;
inline constexpr std::uint64_t probe_split = 0x02;
inline constexpr std::uint64_t model_init = 0x03;
inline constexpr std::uint64_t shuffle = 0x04;
inline constexpr std::uint64_t augment = 0x05;
inline constexpr std::uint64_t labeler = 0x06;
inline constexpr std::uint64_t kmeans = 0x07;
inline constexpr std::uint64_t extend = 0x08;
}  // namespace stream

/// Runs body(i) for i in [0, n). Each index must write only its own output
/// slot; reductions stay with the caller so results do not depend on the
/// thread count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body);

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::string file_digest_hex(const std::string& path);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace novelkit
