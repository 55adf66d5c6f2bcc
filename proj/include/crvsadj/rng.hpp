#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace crvsadj {

// Deterministic random stream. All variate transforms are written out here
// (instead of using std::*_distribution) so that a given seed produces the
// same stream on every platform and standard-library version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // splitmix64 mix of a base seed with a stream id; used to give chains,
  // replications and substreams independent deterministic seeds.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0,1): 53 random mantissa bits
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // uniform on (0,1], for logs
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential() { return -std::log(uniform_pos()); }

  // standard normal via the polar (Marsaglia) method with one cached value
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double v1, v2, s;
    do {
      v1 = uniform(-1.0, 1.0);
      v2 = uniform(-1.0, 1.0);
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v2 * f;
    have_cached_ = true;
    return v1 * f;
  }

  double normal(double mu, double sd) { return mu + sd * normal(); }

  // Marsaglia-Tsang; exact for all shape > 0
  double gamma(double shape, double scale = 1.0) {
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v * scale;
      }
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  // exact Poisson: sum-of-exponentials for small means, gamma splitting
  // (Ahrens-Dieter) for large ones
  std::int64_t poisson(double mean) {
    std::int64_t count = 0;
    while (mean > 30.0) {
      const auto m = static_cast<std::int64_t>(std::floor(7.0 * mean / 8.0));
      const double g = gamma(static_cast<double>(m));
      if (g < mean) {
        count += m;
        mean -= g;
      } else {
        return count + binomial(m - 1, mean / g);
      }
    }
    double sum = 0.0;
    for (;;) {
      sum += exponential();
      if (sum > mean) return count;
      ++count;
    }
  }

  // exact binomial: Bernoulli loop for small n, order-statistic (beta)
  // splitting for large n
  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::int64_t count = 0;
    while (n > 64) {
      const std::int64_t m = (n + 1) / 2;
      const double v = beta(static_cast<double>(m), static_cast<double>(n - m + 1));
      if (v <= p) {
        count += m;
        p = (p - v) / (1.0 - v);
        n -= m;
      } else {
        p = p / v;
        n = m - 1;
      }
    }
    for (std::int64_t i = 0; i < n; ++i) {
      if (uniform() < p) ++count;
    }
    return count;
  }

  // sequential conditional binomials
  std::vector<std::int64_t> multinomial(std::int64_t n, std::span<const double> probs) {
    std::vector<std::int64_t> out(probs.size(), 0);
    double rest = 1.0;
    std::int64_t left = n;
    for (std::size_t k = 0; k + 1 < probs.size() && left > 0; ++k) {
      const double p = rest > 0.0 ? std::min(1.0, probs[k] / rest) : 1.0;
      out[k] = binomial(left, p);
      left -= out[k];
      rest -= probs[k];
    }
    if (!out.empty()) out.back() += left;
    return out;
  }

 private:
  std::mt19937_64 gen_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace crvsadj
