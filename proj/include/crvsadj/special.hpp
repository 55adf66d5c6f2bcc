#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace crvsadj {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Streaming log-sum-exp: accumulates log(sum_i exp(x_i)) without a second
// pass, rescaling the running sum whenever a new maximum arrives.
class LogSumExp {
 public:
  void add(double x) {
    if (x == neg_inf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const { return sum_ > 0.0 ? max_ + std::log(sum_) : neg_inf; }
  bool empty() const { return sum_ == 0.0; }

 private:
  double max_ = neg_inf;
  double sum_ = 0.0;
};

inline double log_factorial(std::int64_t n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_binomial_coef(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return neg_inf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// log Bin(k | n, p)
inline double binomial_logpdf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0 || k > n) return neg_inf;
  double lp = log_binomial_coef(n, k);
  if (k > 0) {
    if (p <= 0.0) return neg_inf;
    lp += static_cast<double>(k) * std::log(p);
  }
  if (n - k > 0) {
    if (p >= 1.0) return neg_inf;
    lp += static_cast<double>(n - k) * std::log1p(-p);
  }
  return lp;
}

namespace detail {

// continued fraction for the regularized incomplete beta (Lentz)
inline double betacf(double a, double b, double x) {
  constexpr int max_iter = 300;
  constexpr double eps = 3e-15;
  constexpr double fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

// regularized incomplete beta I_x(a, b)
inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::betacf(a, b, x) / a;
  }
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// P(X <= k) for X ~ Bin(n, p)
inline double binomial_cdf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return ibeta(static_cast<double>(n - k), static_cast<double>(k) + 1.0, 1.0 - p);
}

// regularized lower incomplete gamma P(a, x), series/continued-fraction split
inline double igamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("igamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double lga = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 3e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lga);
  }
  constexpr double fpmin = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / fpmin, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 3e-15) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - lga) * h;
}

inline double igamma_q(double a, double x) { return 1.0 - igamma_p(a, x); }

// P(X <= k) for X ~ Poisson(lambda)
inline double poisson_cdf(std::int64_t k, double lambda) {
  if (k < 0) return 0.0;
  if (lambda <= 0.0) return 1.0;
  return igamma_q(static_cast<double>(k) + 1.0, lambda);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// survival function of a chi-square with dof degrees of freedom
inline double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return igamma_q(0.5 * dof, 0.5 * x);
}

}  // namespace crvsadj
