#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately brute force: full tuple enumeration, direct pmf summation,
// dense joint-covariance densities. None of it shares code with the
// evaluation paths it checks.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "crvsadj/core_types.hpp"
#include "crvsadj/likelihood.hpp"
#include "crvsadj/process_model.hpp"

namespace oracle {

inline double log_fact(std::int64_t n) {
  double s = 0.0;
  for (std::int64_t k = 2; k <= n; ++k) s += std::log(static_cast<double>(k));
  return s;
}

// plain multinomial density over 4 cells, linear-space coefficient
inline double multinom4(std::int64_t n, std::int64_t a, std::int64_t b,
                        std::int64_t c, std::int64_t d, const crvsadj::GammaFour& g) {
  const double log_coef =
      log_fact(n) - log_fact(a) - log_fact(b) - log_fact(c) - log_fact(d);
  const std::int64_t counts[4] = {a, b, c, d};
  const double probs[4] = {g.g_tplus, g.g_fminus, g.g_tminus, g.g_fplus};
  double lp = log_coef;
  for (int k = 0; k < 4; ++k) {
    if (counts[k] == 0) continue;
    if (probs[k] <= 0.0) return 0.0;
    lp += static_cast<double>(counts[k]) * std::log(probs[k]);
  }
  return std::exp(lp);
}

// sum of the four-cell multinomial over every (T+, F-, T-, F+) consistent
// with the two observed margins
inline double overlap_brute_force(std::int64_t z_crvs, std::int64_t z_matcrvs,
                                  std::int64_t z_truemat_crvs,
                                  const crvsadj::GammaFour& g) {
  double total = 0.0;
  for (std::int64_t tp = 0; tp <= z_crvs; ++tp) {
    for (std::int64_t fm = 0; tp + fm <= z_crvs; ++fm) {
      for (std::int64_t tm = 0; tp + fm + tm <= z_crvs; ++tm) {
        const std::int64_t fp = z_crvs - tp - fm - tm;
        if (tp + fm != z_truemat_crvs) continue;
        if (tp + fp != z_matcrvs) continue;
        total += multinom4(z_crvs, tp, fm, tm, fp, g);
      }
    }
  }
  return total;
}

// exhaustive (U+, T+, F-, T-, F+) enumeration for the incomplete-CRVS case
inline double incomplete_brute_force(std::int64_t z_crvs, std::int64_t z_unreg,
                                     std::int64_t z_matcrvs, std::int64_t z_truemat,
                                     const crvsadj::GammaFour& g) {
  double total = 0.0;
  for (std::int64_t up = 0; up <= z_unreg; ++up) {
    for (std::int64_t tp = 0; tp <= z_crvs; ++tp) {
      for (std::int64_t fm = 0; tp + fm <= z_crvs; ++fm) {
        for (std::int64_t tm = 0; tp + fm + tm <= z_crvs; ++tm) {
          const std::int64_t fp = z_crvs - tp - fm - tm;
          if (tp + fp != z_matcrvs) continue;
          if (up + tp + fm != z_truemat) continue;
          total += multinom4(z_crvs, tp, fm, tm, fp, g);
        }
      }
    }
  }
  return total;
}

// binomial pmf and cdf by direct log-space summation
inline double binom_pmf(std::int64_t k, std::int64_t n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  const double lp = log_fact(n) - log_fact(k) - log_fact(n - k) +
                    static_cast<double>(k) * std::log(p) +
                    static_cast<double>(n - k) * std::log1p(-p);
  return std::exp(lp);
}

inline double binom_cdf_sum(std::int64_t k, std::int64_t n, double p) {
  double s = 0.0;
  for (std::int64_t i = 0; i <= std::min(k, n); ++i) s += binom_pmf(i, n, p);
  return std::min(s, 1.0);
}

inline std::int64_t binom_quantile_sum(std::int64_t n, double p, double q) {
  double s = 0.0;
  for (std::int64_t k = 0; k <= n; ++k) {
    s += binom_pmf(k, n, p);
    if (s >= q) return k;
  }
  return n;
}

// Poisson cdf by direct summation, and the exact 97.5% upper confidence
// bound for the mean given an observed count (bisection)
inline double poisson_cdf_sum(std::int64_t k, double lambda) {
  // log-space term recurrence so large means do not underflow
  std::vector<double> log_terms;
  double lt = -lambda;
  for (std::int64_t i = 0; i <= k; ++i) {
    log_terms.push_back(lt);
    lt += std::log(lambda) - std::log(static_cast<double>(i + 1));
  }
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  double s = 0.0;
  for (double t : log_terms) s += std::exp(t - m);
  return std::exp(m + std::log(s));
}

inline double poisson_upper_bound(std::int64_t observed, double level = 0.025) {
  double lo = static_cast<double>(observed);
  double hi = static_cast<double>(observed) + 10.0 * std::sqrt(observed + 1.0) + 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (poisson_cdf_sum(observed, mid) > level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// joint log density of a country path as one dense multivariate normal:
// the path is a linear map of (reference pair, increments), so its
// covariance is A * blockdiag(Sigma, Delta, ...) * A^T
inline double path_joint_logpdf(const crvsadj::CountryPath& path,
                                const crvsadj::HyperParams& h) {
  const int n = path.n_years();
  const int dim = 2 * n;
  const int ref = path.t_ref - path.year_start;

  // x ordering: (eta_plus_0, eta_minus_0, eta_plus_1, eta_minus_1, ...)
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);

  const auto cov2 = [&](double s1, double s2) {
    Eigen::Matrix2d m;
    m << s1 * s1, h.phi * s1 * s2, h.phi * s1 * s2, s2 * s2;
    return m;
  };

  // latent ordering: ref pair first, then increments year by year
  std::vector<int> latent_year(n, 0);
  int slot = 0;
  block.block<2, 2>(0, 0) = cov2(h.sigma_plus, h.sigma_minus);
  latent_year[slot++] = path.t_ref;
  for (int year = path.year_start; year <= path.year_end; ++year) {
    if (year == path.t_ref) continue;
    block.block<2, 2>(2 * slot, 2 * slot) = cov2(h.delta_plus, h.delta_minus);
    latent_year[slot++] = year;
  }

  // path value = ref + sum of increments between the reference year and the
  // path year (exclusive of the ref slot)
  for (int year = path.year_start; year <= path.year_end; ++year) {
    const int row = 2 * (year - path.year_start);
    a.block<2, 2>(row, 0) = Eigen::Matrix2d::Identity();
    for (int s = 1; s < n; ++s) {
      const int ly = latent_year[s];
      const bool used = (year > path.t_ref && ly > path.t_ref && ly <= year) ||
                        (year < path.t_ref && ly < path.t_ref && ly >= year);
      if (used) a.block<2, 2>(row, 2 * s) = Eigen::Matrix2d::Identity();
    }
  }

  const Eigen::MatrixXd cov = a * block * a.transpose();
  Eigen::VectorXd mean(dim), x(dim);
  for (int year = path.year_start; year <= path.year_end; ++year) {
    const int row = 2 * (year - path.year_start);
    mean[row] = h.eta_world_plus;
    mean[row + 1] = h.eta_world_minus;
    x[row] = path.eta_plus[year - path.year_start];
    x[row + 1] = path.eta_minus[year - path.year_start];
  }
  (void)ref;

  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd diff = x - mean;
  const Eigen::VectorXd solved = llt.solve(diff);
  double log_det = 0.0;
  for (int i = 0; i < dim; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (dim * std::log(2.0 * M_PI) + log_det + diff.dot(solved));
}

}  // namespace oracle
