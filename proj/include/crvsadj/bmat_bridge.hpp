#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "crvsadj/core_types.hpp"
#include "crvsadj/postprocess.hpp"

namespace crvsadj {

// Monte Carlo model for the ratio of maternal-death probabilities among
// unregistered versus registered deaths: log(kappa) ~ N(0,1).
struct KappaModel {
  long n_samples = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

// Two readings of ambiguous variance formulas; the mutually consistent one
// is the default, the literal one stays available behind this switch.
enum class VarianceReading { Consistent, Literal };

// Shared kappa draw set (common random numbers across country-years).
Eigen::ArrayXd kappa_draws(const KappaModel& model);

// Variance of theta = 1 / (rho_crvs + (1 - rho_crvs) * kappa) over a draw set.
double theta_variance(double rho_crvs, const Eigen::ArrayXd& kappa);

// Draws its own kappa set; exactly zero for complete CRVS.
double kappa_theta_variance(double rho_crvs, const KappaModel& model);

// Mean and variance of the overdispersed count model for CRVS-reported
// maternal deaths. The squared count multiplying the variance terms is read
// as (CRVS total)^2 by default; the literal reading squares the reported
// maternal count passed as y_matcrvs.
std::pair<double, double> negbin_moments_crvs(
    double rho_truemat, std::int64_t y_crvs, const MisclassPoint& s, double m_hat,
    VarianceReading reading = VarianceReading::Consistent,
    std::int64_t y_matcrvs = -1);

// Negative-binomial log density parameterized by mean and variance
// (gamma-Poisson mixture with shape E^2/(V-E)); requires V > E.
double negbin_logpdf_mean_var(std::int64_t y, double E, double V);

struct AnnualTruemat {
  int year = 0;
  double rho = 0.0;
  double y_tot = 0.0;
};

// Period probability of a maternal death, weighting annual probabilities by
// total deaths.
double weighted_truemat(std::span<const AnnualTruemat> annual, int t1, int t2);

// Binomial data model for specialized studies with complete envelopes.
double study_complete_loglik(std::int64_t z_truemat, std::int64_t z_tot,
                             double rho_period);

// NegBin moments for studies with incomplete envelopes; the envelope ratio
// z_env/z_tot plays the role of CRVS completeness in the theta variance.
std::pair<double, double> study_incomplete_moments(
    std::int64_t z_env, std::int64_t z_tot, double rho_period,
    const MisclassPoint& s, const KappaModel& kappa,
    VarianceReading reading = VarianceReading::Consistent);

}  // namespace crvsadj
