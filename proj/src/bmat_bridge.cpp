#include "crvsadj/bmat_bridge.hpp"

#include <cmath>

#include "crvsadj/rng.hpp"
#include "crvsadj/special.hpp"

namespace crvsadj {

void KappaModel::validate() const {
  if (n_samples < 1000) throw DataError("KappaModel: n_samples must be >= 1000");
}

Eigen::ArrayXd kappa_draws(const KappaModel& model) {
  model.validate();
  Rng rng(model.seed);
  Eigen::ArrayXd out(model.n_samples);
  for (long i = 0; i < model.n_samples; ++i) out[i] = std::exp(rng.normal());
  return out;
}

double theta_variance(double rho_crvs, const Eigen::ArrayXd& kappa) {
  if (!(rho_crvs > 0.0 && rho_crvs <= 1.0)) {
    throw DataError("theta_variance: rho_crvs outside (0,1]");
  }
  if (rho_crvs == 1.0) return 0.0;  // theta is identically one
  const Eigen::ArrayXd theta = 1.0 / (rho_crvs + (1.0 - rho_crvs) * kappa);
  const double m = theta.mean();
  return (theta - m).square().mean();
}

double kappa_theta_variance(double rho_crvs, const KappaModel& model) {
  if (rho_crvs == 1.0) return 0.0;
  return theta_variance(rho_crvs, kappa_draws(model));
}

std::pair<double, double> negbin_moments_crvs(double rho_truemat,
                                              std::int64_t y_crvs,
                                              const MisclassPoint& s, double m_hat,
                                              VarianceReading reading,
                                              std::int64_t y_matcrvs) {
  if (!(rho_truemat > 0.0 && rho_truemat < 1.0)) {
    throw DataError("negbin_moments_crvs: rho_truemat outside (0,1)");
  }
  if (y_crvs < 0) throw DataError("negbin_moments_crvs: negative y_crvs");
  const double rho = rho_truemat;
  const double E =
      static_cast<double>(y_crvs) *
      (s.lambda_plus * rho + (1.0 - s.lambda_minus) * (1.0 - rho));
  const double v1 = s.v_plus * rho * rho + s.v_minus * (1.0 - rho) * (1.0 - rho) -
                    2.0 * rho * (1.0 - rho) * s.u;
  const double v2 = m_hat * rho * rho * (s.e_plus + s.e_minus);
  if (v1 + v2 < 0.0) {
    throw DataError("negbin_moments_crvs: negative variance contribution");
  }
  double count = static_cast<double>(y_crvs);
  if (reading == VarianceReading::Literal) {
    if (y_matcrvs < 0) {
      throw DataError("negbin_moments_crvs: literal reading needs y_matcrvs");
    }
    count = static_cast<double>(y_matcrvs);
  }
  const double V = E + count * count * (v1 + v2);
  return {E, V};
}

double negbin_logpdf_mean_var(std::int64_t y, double E, double V) {
  if (y < 0) return neg_inf;
  if (!(E > 0.0)) throw DataError("negbin_logpdf_mean_var: mean must be positive");
  if (!(V > E)) throw DataError("negbin_logpdf_mean_var: variance must exceed mean");
  const double r = E * E / (V - E);  // gamma shape
  const double log_p = std::log(E / V);
  const double log_1mp = std::log1p(-E / V);
  return std::lgamma(static_cast<double>(y) + r) - std::lgamma(r) -
         log_factorial(y) + r * log_p + static_cast<double>(y) * log_1mp;
}

double weighted_truemat(std::span<const AnnualTruemat> annual, int t1, int t2) {
  if (t1 > t2) throw DataError("weighted_truemat: t1 > t2");
  double num = 0.0, den = 0.0;
  for (int year = t1; year <= t2; ++year) {
    bool found = false;
    for (const auto& a : annual) {
      if (a.year == year) {
        num += a.rho * a.y_tot;
        den += a.y_tot;
        found = true;
        break;
      }
    }
    if (!found) {
      throw DataError("weighted_truemat: missing year " + std::to_string(year));
    }
  }
  if (den <= 0.0) throw DataError("weighted_truemat: zero total deaths");
  return num / den;
}

double study_complete_loglik(std::int64_t z_truemat, std::int64_t z_tot,
                             double rho_period) {
  if (z_truemat > z_tot) throw DataError("study_complete_loglik: z_truemat > z_tot");
  if (!(rho_period >= 0.0 && rho_period <= 1.0)) {
    throw DataError("study_complete_loglik: rho outside [0,1]");
  }
  return binomial_logpdf(z_truemat, z_tot, rho_period);
}

std::pair<double, double> study_incomplete_moments(std::int64_t z_env,
                                                   std::int64_t z_tot,
                                                   double rho_period,
                                                   const MisclassPoint& s,
                                                   const KappaModel& kappa,
                                                   VarianceReading reading) {
  if (!(z_env > 0 && z_env <= z_tot)) {
    throw DataError("study_incomplete_moments: need 0 < z_env <= z_tot");
  }
  if (!(rho_period > 0.0 && rho_period < 1.0)) {
    throw DataError("study_incomplete_moments: rho outside (0,1)");
  }
  const double rho = rho_period;
  const double env_ratio = static_cast<double>(z_env) / static_cast<double>(z_tot);
  const double m_hat = kappa_theta_variance(env_ratio, kappa);
  const double E =
      static_cast<double>(z_env) *
      (s.lambda_plus * rho + (1.0 - s.lambda_minus) * (1.0 - rho));
  double v1;
  if (reading == VarianceReading::Literal) {
    v1 = s.v_plus * rho * rho + s.v_minus * (1.0 - rho * rho) -
         2.0 * rho * (1.0 - rho) * s.u;
  } else {
    v1 = s.v_plus * rho * rho + s.v_minus * (1.0 - rho) * (1.0 - rho) -
         2.0 * rho * (1.0 - rho) * s.u;
  }
  const double v2 = m_hat * rho * rho * (s.e_plus + s.e_minus);
  if (v1 + v2 < 0.0) {
    throw DataError("study_incomplete_moments: negative variance contribution");
  }
  const double env = static_cast<double>(z_env);
  const double V = E + env * env * (v1 + v2);
  return {E, V};
}

}  // namespace crvsadj
