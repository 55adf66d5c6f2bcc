#include "crvsadj/process_model.hpp"

#include <cmath>

#include "crvsadj/special.hpp"

namespace crvsadj {

namespace {

constexpr double log_2pi = 1.8378770664093453;

// generic bounded logit: eta = log((x - lo) / (1 - x)) on (lo, 1)
double to_eta(double x, double lo, const char* what) {
  if (!(x > lo && x < 1.0)) {
    throw DataError(std::string("to_transformed: ") + what + " outside open interval");
  }
  return std::log((x - lo) / (1.0 - x));
}

double from_eta(double eta, double lo) {
  if (eta > 0.0) {
    // rearranged to avoid overflow of exp(eta)
    const double e = std::exp(-eta);
    return (lo * e + 1.0) / (1.0 + e);
  }
  const double e = std::exp(eta);
  return (lo + e) / (1.0 + e);
}

// log |dx/deta| for the bounded logit, x = from_eta(eta, lo)
double log_jacobian(double eta, double lo) {
  // dx/deta = (1 - lo) * e^eta / (1 + e^eta)^2
  const double a = -std::fabs(eta);
  return std::log1p(-lo) + a - 2.0 * std::log1p(std::exp(a));
}

double half_normal_logpdf(double x) {
  if (x <= 0.0) return neg_inf;
  return 0.5 * std::log(2.0 / M_PI) - 0.5 * x * x;
}

}  // namespace

void HyperParams::validate() const {
  if (!(sigma_plus > 0.0 && sigma_minus > 0.0 && delta_plus > 0.0 && delta_minus > 0.0)) {
    throw DataError("HyperParams: standard deviations must be positive");
  }
  if (!(std::fabs(phi) < phi_bound)) {
    throw DataError("HyperParams: |phi| must be below 0.95");
  }
}

int CountryPath::index(int year) const {
  if (year < year_start || year > year_end) {
    throw DataError(country + ": year " + std::to_string(year) + " outside path span");
  }
  return year - year_start;
}

double CountryPath::se_at(int year) const { return eta_to_se(eta_plus[index(year)]); }
double CountryPath::sp_at(int year) const { return eta_to_sp(eta_minus[index(year)]); }

void CountryPath::validate() const {
  if (year_start > year_end) throw DataError(country + ": empty path span");
  if (t_ref < year_start || t_ref > year_end) {
    throw DataError(country + ": reference year outside span");
  }
  if (eta_plus.size() != n_years() || eta_minus.size() != n_years()) {
    throw DataError(country + ": path length mismatch");
  }
  for (double v : truemat) {
    if (!(v > 0.0 && v < 1.0)) throw DataError(country + ": truemat outside (0,1)");
  }
}

double se_to_eta(double lambda_plus) { return to_eta(lambda_plus, se_lower, "sensitivity"); }
double sp_to_eta(double lambda_minus) { return to_eta(lambda_minus, sp_lower, "specificity"); }
double eta_to_se(double eta_plus) { return from_eta(eta_plus, se_lower); }
double eta_to_sp(double eta_minus) { return from_eta(eta_minus, sp_lower); }

std::pair<double, double> to_transformed(double lambda_plus, double lambda_minus) {
  return {se_to_eta(lambda_plus), sp_to_eta(lambda_minus)};
}

std::pair<double, double> to_natural(double eta_plus, double eta_minus) {
  return {eta_to_se(eta_plus), eta_to_sp(eta_minus)};
}

double bvn_logpdf(double x1, double x2, double m1, double m2, double s1,
                  double s2, double rho) {
  const double z1 = (x1 - m1) / s1;
  const double z2 = (x2 - m2) / s2;
  const double omr2 = 1.0 - rho * rho;
  return -log_2pi - std::log(s1 * s2) - 0.5 * std::log(omr2) -
         (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * omr2);
}

double log_prior_hyper(const HyperParams& h) {
  if (!(h.sigma_plus > 0.0 && h.sigma_minus > 0.0 && h.delta_plus > 0.0 &&
        h.delta_minus > 0.0)) {
    return neg_inf;
  }
  if (!(std::fabs(h.phi) < phi_bound)) return neg_inf;

  // world means: uniform on the natural scale, hence density = Jacobian of
  // the bounded logit divided by the interval width, on the eta scale
  const double se_world = eta_to_se(h.eta_world_plus);
  const double sp_world = eta_to_sp(h.eta_world_minus);
  if (!(se_world > se_world_lower && se_world < 1.0)) return neg_inf;
  if (!(sp_world > sp_world_lower && sp_world < 1.0)) return neg_inf;

  double lp = 0.0;
  lp += log_jacobian(h.eta_world_plus, se_lower) - std::log(1.0 - se_world_lower);
  lp += log_jacobian(h.eta_world_minus, sp_lower) - std::log(1.0 - sp_world_lower);
  lp += -std::log(2.0 * phi_bound);
  lp += half_normal_logpdf(h.sigma_plus);
  lp += half_normal_logpdf(h.sigma_minus);
  lp += half_normal_logpdf(h.delta_plus);
  lp += half_normal_logpdf(h.delta_minus);
  return lp;
}

double log_process_density(const CountryPath& path, const HyperParams& h) {
  path.validate();
  h.validate();
  const int ref = path.index(path.t_ref);
  double lp = bvn_logpdf(path.eta_plus[ref], path.eta_minus[ref],
                         h.eta_world_plus, h.eta_world_minus, h.sigma_plus,
                         h.sigma_minus, h.phi);
  for (int i = ref + 1; i < path.n_years(); ++i) {
    lp += bvn_logpdf(path.eta_plus[i], path.eta_minus[i], path.eta_plus[i - 1],
                     path.eta_minus[i - 1], h.delta_plus, h.delta_minus, h.phi);
  }
  for (int i = ref - 1; i >= 0; --i) {
    lp += bvn_logpdf(path.eta_plus[i], path.eta_minus[i], path.eta_plus[i + 1],
                     path.eta_minus[i + 1], h.delta_plus, h.delta_minus, h.phi);
  }
  // truemat ~ U(0,1): zero inside the support, -inf outside (validate threw
  // on outside values already)
  return lp;
}

CountryPath simulate_path(const HyperParams& h, int t_ref, int year_start,
                          int year_end, Rng& rng) {
  h.validate();
  if (t_ref < year_start || t_ref > year_end) {
    throw DataError("simulate_path: reference year outside span");
  }
  CountryPath path;
  path.t_ref = t_ref;
  path.year_start = year_start;
  path.year_end = year_end;
  const int n = path.n_years();
  path.eta_plus = Eigen::ArrayXd::Zero(n);
  path.eta_minus = Eigen::ArrayXd::Zero(n);

  const auto bvn_draw = [&](double m1, double m2, double s1, double s2) {
    const double n1 = rng.normal();
    const double n2 = rng.normal();
    const double x1 = m1 + s1 * n1;
    const double x2 = m2 + s2 * (h.phi * n1 + std::sqrt(1.0 - h.phi * h.phi) * n2);
    return std::pair<double, double>{x1, x2};
  };

  const int ref = t_ref - year_start;
  auto [rp, rm] = bvn_draw(h.eta_world_plus, h.eta_world_minus, h.sigma_plus,
                           h.sigma_minus);
  path.eta_plus[ref] = rp;
  path.eta_minus[ref] = rm;
  for (int i = ref + 1; i < n; ++i) {
    auto [p, m] = bvn_draw(path.eta_plus[i - 1], path.eta_minus[i - 1],
                           h.delta_plus, h.delta_minus);
    path.eta_plus[i] = p;
    path.eta_minus[i] = m;
  }
  for (int i = ref - 1; i >= 0; --i) {
    auto [p, m] = bvn_draw(path.eta_plus[i + 1], path.eta_minus[i + 1],
                           h.delta_plus, h.delta_minus);
    path.eta_plus[i] = p;
    path.eta_minus[i] = m;
  }
  return path;
}

}  // namespace crvsadj
