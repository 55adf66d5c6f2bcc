#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crvsadj/core_types.hpp"
#include "crvsadj/rng.hpp"

namespace crvsadj {

// scale bounds for the misclassification parameters
inline constexpr double se_lower = 0.1;
inline constexpr double sp_lower = 0.95;
// world-level prior bounds (specificity prior is tighter than its scale)
inline constexpr double se_world_lower = 0.1;
inline constexpr double sp_world_lower = 0.995;
inline constexpr double phi_bound = 0.95;

// Global parameters of the bivariate hierarchical random walk: world means
// on the transformed scale, hierarchy SDs at the reference year, random-walk
// innovation SDs, and the shared correlation.
struct HyperParams {
  double eta_world_plus = 0.0;
  double eta_world_minus = 0.0;
  double sigma_plus = 1.0;
  double sigma_minus = 1.0;
  double delta_plus = 1.0;
  double delta_minus = 1.0;
  double phi = 0.0;

  void validate() const;
};

// One country's annual transformed sensitivity/specificity trajectory plus
// the per-study-period true maternal probabilities.
struct CountryPath {
  std::string country;
  int t_ref = 0;
  int year_start = 0;
  int year_end = 0;
  Eigen::ArrayXd eta_plus;   // indexed year - year_start
  Eigen::ArrayXd eta_minus;
  std::vector<double> truemat;

  int n_years() const { return year_end - year_start + 1; }
  int index(int year) const;
  double se_at(int year) const;
  double sp_at(int year) const;

  void validate() const;
};

// logit-style transforms mapping (0.1,1) x (0.95,1) onto the plane
double se_to_eta(double lambda_plus);
double sp_to_eta(double lambda_minus);
double eta_to_se(double eta_plus);
double eta_to_sp(double eta_minus);
std::pair<double, double> to_transformed(double lambda_plus, double lambda_minus);
std::pair<double, double> to_natural(double eta_plus, double eta_minus);

// log density of a bivariate normal with component SDs s1, s2 and
// correlation rho
double bvn_logpdf(double x1, double x2, double m1, double m2, double s1,
                  double s2, double rho);

// Joint log prior of the global parameters: uniform world means mapped to
// the transformed scale with their Jacobians, uniform correlation, and
// half-normal(0,1) SDs. Returns -inf outside the support.
double log_prior_hyper(const HyperParams& h);

// Log density of a country path under the hierarchical model: bivariate
// normal at the reference year plus bivariate random-walk increments walking
// outward in both directions, plus uniform (0,1) mass on each truemat.
double log_process_density(const CountryPath& path, const HyperParams& h);

// Generative direction: draws the reference-year pair and walks outward.
CountryPath simulate_path(const HyperParams& h, int t_ref, int year_start,
                          int year_end, Rng& rng);

}  // namespace crvsadj
