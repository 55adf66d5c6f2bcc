#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crvsadj/mcmc.hpp"

namespace crvsadj {

// Misclassification summaries consumed by the downstream mortality model:
// point estimates (posterior medians), natural-scale (co)variances, and the
// squared terms entering the overdispersion formulas.
struct MisclassPoint {
  double lambda_plus = 0.0;
  double lambda_minus = 1.0;
  double v_plus = 0.0;
  double v_minus = 0.0;
  double u = 0.0;        // covariance of sensitivity and specificity
  double e_plus = 0.0;   // mean squared sensitivity
  double e_minus = 0.0;  // mean squared (1 - specificity)

  void validate() const;
};

struct MisclassSummary {
  std::string country;
  struct Row {
    int year = 0;
    MisclassPoint point;
    bool data_informed = false;
    // 80% intervals of the draw cloud behind this year's uncertainty
    double se_q10 = 0.0, se_q90 = 0.0;
    double sp_q10 = 0.0, sp_q90 = 0.0;
  };
  std::vector<Row> rows;

  const MisclassPoint& at(int year) const;
};

// True-PM-dependent multiplier correcting a reported CRVS proportion
// maternal for misclassification: p / (se*p + (1-sp)*(1-p)).
double adjustment_factor(double se, double sp, double p_truemat);

// Per-parameter posterior medians of the global fit.
HyperParams hyper_point_estimates(const PosteriorSamples& global_fit);

// Refits one country's data with the global parameters frozen at their
// posterior medians; all study kinds participate, including the
// incomplete-CRVS ones.
PosteriorSamples fit_one_country(const Dataset& country_data,
                                 const PosteriorSamples& global_fit,
                                 const McmcConfig& config);

// Per-draw (sensitivity, specificity) samples for a country-year; years
// outside the sampled span are extended with random-walk steps drawn from
// each draw's own innovation parameters. Deterministic given seed.
std::vector<std::pair<double, double>> se_sp_samples_at(
    const PosteriorSamples& samples, int country, int year, std::uint64_t seed);

// Predictive (sensitivity, specificity) pairs for a country without studies:
// a fresh reference-year draw per posterior draw, walked `lag` steps.
std::vector<std::pair<double, double>> hierarchy_predictive(
    const PosteriorSamples& global_fit, int lag, std::uint64_t seed);

// Misclassification summary for countries without specialized studies:
// point estimates at the global medians, uncertainty from the hierarchy
// predictive at the given lag; constant across years.
MisclassPoint predict_no_study(const PosteriorSamples& global_fit, int lag = 0);

// Extends a one-country fit across [year_start, year_end]: data-informed
// years keep their sampled summaries untouched; extrapolated years keep the
// boundary point estimates (backward ones converge to the global value over
// five years on the transformed scale) and carry random-walk variances
// capped at the no-study level.
MisclassSummary postprocess_country(const PosteriorSamples& samples,
                                    const MisclassPoint& global_nostudy,
                                    int year_start, int year_end,
                                    const std::string& country = "");

struct LagCoverage {
  int lag = 0;
  double prop_below = 0.0;
  double prop_above = 0.0;
};

// Out-of-sample check of the hierarchy predictive at several time lags:
// predicts every usable observation's CRVS-based PM from lag-l draws and
// reports country-averaged proportions outside the 80% interval.
std::vector<LagCoverage> lag_validation(const PosteriorSamples& global_fit,
                                        const Dataset& dataset,
                                        std::span<const int> lags);

}  // namespace crvsadj
