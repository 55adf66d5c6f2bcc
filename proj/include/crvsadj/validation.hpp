#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crvsadj/core_types.hpp"
#include "crvsadj/mcmc.hpp"

namespace crvsadj {

enum class ValidationScheme { Random20, LeaveLast };

const char* to_string(ValidationScheme scheme);
ValidationScheme scheme_from_string(const std::string& name);

struct ValidationReport {
  ValidationScheme scheme = ValidationScheme::Random20;
  int n_leftout = 0;
  double me = 0.0;        // median error in CRVS-based PM
  double mae = 0.0;       // median absolute error
  double mre_pct = 0.0;   // median relative error, percent
  double mare_pct = 0.0;  // median absolute relative error, percent
  double prop_below_80 = 0.0;
  double prop_above_80 = 0.0;
  int n_failed_reps = 0;
};

// `reps` independent random train/test splits holding out a fraction of the
// observations; CRVS records stay with both sides.
std::vector<std::pair<Dataset, Dataset>> split_random(const Dataset& dataset,
                                                      double frac, int reps,
                                                      std::uint64_t seed);

// Holds out the observation with the latest midpoint per country (ties
// broken by later t2, then input order).
std::pair<Dataset, Dataset> split_leave_last(const Dataset& dataset);

// Expected CRVS-reported maternal count given one (se, sp) draw:
// z_truemat_crvs * se + (z_crvs - z_truemat_crvs) * (1 - sp).
double predict_matcrvs(double se, double sp, std::int64_t z_truemat_crvs,
                       std::int64_t z_crvs);

// Full out-of-sample exercise: refits each training set, predicts the
// left-out CRVS-based PMs, and pools error and coverage metrics over the
// left-out observations.
ValidationReport run_validation(const Dataset& dataset, ValidationScheme scheme,
                                const McmcConfig& fit_config);

}  // namespace crvsadj
