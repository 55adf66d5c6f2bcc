#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crvsadj/core_types.hpp"

namespace crvsadj {

// CRVS-conditional cell probabilities (gamma); sum to one.
struct GammaFour {
  double g_tplus = 0.0;
  double g_fminus = 0.0;
  double g_tminus = 0.0;
  double g_fplus = 0.0;

  double truemat_crvs() const { return g_tplus + g_fminus; }
  double mat_crvs() const { return g_tplus + g_fplus; }
  double sensitivity() const { return g_tplus / (g_tplus + g_fminus); }
  double specificity() const { return g_tminus / (g_tminus + g_fplus); }

  void validate() const;
};

// Builds the four CRVS cell probabilities from sensitivity, specificity and
// the true CRVS maternal probability.
GammaFour gamma_from_params(double se, double sp, double truemat);

// Conditions a six-box probability vector on registration.
GammaFour crvs_conditional(const ProbVector6& rho);

// Exact multinomial log density. Cells with probability zero contribute
// nothing when their count is zero and give -inf otherwise.
double multinomial_logpdf(std::span<const std::int64_t> counts,
                          std::span<const double> probs);

// Smallest k with P(X <= k) >= q for X ~ Bin(n, p).
std::int64_t binomial_quantile(std::int64_t n, double p, double q);

// Log likelihood for studies reporting non-overlapping categories
// (the F-/F+ kinds of Table-style breakdowns). With both F- and F+ reported,
// z_matcrvs pins T+ and the full four-cell density applies; with F- alone the
// remaining cells are lumped into a single residual cell.
double loglik_breakdown(const StudyObservation& obs, const GammaFour& gamma);

// Exact marginal log likelihood for a study reporting the true maternal
// count within the CRVS, which overlaps the CRVS-reported maternal count.
// Sums the four-cell multinomial density over every T+ consistent with the
// two observed margins; apply_constraints adds the percentile truncation
// bounds (sensitivity >= 0.1, specificity >= 0.97).
double loglik_truemat_overlap(std::int64_t z_crvs, std::int64_t z_matcrvs,
                              std::int64_t z_truemat_crvs, const GammaFour& gamma,
                              bool apply_constraints);

// Exact marginal log likelihood for a study reporting the true maternal
// count inclusive of unregistered maternal deaths; double sum over (U+, T+)
// with the U+ range bounded by the kappa-ratio percentile band when
// apply_constraints is set.
double loglik_truemat_incomplete(std::int64_t z_crvs, std::int64_t z_unreg,
                                 std::int64_t z_matcrvs, std::int64_t z_truemat,
                                 const GammaFour& gamma, bool apply_constraints);

// Dispatches an observation to its kind's likelihood.
double study_loglik(const StudyObservation& obs, const GammaFour& gamma,
                    bool apply_constraints);

// Precomputed per-observation evaluator: summation ranges and constraint
// bounds depend only on observed counts, so they are cached once and reused
// across MCMC iterations.
class StudyLikelihood {
 public:
  StudyLikelihood(const StudyObservation& obs, bool apply_constraints);

  double operator()(const GammaFour& gamma) const;

  const StudyObservation& observation() const { return obs_; }

 private:
  enum class Mode { Breakdown, Overlap, Incomplete };

  double eval_breakdown(const GammaFour& gamma) const;
  double eval_overlap(const GammaFour& gamma) const;
  double eval_incomplete(const GammaFour& gamma) const;

  StudyObservation obs_;
  Mode mode_ = Mode::Overlap;
  double log_fact_z_ = 0.0;

  // overlap: admissible T+ range after margin and constraint bounds
  std::int64_t tp_lo_ = 0;
  std::int64_t tp_hi_ = -1;

  // incomplete: admissible U+ values with their T+ ranges
  struct UplusTerm {
    std::int64_t u_plus;
    std::int64_t ztc;  // candidate true maternal count within CRVS
    std::int64_t tp_lo;
    std::int64_t tp_hi;
  };
  std::vector<UplusTerm> u_terms_;

  // breakdown: fixed cell counts (T+, F-, T-, F+); residual lumping handled
  // at evaluation time
  std::int64_t cells_[4] = {0, 0, 0, 0};
  bool full_cells_ = false;
};

}  // namespace crvsadj
