#include "crvsadj/likelihood.hpp"

#include <algorithm>
#include <cmath>

#include "crvsadj/special.hpp"

namespace crvsadj {

namespace {

constexpr double kSeConstraintBound = 0.1;
constexpr double kSpConstraintBound = 0.97;
constexpr double kQuantLo = 0.025;
constexpr double kQuantHi = 0.975;

// log of one four-cell multinomial term given counts (T+, F-, T-, F+)
double four_cell_term(std::int64_t tp, std::int64_t fm, std::int64_t tm,
                      std::int64_t fp, const GammaFour& g,
                      double log_fact_total) {
  const std::int64_t counts[4] = {tp, fm, tm, fp};
  const double probs[4] = {g.g_tplus, g.g_fminus, g.g_tminus, g.g_fplus};
  double lp = log_fact_total;
  for (int k = 0; k < 4; ++k) {
    if (counts[k] == 0) continue;
    if (probs[k] <= 0.0) return neg_inf;
    lp += static_cast<double>(counts[k]) * std::log(probs[k]) - log_factorial(counts[k]);
  }
  return lp;
}

}  // namespace

void GammaFour::validate() const {
  const double cells[4] = {g_tplus, g_fminus, g_tminus, g_fplus};
  double sum = 0.0;
  for (double c : cells) {
    if (c < 0.0 || c > 1.0) throw DataError("GammaFour: component outside [0,1]");
    sum += c;
  }
  if (std::fabs(sum - 1.0) > 1e-12) {
    throw DataError("GammaFour: components do not sum to 1");
  }
}

GammaFour gamma_from_params(double se, double sp, double truemat) {
  if (!(se >= 0.1 && se <= 1.0)) {
    throw DataError("gamma_from_params: sensitivity outside [0.1,1]");
  }
  if (!(sp >= 0.95 && sp <= 1.0)) {
    throw DataError("gamma_from_params: specificity outside [0.95,1]");
  }
  if (!(truemat > 0.0 && truemat < 1.0)) {
    throw DataError("gamma_from_params: truemat outside (0,1)");
  }
  GammaFour g;
  g.g_tplus = se * truemat;
  g.g_fminus = truemat - g.g_tplus;
  g.g_tminus = sp * (1.0 - truemat);
  g.g_fplus = (1.0 - truemat) - g.g_tminus;
  return g;
}

GammaFour crvs_conditional(const ProbVector6& rho) {
  const double mass = rho.crvs_mass();
  if (mass <= 0.0) throw DataError("crvs_conditional: zero CRVS mass");
  GammaFour g;
  g.g_tplus = rho.t_plus / mass;
  g.g_fminus = rho.f_minus / mass;
  g.g_tminus = rho.t_minus / mass;
  g.g_fplus = rho.f_plus / mass;
  return g;
}

double multinomial_logpdf(std::span<const std::int64_t> counts,
                          std::span<const double> probs) {
  if (counts.size() != probs.size()) {
    throw DataError("multinomial_logpdf: length mismatch");
  }
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw DataError("multinomial_logpdf: negative count");
    total += c;
  }
  double lp = log_factorial(total);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    if (probs[k] <= 0.0) return neg_inf;
    lp += static_cast<double>(counts[k]) * std::log(probs[k]) -
          log_factorial(counts[k]);
  }
  return lp;
}

std::int64_t binomial_quantile(std::int64_t n, double p, double q) {
  if (n < 0) throw DataError("binomial_quantile: negative n");
  if (!(q > 0.0 && q < 1.0)) throw DataError("binomial_quantile: q outside (0,1)");
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::int64_t lo = 0, hi = n;
  if (binomial_cdf(0, n, p) >= q) return 0;
  // smallest k with CDF(k) >= q; CDF is nondecreasing in k
  while (lo + 1 < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (binomial_cdf(mid, n, p) >= q) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double loglik_breakdown(const StudyObservation& obs, const GammaFour& gamma) {
  return StudyLikelihood(obs, false)(gamma);
}

double loglik_truemat_overlap(std::int64_t z_crvs, std::int64_t z_matcrvs,
                              std::int64_t z_truemat_crvs, const GammaFour& gamma,
                              bool apply_constraints) {
  StudyObservation obs;
  obs.kind = StudyKind::TruematCrvsOnly;
  obs.z_crvs = z_crvs;
  obs.z_matcrvs = z_matcrvs;
  obs.z_truemat_crvs = z_truemat_crvs;
  return StudyLikelihood(obs, apply_constraints)(gamma);
}

double loglik_truemat_incomplete(std::int64_t z_crvs, std::int64_t z_unreg,
                                 std::int64_t z_matcrvs, std::int64_t z_truemat,
                                 const GammaFour& gamma, bool apply_constraints) {
  StudyObservation obs;
  obs.kind = StudyKind::TruematAndUplus;
  obs.z_crvs = z_crvs;
  obs.z_matcrvs = z_matcrvs;
  obs.z_truemat = z_truemat;
  obs.z_unreg = z_unreg;
  return StudyLikelihood(obs, apply_constraints)(gamma);
}

double study_loglik(const StudyObservation& obs, const GammaFour& gamma,
                    bool apply_constraints) {
  return StudyLikelihood(obs, apply_constraints)(gamma);
}

StudyLikelihood::StudyLikelihood(const StudyObservation& obs, bool apply_constraints)
    : obs_(obs) {
  obs_.validate();
  const std::int64_t z = obs_.z_crvs;
  const std::int64_t zm = obs_.z_matcrvs;
  log_fact_z_ = log_factorial(z);

  switch (obs_.kind) {
    case StudyKind::FminusFplus:
    case StudyKind::FminusFplusUplus: {
      mode_ = Mode::Breakdown;
      full_cells_ = true;
      cells_[0] = zm - *obs_.z_fplus;               // T+
      cells_[1] = *obs_.z_fminus;                   // F-
      cells_[2] = z - zm - *obs_.z_fminus;          // T-
      cells_[3] = *obs_.z_fplus;                    // F+
      break;
    }
    case StudyKind::FminusOnly:
    case StudyKind::FminusUplus: {
      mode_ = Mode::Breakdown;
      full_cells_ = false;
      cells_[1] = *obs_.z_fminus;
      break;
    }
    case StudyKind::TruematCrvsOnly: {
      mode_ = Mode::Overlap;
      const std::int64_t ztc = *obs_.z_truemat_crvs;
      tp_lo_ = std::max<std::int64_t>(0, zm + ztc - z);
      tp_hi_ = std::min(zm, ztc);
      if (apply_constraints) {
        // T+ >= Bin_2.5%(ztc, 0.1) and T- >= Bin_2.5%(z - ztc, 0.97);
        // T- = z - zm - ztc + T+ turns the latter into a T+ lower bound
        const std::int64_t tp_min = binomial_quantile(ztc, kSeConstraintBound, kQuantLo);
        const std::int64_t tm_min =
            binomial_quantile(z - ztc, kSpConstraintBound, kQuantLo);
        tp_lo_ = std::max(tp_lo_, tp_min);
        tp_lo_ = std::max(tp_lo_, tm_min - (z - zm - ztc));
      }
      break;
    }
    case StudyKind::TruematAndUplus: {
      mode_ = Mode::Incomplete;
      const std::int64_t zt = *obs_.z_truemat;
      const std::int64_t zu = *obs_.z_unreg;
      for (std::int64_t u = 0; u <= std::min(zu, zt); ++u) {
        const std::int64_t ztc = zt - u;  // candidate true maternal within CRVS
        if (ztc > z) continue;
        UplusTerm term;
        term.u_plus = u;
        term.ztc = ztc;
        term.tp_lo = std::max<std::int64_t>(0, zm + ztc - z);
        term.tp_hi = std::min(zm, ztc);
        if (apply_constraints) {
          const std::int64_t tp_min =
              binomial_quantile(ztc, kSeConstraintBound, kQuantLo);
          const std::int64_t tm_min =
              binomial_quantile(z - ztc, kSpConstraintBound, kQuantLo);
          term.tp_lo = std::max(term.tp_lo, tp_min);
          term.tp_lo = std::max(term.tp_lo, tm_min - (z - zm - ztc));
          // kappa band: U+ within the central 95% of Bin(z_unreg, r/2..2r)
          const double r = z > 0 ? static_cast<double>(ztc) / static_cast<double>(z) : 0.0;
          const std::int64_t u_lo =
              binomial_quantile(zu, std::min(1.0, 0.5 * r), kQuantLo);
          const std::int64_t u_hi =
              binomial_quantile(zu, std::min(1.0, 2.0 * r), kQuantHi);
          if (u < u_lo || u > u_hi) continue;
        }
        if (term.tp_lo > term.tp_hi) continue;
        u_terms_.push_back(term);
      }
      break;
    }
  }
}

double StudyLikelihood::operator()(const GammaFour& gamma) const {
  switch (mode_) {
    case Mode::Breakdown: return eval_breakdown(gamma);
    case Mode::Overlap: return eval_overlap(gamma);
    case Mode::Incomplete: return eval_incomplete(gamma);
  }
  return neg_inf;
}

double StudyLikelihood::eval_breakdown(const GammaFour& gamma) const {
  if (full_cells_) {
    return four_cell_term(cells_[0], cells_[1], cells_[2], cells_[3], gamma,
                          log_factorial(obs_.z_crvs));
  }
  // F- against everything else, by multinomial collapsibility
  return binomial_logpdf(cells_[1], obs_.z_crvs, gamma.g_fminus);
}

namespace {

// Sums multinomial terms over T+ in [lo, hi] with F- = ztc - T+,
// F+ = zm - T+, T- = (z - zm - ztc) + T+. When every cell probability is
// positive, consecutive terms differ by one log-ratio, so each term costs
// O(1) instead of four lgamma calls.
void accumulate_tplus_run(LogSumExp& acc, std::int64_t z, std::int64_t zm,
                          std::int64_t ztc, std::int64_t lo, std::int64_t hi,
                          const GammaFour& g, double log_fact_total) {
  if (lo > hi) return;
  const std::int64_t rest = z - zm - ztc;
  double lt = four_cell_term(lo, ztc - lo, rest + lo, zm - lo, g, log_fact_total);
  acc.add(lt);
  if (lo == hi) return;
  if (g.g_tplus > 0.0 && g.g_fminus > 0.0 && g.g_tminus > 0.0 && g.g_fplus > 0.0) {
    const double log_prob_ratio = std::log(g.g_tplus) + std::log(g.g_tminus) -
                                  std::log(g.g_fminus) - std::log(g.g_fplus);
    for (std::int64_t t = lo; t < hi; ++t) {
      const double count_ratio =
          static_cast<double>(ztc - t) * static_cast<double>(zm - t) /
          (static_cast<double>(t + 1) * static_cast<double>(rest + t + 1));
      lt += log_prob_ratio + std::log(count_ratio);
      acc.add(lt);
    }
    return;
  }
  for (std::int64_t t = lo + 1; t <= hi; ++t) {
    acc.add(four_cell_term(t, ztc - t, rest + t, zm - t, g, log_fact_total));
  }
}

}  // namespace

double StudyLikelihood::eval_overlap(const GammaFour& gamma) const {
  const std::int64_t z = obs_.z_crvs;
  const std::int64_t zm = obs_.z_matcrvs;
  const std::int64_t ztc = *obs_.z_truemat_crvs;
  LogSumExp acc;
  accumulate_tplus_run(acc, z, zm, ztc, tp_lo_, tp_hi_, gamma, log_fact_z_);
  return acc.value();
}

double StudyLikelihood::eval_incomplete(const GammaFour& gamma) const {
  const std::int64_t z = obs_.z_crvs;
  const std::int64_t zm = obs_.z_matcrvs;
  LogSumExp acc;
  for (const auto& term : u_terms_) {
    accumulate_tplus_run(acc, z, zm, term.ztc, term.tp_lo, term.tp_hi, gamma,
                         log_fact_z_);
  }
  return acc.value();
}

}  // namespace crvsadj
