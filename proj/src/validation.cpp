#include "crvsadj/validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "crvsadj/postprocess.hpp"
#include "crvsadj/rng.hpp"
#include "crvsadj/stats.hpp"

namespace crvsadj {

const char* to_string(ValidationScheme scheme) {
  switch (scheme) {
    case ValidationScheme::Random20: return "RANDOM20";
    case ValidationScheme::LeaveLast: return "LEAVE_LAST";
  }
  return "UNKNOWN";
}

ValidationScheme scheme_from_string(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower == "random20" || name == "RANDOM20") return ValidationScheme::Random20;
  if (lower == "leavelast" || lower == "leave_last" || name == "LEAVE_LAST") {
    return ValidationScheme::LeaveLast;
  }
  throw DataError("unknown validation scheme: " + name);
}

std::vector<std::pair<Dataset, Dataset>> split_random(const Dataset& dataset,
                                                      double frac, int reps,
                                                      std::uint64_t seed) {
  if (dataset.studies.size() < 5) {
    throw DataError("split_random: need at least 5 observations");
  }
  if (!(frac > 0.0 && frac < 1.0)) throw DataError("split_random: bad fraction");
  const auto n = dataset.studies.size();
  const auto n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n))));

  std::vector<std::pair<Dataset, Dataset>> out;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(rep)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates with our deterministic stream
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    Dataset train, test;
    train.crvs = dataset.crvs;
    test.crvs = dataset.crvs;
    std::vector<bool> in_test(n, false);
    for (std::size_t k = 0; k < n_test; ++k) in_test[order[k]] = true;
    for (std::size_t i = 0; i < n; ++i) {
      (in_test[i] ? test : train).studies.push_back(dataset.studies[i]);
    }
    out.emplace_back(std::move(train), std::move(test));
  }
  return out;
}

std::pair<Dataset, Dataset> split_leave_last(const Dataset& dataset) {
  if (dataset.studies.empty()) throw DataError("split_leave_last: no observations");
  // latest midpoint per country; ties by latest t2, then input order
  std::map<std::string, std::size_t> chosen;
  for (std::size_t i = 0; i < dataset.studies.size(); ++i) {
    const auto& s = dataset.studies[i];
    auto it = chosen.find(s.country);
    if (it == chosen.end()) {
      chosen[s.country] = i;
      continue;
    }
    const auto& cur = dataset.studies[it->second];
    if (s.midpoint_year() > cur.midpoint_year() ||
        (s.midpoint_year() == cur.midpoint_year() && s.t2 > cur.t2)) {
      it->second = i;
    }
  }
  Dataset train, test;
  train.crvs = dataset.crvs;
  test.crvs = dataset.crvs;
  std::vector<bool> in_test(dataset.studies.size(), false);
  for (const auto& [country, idx] : chosen) in_test[idx] = true;
  for (std::size_t i = 0; i < dataset.studies.size(); ++i) {
    (in_test[i] ? test : train).studies.push_back(dataset.studies[i]);
  }
  return {train, test};
}

double predict_matcrvs(double se, double sp, std::int64_t z_truemat_crvs,
                       std::int64_t z_crvs) {
  return static_cast<double>(z_truemat_crvs) * se +
         static_cast<double>(z_crvs - z_truemat_crvs) * (1.0 - sp);
}

namespace {

struct ObsOutcome {
  double error_median = 0.0;
  double observed_pm = 0.0;
  bool below = false;
  bool above = false;
};

// Box-style outcome for one left-out observation against one training fit.
ObsOutcome evaluate_observation(const PosteriorSamples& fit,
                                const StudyObservation& obs, std::int64_t ztc,
                                std::uint64_t stream) {
  const int country = fit.layout.country_index(obs.country);
  const int year = obs.midpoint_year();
  std::vector<std::pair<double, double>> pairs;
  if (country >= 0) {
    pairs = se_sp_samples_at(fit, country, year, stream);
  } else {
    // country absent from the training fit: hierarchy predictive at lag 0
    pairs = hierarchy_predictive(fit, 0, stream);
  }
  const double observed =
      static_cast<double>(obs.z_matcrvs) / static_cast<double>(obs.z_crvs);
  std::vector<double> errors(pairs.size());
  std::vector<double> pm_pred(pairs.size());
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const double pred = predict_matcrvs(pairs[s].first, pairs[s].second, ztc,
                                        obs.z_crvs);
    pm_pred[s] = pred / static_cast<double>(obs.z_crvs);
    errors[s] =
        (static_cast<double>(obs.z_matcrvs) - pred) / static_cast<double>(obs.z_crvs);
  }
  ObsOutcome out;
  out.error_median = median(std::move(errors));
  out.observed_pm = observed;
  out.below = observed < quantile(pm_pred, 0.10);
  out.above = observed > quantile(pm_pred, 0.90);
  return out;
}

}  // namespace

ValidationReport run_validation(const Dataset& dataset, ValidationScheme scheme,
                                const McmcConfig& fit_config) {
  std::vector<std::pair<Dataset, Dataset>> splits;
  if (scheme == ValidationScheme::Random20) {
    splits = split_random(dataset, 0.2, 20, Rng::mix(fit_config.seed, 0x20));
  } else {
    splits.push_back(split_leave_last(dataset));
  }

  ValidationReport report;
  report.scheme = scheme;

  std::vector<ObsOutcome> outcomes;
  for (std::size_t rep = 0; rep < splits.size(); ++rep) {
    const auto& [train, test] = splits[rep];
    McmcConfig cfg = fit_config;
    cfg.seed = Rng::mix(fit_config.seed, 0xf17 + rep);
    PosteriorSamples fit;
    try {
      fit = fit_global(train, cfg);
    } catch (const NumericalError&) {
      ++report.n_failed_reps;
      continue;
    }
    for (std::size_t k = 0; k < test.studies.size(); ++k) {
      const auto& obs = test.studies[k];
      const auto ztc = obs.truemat_crvs_implied();
      if (!ztc || obs.z_crvs <= 0) continue;
      outcomes.push_back(
          evaluate_observation(fit, obs, *ztc, Rng::mix(cfg.seed, 0x0b5 + k)));
    }
  }

  report.n_leftout = static_cast<int>(outcomes.size());
  if (outcomes.empty()) return report;

  std::vector<double> errors, abs_errors, rel, abs_rel;
  double below = 0.0, above = 0.0;
  for (const auto& o : outcomes) {
    errors.push_back(o.error_median);
    abs_errors.push_back(std::fabs(o.error_median));
    if (o.observed_pm > 0.0) {
      rel.push_back(100.0 * o.error_median / o.observed_pm);
      abs_rel.push_back(100.0 * std::fabs(o.error_median) / o.observed_pm);
    }
    below += o.below ? 1.0 : 0.0;
    above += o.above ? 1.0 : 0.0;
  }
  report.me = median(errors);
  report.mae = median(abs_errors);
  if (!rel.empty()) {
    report.mre_pct = median(rel);
    report.mare_pct = median(abs_rel);
  }
  report.prop_below_80 = below / static_cast<double>(outcomes.size());
  report.prop_above_80 = above / static_cast<double>(outcomes.size());
  return report;
}

}  // namespace crvsadj
