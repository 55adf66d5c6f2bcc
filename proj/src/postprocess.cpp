#include "crvsadj/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crvsadj/special.hpp"
#include "crvsadj/stats.hpp"
#include "crvsadj/validation.hpp"

namespace crvsadj {

namespace {

// summary of a cloud of (se, sp) draws; population moments so that
// e = v + mean^2 holds exactly
MisclassPoint summarize_pairs(const std::vector<std::pair<double, double>>& pairs,
                              double lambda_plus_point, double lambda_minus_point) {
  std::vector<double> se(pairs.size()), sp(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    se[i] = pairs[i].first;
    sp[i] = pairs[i].second;
  }
  MisclassPoint p;
  p.lambda_plus = lambda_plus_point;
  p.lambda_minus = lambda_minus_point;
  p.v_plus = variance(se);
  p.v_minus = variance(sp);
  p.u = covariance(se, sp);
  const double mean_se = mean(se);
  const double mean_sp = mean(sp);
  p.e_plus = p.v_plus + mean_se * mean_se;
  p.e_minus = p.v_minus + (1.0 - mean_sp) * (1.0 - mean_sp);
  return p;
}

std::pair<double, double> bvn_step(Rng& rng, double s1, double s2, double phi) {
  const double n1 = rng.normal();
  const double n2 = rng.normal();
  return {s1 * n1, s2 * (phi * n1 + std::sqrt(1.0 - phi * phi) * n2)};
}

}  // namespace

void MisclassPoint::validate() const {
  if (v_plus < 0.0 || v_minus < 0.0) {
    throw DataError("MisclassPoint: negative variance");
  }
  if (u * u > v_plus * v_minus * (1.0 + 1e-9) + 1e-300) {
    throw DataError("MisclassPoint: covariance inconsistent with variances");
  }
}

const MisclassPoint& MisclassSummary::at(int year) const {
  for (const auto& row : rows) {
    if (row.year == year) return row.point;
  }
  throw DataError(country + ": no summary for year " + std::to_string(year));
}

double adjustment_factor(double se, double sp, double p_truemat) {
  if (!(se > 0.0 && se <= 1.0)) throw DataError("adjustment_factor: bad sensitivity");
  if (!(sp >= 0.0 && sp <= 1.0)) throw DataError("adjustment_factor: bad specificity");
  if (!(p_truemat > 0.0 && p_truemat < 1.0)) {
    throw DataError("adjustment_factor: true PM outside (0,1)");
  }
  if (sp == 1.0) return 1.0 / se;  // exact limit
  const double denom = se * p_truemat + (1.0 - sp) * (1.0 - p_truemat);
  if (denom <= 0.0) throw DataError("adjustment_factor: zero denominator");
  return p_truemat / denom;
}

HyperParams hyper_point_estimates(const PosteriorSamples& global_fit) {
  if (!global_fit.layout.has_hyper) {
    throw DataError("hyper_point_estimates: fit has no sampled hyperparameters");
  }
  const auto col_median = [&](int k) {
    const Eigen::VectorXd v = global_fit.pooled(k);
    return median(std::vector<double>(v.data(), v.data() + v.size()));
  };
  HyperParams h;
  h.eta_world_plus = col_median(0);
  h.eta_world_minus = col_median(1);
  h.sigma_plus = std::exp(col_median(2));
  h.sigma_minus = std::exp(col_median(3));
  h.delta_plus = std::exp(col_median(4));
  h.delta_minus = std::exp(col_median(5));
  h.phi = col_median(6);
  return h;
}

PosteriorSamples fit_one_country(const Dataset& country_data,
                                 const PosteriorSamples& global_fit,
                                 const McmcConfig& config) {
  if (country_data.studies.empty()) {
    throw DataError("fit_one_country: country has no studies; use predict_no_study");
  }
  return fit_fixed_hyper(country_data, hyper_point_estimates(global_fit), config);
}

std::vector<std::pair<double, double>> se_sp_samples_at(
    const PosteriorSamples& samples, int country, int year, std::uint64_t seed) {
  const auto& cl = samples.layout.countries.at(country);
  std::vector<std::pair<double, double>> out;
  out.reserve(samples.total_draws());
  if (year >= cl.year_start && year <= cl.year_end) {
    for (int c = 0; c < samples.n_chains(); ++c) {
      for (long i = 0; i < samples.n_kept(); ++i) {
        out.push_back(samples.se_sp_draw(c, i, country, year));
      }
    }
    return out;
  }
  const int edge = year > cl.year_end ? cl.year_end : cl.year_start;
  const int lag = std::abs(year - edge);
  Rng rng(Rng::mix(seed, 0x5e5e + static_cast<std::uint64_t>(year)));
  for (int c = 0; c < samples.n_chains(); ++c) {
    for (long i = 0; i < samples.n_kept(); ++i) {
      const HyperParams h = samples.hyper_draw(c, i);
      const CountryPath path = samples.path_draw(c, i, country);
      const int idx = edge - cl.year_start;
      double ep = path.eta_plus[idx];
      double em = path.eta_minus[idx];
      for (int l = 0; l < lag; ++l) {
        auto [dp, dm] = bvn_step(rng, h.delta_plus, h.delta_minus, h.phi);
        ep += dp;
        em += dm;
      }
      out.emplace_back(eta_to_se(ep), eta_to_sp(em));
    }
  }
  return out;
}

std::vector<std::pair<double, double>> hierarchy_predictive(
    const PosteriorSamples& global_fit, int lag, std::uint64_t seed) {
  if (!global_fit.layout.has_hyper) {
    throw DataError("hierarchy_predictive: fit has no sampled hyperparameters");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(global_fit.total_draws());
  std::uint64_t draw_id = 0;
  for (int c = 0; c < global_fit.n_chains(); ++c) {
    for (long i = 0; i < global_fit.n_kept(); ++i, ++draw_id) {
      const HyperParams h = global_fit.hyper_draw(c, i);
      // common random numbers: the stream per draw does not depend on lag,
      // so larger lags nest the smaller ones
      Rng rng(Rng::mix(seed, draw_id));
      auto [rp, rm] = bvn_step(rng, h.sigma_plus, h.sigma_minus, h.phi);
      double ep = h.eta_world_plus + rp;
      double em = h.eta_world_minus + rm;
      for (int l = 0; l < lag; ++l) {
        auto [dp, dm] = bvn_step(rng, h.delta_plus, h.delta_minus, h.phi);
        ep += dp;
        em += dm;
      }
      out.emplace_back(eta_to_se(ep), eta_to_sp(em));
    }
  }
  return out;
}

MisclassPoint predict_no_study(const PosteriorSamples& global_fit, int lag) {
  const auto pairs =
      hierarchy_predictive(global_fit, lag, Rng::mix(global_fit.config.seed, 0x9d));
  // point estimates are the global posterior medians, lag-invariant
  std::vector<double> se_world, sp_world;
  se_world.reserve(global_fit.total_draws());
  sp_world.reserve(global_fit.total_draws());
  for (int c = 0; c < global_fit.n_chains(); ++c) {
    for (long i = 0; i < global_fit.n_kept(); ++i) {
      const HyperParams h = global_fit.hyper_draw(c, i);
      se_world.push_back(eta_to_se(h.eta_world_plus));
      sp_world.push_back(eta_to_sp(h.eta_world_minus));
    }
  }
  return summarize_pairs(pairs, median(std::move(se_world)),
                         median(std::move(sp_world)));
}

MisclassSummary postprocess_country(const PosteriorSamples& samples,
                                    const MisclassPoint& global_nostudy,
                                    int year_start, int year_end,
                                    const std::string& country) {
  if (year_start > year_end) throw DataError("postprocess_country: bad horizon");
  int c = 0;
  if (!country.empty()) {
    c = samples.layout.country_index(country);
    if (c < 0) throw DataError("postprocess_country: unknown country " + country);
  } else if (samples.layout.countries.size() != 1) {
    throw DataError("postprocess_country: country must be named for multi-country fits");
  }
  const auto& cl = samples.layout.countries[c];

  MisclassSummary summary;
  summary.country = cl.country;

  // per-draw natural pairs per sampled year
  const long total = samples.total_draws();
  std::map<int, std::vector<std::pair<double, double>>> in_span;
  for (int year = cl.year_start; year <= cl.year_end; ++year) {
    auto& v = in_span[year];
    v.reserve(total);
  }
  std::vector<std::pair<double, double>> eta_lo(total), eta_hi(total);
  std::vector<HyperParams> hyper(total);
  {
    long s = 0;
    for (int chain = 0; chain < samples.n_chains(); ++chain) {
      for (long i = 0; i < samples.n_kept(); ++i, ++s) {
        const CountryPath path = samples.path_draw(chain, i, c);
        for (int year = cl.year_start; year <= cl.year_end; ++year) {
          const int k = year - cl.year_start;
          in_span[year].emplace_back(eta_to_se(path.eta_plus[k]),
                                     eta_to_sp(path.eta_minus[k]));
        }
        eta_lo[s] = {path.eta_plus[0], path.eta_minus[0]};
        eta_hi[s] = {path.eta_plus[cl.n_years() - 1],
                     path.eta_minus[cl.n_years() - 1]};
        hyper[s] = samples.hyper_draw(chain, i);
      }
    }
  }

  const auto point_of = [](const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> se(pairs.size()), sp(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      se[i] = pairs[i].first;
      sp[i] = pairs[i].second;
    }
    return std::pair<double, double>{median(std::move(se)), median(std::move(sp))};
  };
  const auto fill_intervals = [](MisclassSummary::Row& row,
                                 const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> se(pairs.size()), sp(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      se[i] = pairs[i].first;
      sp[i] = pairs[i].second;
    }
    row.se_q10 = quantile(se, 0.10);
    row.se_q90 = quantile(se, 0.90);
    row.sp_q10 = quantile(sp, 0.10);
    row.sp_q90 = quantile(sp, 0.90);
  };

  std::map<int, MisclassSummary::Row> rows;
  for (int year = std::max(year_start, cl.year_start);
       year <= std::min(year_end, cl.year_end); ++year) {
    auto [mse, msp] = point_of(in_span[year]);
    MisclassSummary::Row row;
    row.year = year;
    row.point = summarize_pairs(in_span[year], mse, msp);
    row.data_informed = true;
    fill_intervals(row, in_span[year]);
    rows[year] = row;
  }

  const auto cap_variances = [&](MisclassPoint& p) {
    p.v_plus = std::min(p.v_plus, global_nostudy.v_plus);
    p.v_minus = std::min(p.v_minus, global_nostudy.v_minus);
    const double bound = std::sqrt(p.v_plus * p.v_minus);
    p.u = std::clamp(p.u, -bound, bound);
  };

  // forward extrapolation: constant point estimates, growing variances
  if (year_end > cl.year_end) {
    auto [se_last, sp_last] = point_of(in_span[cl.year_end]);
    Rng rng(Rng::mix(samples.config.seed, 0xf0f0));
    std::vector<std::pair<double, double>> ext = eta_hi;
    for (int year = cl.year_end + 1; year <= year_end; ++year) {
      std::vector<std::pair<double, double>> nat(total);
      for (long s = 0; s < total; ++s) {
        auto [dp, dm] = bvn_step(rng, hyper[s].delta_plus, hyper[s].delta_minus,
                                 hyper[s].phi);
        ext[s].first += dp;
        ext[s].second += dm;
        nat[s] = {eta_to_se(ext[s].first), eta_to_sp(ext[s].second)};
      }
      MisclassSummary::Row row;
      row.year = year;
      row.point = summarize_pairs(nat, se_last, sp_last);
      cap_variances(row.point);
      row.point.e_plus = row.point.v_plus + row.point.lambda_plus * row.point.lambda_plus;
      row.point.e_minus = row.point.v_minus +
                          (1.0 - row.point.lambda_minus) * (1.0 - row.point.lambda_minus);
      row.data_informed = false;
      fill_intervals(row, nat);
      if (year >= year_start) rows[year] = row;
    }
  }

  // backward extrapolation: points converge to the global estimate over
  // five years on the transformed scale, variances grow and get capped
  if (year_start < cl.year_start) {
    auto [se_first, sp_first] = point_of(in_span[cl.year_start]);
    const double eta_p_first = se_to_eta(se_first);
    const double eta_m_first = sp_to_eta(sp_first);
    const double eta_p_glob = se_to_eta(global_nostudy.lambda_plus);
    const double eta_m_glob = sp_to_eta(global_nostudy.lambda_minus);
    Rng rng(Rng::mix(samples.config.seed, 0x0b0b));
    std::vector<std::pair<double, double>> ext = eta_lo;
    for (int year = cl.year_start - 1; year >= year_start; --year) {
      const int lag = cl.year_start - year;
      std::vector<std::pair<double, double>> nat(total);
      for (long s = 0; s < total; ++s) {
        auto [dp, dm] = bvn_step(rng, hyper[s].delta_plus, hyper[s].delta_minus,
                                 hyper[s].phi);
        ext[s].first += dp;
        ext[s].second += dm;
        nat[s] = {eta_to_se(ext[s].first), eta_to_sp(ext[s].second)};
      }
      const double w = std::min(1.0, static_cast<double>(lag) / 5.0);
      const double eta_p = (1.0 - w) * eta_p_first + w * eta_p_glob;
      const double eta_m = (1.0 - w) * eta_m_first + w * eta_m_glob;
      MisclassSummary::Row row;
      row.year = year;
      row.point = summarize_pairs(nat, eta_to_se(eta_p), eta_to_sp(eta_m));
      cap_variances(row.point);
      row.point.e_plus = row.point.v_plus + row.point.lambda_plus * row.point.lambda_plus;
      row.point.e_minus = row.point.v_minus +
                          (1.0 - row.point.lambda_minus) * (1.0 - row.point.lambda_minus);
      row.data_informed = false;
      fill_intervals(row, nat);
      rows[year] = row;
    }
  }

  for (const auto& [year, row] : rows) summary.rows.push_back(row);
  return summary;
}

std::vector<LagCoverage> lag_validation(const PosteriorSamples& global_fit,
                                        const Dataset& dataset,
                                        std::span<const int> lags) {
  std::vector<LagCoverage> out;
  const std::uint64_t seed = Rng::mix(global_fit.config.seed, 0x1a6);
  for (int lag : lags) {
    const auto pairs = hierarchy_predictive(global_fit, lag, seed);
    std::map<std::string, std::pair<double, int>> below_by_country;
    std::map<std::string, std::pair<double, int>> above_by_country;
    for (const auto& obs : dataset.studies) {
      const auto ztc = obs.truemat_crvs_implied();
      if (!ztc || obs.z_crvs <= 0) continue;
      std::vector<double> pm_pred(pairs.size());
      for (std::size_t s = 0; s < pairs.size(); ++s) {
        pm_pred[s] = predict_matcrvs(pairs[s].first, pairs[s].second, *ztc,
                                     obs.z_crvs) /
                     static_cast<double>(obs.z_crvs);
      }
      const double observed =
          static_cast<double>(obs.z_matcrvs) / static_cast<double>(obs.z_crvs);
      const double q10 = quantile(pm_pred, 0.10);
      const double q90 = quantile(pm_pred, 0.90);
      auto& below = below_by_country[obs.country];
      auto& above = above_by_country[obs.country];
      below.first += observed < q10 ? 1.0 : 0.0;
      above.first += observed > q90 ? 1.0 : 0.0;
      ++below.second;
      ++above.second;
    }
    LagCoverage row;
    row.lag = lag;
    double nb = 0.0, na = 0.0;
    for (const auto& [country, acc] : below_by_country) {
      row.prop_below += acc.first / acc.second;
      nb += 1.0;
    }
    for (const auto& [country, acc] : above_by_country) {
      row.prop_above += acc.first / acc.second;
      na += 1.0;
    }
    if (nb > 0.0) row.prop_below /= nb;
    if (na > 0.0) row.prop_above /= na;
    out.push_back(row);
  }
  return out;
}

}  // namespace crvsadj
