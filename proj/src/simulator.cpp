#include "crvsadj/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "crvsadj/likelihood.hpp"
#include "crvsadj/postprocess.hpp"
#include "crvsadj/rng.hpp"
#include "crvsadj/stats.hpp"

namespace crvsadj {

void ScenarioConfig::validate() const {
  hyper.validate();
  if (countries.empty()) throw DataError("ScenarioConfig: no countries");
  for (const auto& c : countries) {
    if (c.year_start > c.year_end) throw DataError(c.name + ": bad year range");
    if (c.deaths_per_year <= 0) throw DataError(c.name + ": deaths scale must be > 0");
    if (!(c.truemat > 0.0 && c.truemat < 1.0)) {
      throw DataError(c.name + ": truemat outside (0,1)");
    }
    if (!c.completeness_schedule.empty() &&
        static_cast<int>(c.completeness_schedule.size()) !=
            c.year_end - c.year_start + 1) {
      throw DataError(c.name + ": completeness schedule length mismatch");
    }
    for (const auto& s : c.studies) {
      if (s.t1 > s.t2 || s.t1 < c.year_start || s.t2 > c.year_end) {
        throw DataError(c.name + ": study period outside country years");
      }
    }
  }
}

namespace {

ProbVector6 build_rho(double se, double sp, double truemat, double completeness,
                      double kappa) {
  const double omega = std::min(1.0, kappa * truemat);
  ProbVector6 rho;
  rho.t_plus = completeness * truemat * se;
  rho.f_minus = completeness * truemat * (1.0 - se);
  rho.t_minus = completeness * (1.0 - truemat) * sp;
  rho.f_plus = completeness * (1.0 - truemat) * (1.0 - sp);
  rho.u_plus = (1.0 - completeness) * omega;
  rho.u_minus = (1.0 - completeness) * (1.0 - omega);
  return rho;
}

}  // namespace

const CountryTruth& GroundTruth::country(const std::string& name) const {
  for (const auto& c : countries) {
    if (c.name == name) return c;
  }
  throw DataError("GroundTruth: unknown country " + name);
}

std::pair<Dataset, GroundTruth> simulate_dataset(const ScenarioConfig& cfg) {
  cfg.validate();
  Dataset dataset;
  GroundTruth truth;
  truth.hyper = cfg.hyper;

  for (std::size_t ci = 0; ci < cfg.countries.size(); ++ci) {
    const auto& sc = cfg.countries[ci];
    Rng rng(Rng::mix(cfg.seed, 0xc0 + ci));

    // reference year matches what the model will use: the midyear of the
    // study observation span when studies exist, else the country midyear
    int t_ref = (sc.year_start + sc.year_end) / 2;
    if (!sc.studies.empty()) {
      int lo = sc.studies.front().t1, hi = sc.studies.front().t2;
      for (const auto& s : sc.studies) {
        lo = std::min(lo, s.t1);
        hi = std::max(hi, s.t2);
      }
      t_ref = (lo + hi) / 2;
    }

    CountryTruth ct;
    ct.name = sc.name;
    ct.path = simulate_path(cfg.hyper, t_ref, sc.year_start, sc.year_end, rng);
    ct.path.country = sc.name;

    const int n_years = sc.year_end - sc.year_start + 1;
    for (int k = 0; k < n_years; ++k) {
      const int year = sc.year_start + k;
      const double completeness = sc.completeness_schedule.empty()
                                      ? sc.completeness
                                      : sc.completeness_schedule[k];
      const double truemat = cfg.draw_truemat_uniform
                                 ? std::clamp(rng.uniform(), 1e-9, 1.0 - 1e-9)
                                 : sc.truemat;
      const double se = ct.path.se_at(year);
      const double sp = ct.path.sp_at(year);
      const ProbVector6 rho = build_rho(se, sp, truemat, completeness, sc.kappa);
      const double probs[6] = {rho.t_plus, rho.f_minus, rho.t_minus,
                               rho.f_plus, rho.u_plus, rho.u_minus};
      const auto cells = rng.multinomial(sc.deaths_per_year, probs);
      SixBoxCounts counts;
      counts.t_plus = cells[0];
      counts.f_minus = cells[1];
      counts.t_minus = cells[2];
      counts.f_plus = cells[3];
      counts.u_plus = cells[4];
      counts.u_minus = cells[5];

      ct.truemat.push_back(truemat);
      ct.completeness.push_back(completeness);
      ct.rho.push_back(rho);
      ct.counts.push_back(counts);

      CrvsYearRecord rec;
      rec.country = sc.name;
      rec.year = year;
      rec.mat_crvs = counts.mat_crvs();
      rec.crvs_total = counts.crvs_total();
      rec.who_envelope = static_cast<double>(sc.deaths_per_year);
      rec.completeness = completeness;
      dataset.crvs.push_back(rec);
    }

    for (const auto& design : sc.studies) {
      SixBoxCounts agg;
      for (int year = design.t1; year <= design.t2; ++year) {
        const auto& c = ct.counts[year - sc.year_start];
        agg.t_plus += c.t_plus;
        agg.t_minus += c.t_minus;
        agg.f_plus += c.f_plus;
        agg.f_minus += c.f_minus;
        agg.u_plus += c.u_plus;
        agg.u_minus += c.u_minus;
      }
      StudyObservation obs;
      obs.country = sc.name;
      obs.t1 = design.t1;
      obs.t2 = design.t2;
      obs.kind = design.kind;
      obs.z_crvs = agg.crvs_total();
      obs.z_matcrvs = agg.mat_crvs();
      switch (design.kind) {
        case StudyKind::TruematCrvsOnly:
          obs.z_truemat_crvs = agg.truemat_crvs();
          break;
        case StudyKind::TruematAndUplus:
          obs.z_truemat = agg.truemat_crvs() + agg.u_plus;
          obs.z_unreg = agg.u_plus + agg.u_minus;
          break;
        case StudyKind::FminusFplusUplus:
          obs.z_fminus = agg.f_minus;
          obs.z_fplus = agg.f_plus;
          obs.z_uplus = agg.u_plus;
          break;
        case StudyKind::FminusFplus:
          obs.z_fminus = agg.f_minus;
          obs.z_fplus = agg.f_plus;
          break;
        case StudyKind::FminusUplus:
          obs.z_fminus = agg.f_minus;
          obs.z_uplus = agg.u_plus;
          break;
        case StudyKind::FminusOnly:
          obs.z_fminus = agg.f_minus;
          break;
      }
      obs.validate();
      dataset.studies.push_back(obs);
    }
    truth.countries.push_back(std::move(ct));
  }
  dataset.validate();
  return {dataset, truth};
}

std::vector<StrategyScore> compare_adjustments(
    const Dataset& dataset, const GroundTruth& truth,
    std::span<const AdjustmentStrategy> strategies,
    const PosteriorSamples* global_fit) {
  std::vector<StrategyScore> out;
  for (const auto strategy : strategies) {
    StrategyScore score{strategy, 0.0, 0};
    for (std::size_t j = 0; j < dataset.studies.size(); ++j) {
      const auto& obs = dataset.studies[j];
      if (obs.z_crvs <= 0) continue;
      const auto& ct = truth.country(obs.country);
      const int year = obs.midpoint_year();
      const int k = year - ct.path.year_start;
      const double true_pm = ct.truemat[k];
      const double observed_pm =
          static_cast<double>(obs.z_matcrvs) / static_cast<double>(obs.z_crvs);
      double factor = 1.5;
      if (strategy == AdjustmentStrategy::ModelBased) {
        if (!global_fit) {
          throw DataError("compare_adjustments: ModelBased needs a global fit");
        }
        const int country = global_fit->layout.country_index(obs.country);
        if (country < 0) continue;
        std::vector<double> se_s, sp_s, tm_s;
        for (int c = 0; c < global_fit->n_chains(); ++c) {
          for (long i = 0; i < global_fit->n_kept(); ++i) {
            auto [se, sp] = global_fit->se_sp_draw(c, i, country, year);
            se_s.push_back(se);
            sp_s.push_back(sp);
            tm_s.push_back(global_fit->truemat_draw(c, i, static_cast<int>(j)));
          }
        }
        factor = adjustment_factor(median(se_s), median(sp_s), median(tm_s));
      }
      score.mean_abs_error += std::fabs(factor * observed_pm - true_pm);
      ++score.n;
    }
    if (score.n > 0) score.mean_abs_error /= score.n;
    out.push_back(score);
  }
  return out;
}

}  // namespace crvsadj
