// Acceptance suite: one test case per acceptance criterion, each printing a
// single PASS/FAIL line. Tolerances are pinned in code next to each check.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "crvsadj/bmat_bridge.hpp"
#include "crvsadj/cli_io.hpp"
#include "crvsadj/likelihood.hpp"
#include "crvsadj/mcmc.hpp"
#include "crvsadj/postprocess.hpp"
#include "crvsadj/rng.hpp"
#include "crvsadj/simulator.hpp"
#include "crvsadj/special.hpp"
#include "crvsadj/stats.hpp"
#include "crvsadj/validation.hpp"
#include "oracles.hpp"

using namespace crvsadj;
namespace fs = std::filesystem;

namespace {

// collects sub-checks and prints the per-criterion verdict line
class Criterion {
 public:
  Criterion(int number, std::string name)
      : number_(number), name_(std::move(name)) {}

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      notes_ += (notes_.empty() ? "" : "; ") + what;
    }
  }

  ~Criterion() {
    std::printf("[ACCEPTANCE] criterion %02d (%s): %s\n", number_, name_.c_str(),
                pass_ ? "PASS" : "FAIL");
    std::fflush(stdout);
    CHECK_MESSAGE(pass_, "criterion ", number_, " failed: ", notes_);
  }

 private:
  int number_;
  std::string name_;
  bool pass_ = true;
  std::string notes_;
};

GammaFour gamma_ordered(double tp, double fm, double tm, double fp) {
  GammaFour g;
  g.g_tplus = tp;
  g.g_fminus = fm;
  g.g_tminus = tm;
  g.g_fplus = fp;
  return g;
}

const GammaFour kGammaGrid[5] = {
    gamma_ordered(0.1, 0.1, 0.7, 0.1),
    gamma_ordered(0.25, 0.25, 0.25, 0.25),
    gamma_ordered(0.00586, 0.00414, 0.989307, 0.000693),
    gamma_ordered(0.05, 0.45, 0.475, 0.025),
    gamma_ordered(0.3, 0.05, 0.6, 0.05),
};

std::vector<double> pooled_natural(const PosteriorSamples& s, int k) {
  std::vector<double> out;
  out.reserve(s.total_draws());
  for (int c = 0; c < s.n_chains(); ++c) {
    for (long i = 0; i < s.n_kept(); ++i) {
      const double v = s.chains[c](i, k);
      if (k == 0) {
        out.push_back(eta_to_se(v));
      } else if (k == 1) {
        out.push_back(eta_to_sp(v));
      } else {
        out.push_back(v);
      }
    }
  }
  return out;
}

// multi-country scenario with single-year true-maternal studies
ScenarioConfig grid_scenario(int n_countries, int obs_per_country,
                             std::int64_t deaths, double truemat,
                             std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.hyper.eta_world_plus = se_to_eta(0.6);
  cfg.hyper.eta_world_minus = sp_to_eta(0.999);
  cfg.hyper.sigma_plus = 0.25;
  cfg.hyper.sigma_minus = 0.25;
  cfg.hyper.delta_plus = 0.05;
  cfg.hyper.delta_minus = 0.05;
  cfg.hyper.phi = 0.0;
  cfg.seed = seed;
  for (int c = 0; c < n_countries; ++c) {
    CountryScenario sc;
    sc.name = "C" + std::to_string(100 + c);
    sc.year_start = 1998;
    sc.year_end = 2006;
    sc.deaths_per_year = deaths;
    sc.truemat = truemat;
    for (int k = 0; k < obs_per_country; ++k) {
      StudyDesign d;
      d.kind = StudyKind::TruematCrvsOnly;
      d.t1 = d.t2 = 1999 + k * (obs_per_country > 1 ? 6 / (obs_per_country - 1) : 0);
      sc.studies.push_back(d);
    }
    cfg.countries.push_back(sc);
  }
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CRVSADJ_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing " + path.string() + ">";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_identical(const fs::path& a, const fs::path& b, std::string* detail) {
  std::vector<fs::path> rel;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (entry.is_regular_file()) rel.push_back(fs::relative(entry.path(), a));
  }
  std::sort(rel.begin(), rel.end());
  std::vector<fs::path> rel_b;
  for (const auto& entry : fs::recursive_directory_iterator(b)) {
    if (entry.is_regular_file()) rel_b.push_back(fs::relative(entry.path(), b));
  }
  std::sort(rel_b.begin(), rel_b.end());
  if (rel != rel_b) {
    *detail = "file lists differ";
    return false;
  }
  for (const auto& r : rel) {
    if (slurp(a / r) != slurp(b / r)) {
      *detail = "content differs: " + r.string();
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("criterion 01: likelihood oracle equivalence") {
  Criterion crit(1, "likelihood oracle equivalence");

  for (const auto& g : kGammaGrid) {
    for (std::int64_t z = 0; z <= 12; ++z) {
      for (std::int64_t zm = 0; zm <= z; ++zm) {
        for (std::int64_t ztc = 0; ztc <= z; ++ztc) {
          const double brute = oracle::overlap_brute_force(z, zm, ztc, g);
          const double ll = loglik_truemat_overlap(z, zm, ztc, g, false);
          if (brute == 0.0) {
            crit.expect(ll == neg_inf, "overlap: expected -inf");
          } else {
            crit.expect(std::fabs(ll - std::log(brute)) < 1e-10,
                        "overlap mismatch at z=" + std::to_string(z));
          }
        }
      }
    }
  }

  for (const auto& g : kGammaGrid) {
    for (std::int64_t z = 0; z <= 8; ++z) {
      for (std::int64_t zu = 0; zu <= 4; ++zu) {
        for (std::int64_t zm = 0; zm <= z; ++zm) {
          for (std::int64_t zt = 0; zt <= z + zu; ++zt) {
            const double brute = oracle::incomplete_brute_force(z, zu, zm, zt, g);
            const double ll = loglik_truemat_incomplete(z, zu, zm, zt, g, false);
            if (brute == 0.0) {
              crit.expect(ll == neg_inf, "incomplete: expected -inf");
            } else {
              crit.expect(std::fabs(ll - std::log(brute)) < 1e-10,
                          "incomplete mismatch at z=" + std::to_string(z));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("criterion 02: overlap likelihood normalization") {
  Criterion crit(2, "overlap likelihood normalization");
  for (const auto& g : kGammaGrid) {
    for (std::int64_t z : {5, 10}) {
      double total = 0.0;
      for (std::int64_t zm = 0; zm <= z; ++zm) {
        for (std::int64_t ztc = 0; ztc <= z; ++ztc) {
          const double ll = loglik_truemat_overlap(z, zm, ztc, g, false);
          if (ll != neg_inf) total += std::exp(ll);
        }
      }
      crit.expect(std::fabs(total - 1.0) <= 1e-9,
                  "normalization off at z=" + std::to_string(z) + ": " +
                      std::to_string(total));
    }
  }
}

TEST_CASE("criterion 03: transform and adjustment identities") {
  Criterion crit(3, "transform and adjustment identities");
  Rng rng(303);
  for (int trial = 0; trial < 1000; ++trial) {
    const double se = rng.uniform(0.1 + 1e-9, 1.0 - 1e-9);
    const double sp = rng.uniform(0.95 + 1e-9, 1.0 - 1e-9);
    const auto [ep, em] = to_transformed(se, sp);
    const auto [se2, sp2] = to_natural(ep, em);
    crit.expect(std::fabs(se2 - se) < 1e-12, "sensitivity round trip");
    crit.expect(std::fabs(sp2 - sp) < 1e-12, "specificity round trip");
  }
  for (int trial = 0; trial < 100; ++trial) {
    const double se = rng.uniform(0.1, 1.0);
    const double p = rng.uniform(1e-6, 1.0 - 1e-6);
    crit.expect(adjustment_factor(se, 1.0, p) == 1.0 / se,
                "factor at sp=1 not exactly 1/se");
  }
  for (int trial = 0; trial < 200; ++trial) {
    const double se = rng.uniform(0.15, 1.0);
    const double sp = rng.uniform(0.95, 0.99999);
    const double p_hi = rng.uniform(0.01, 0.5);
    const double p_lo = p_hi * rng.uniform(0.05, 0.95);
    crit.expect(adjustment_factor(se, sp, p_lo) < adjustment_factor(se, sp, p_hi),
                "factor not decreasing with decreasing true PM");
  }
}

TEST_CASE("criterion 04: prior recovery at desk config") {
  Criterion crit(4, "prior recovery at desk config");
  Dataset d;
  for (int year = 1998; year <= 2002; ++year) {
    CrvsYearRecord r;
    r.country = "A";
    r.year = year;
    r.mat_crvs = 10;
    r.crvs_total = 1000;
    r.who_envelope = 1050.0;
    d.crvs.push_back(r);
  }
  McmcConfig cfg = McmcConfig::desk();
  cfg.seed = 404;
  const PosteriorSamples samples = fit_global(d, cfg);
  crit.expect(samples.total_draws() == 4000, "draw count");

  const double med_se = median(pooled_natural(samples, 0));
  const double med_sp = median(pooled_natural(samples, 1));
  crit.expect(std::fabs(med_se - 0.55) <= 0.02,
              "lambda_world_plus median " + std::to_string(med_se));
  crit.expect(std::fabs(med_sp - 0.9975) <= 0.0005,
              "lambda_world_minus median " + std::to_string(med_sp));
}

TEST_CASE("criterion 05: posterior recovery on simulated breakdown studies") {
  Criterion crit(5, "posterior recovery on simulated breakdown studies");

  ScenarioConfig cfg = grid_scenario(20, 1, 200000, 0.01, 505);
  for (auto& sc : cfg.countries) {
    sc.studies.clear();
    StudyDesign d;
    d.kind = StudyKind::FminusFplus;
    d.t1 = d.t2 = 2002;
    sc.studies.push_back(d);
  }
  const auto [dataset, truth] = simulate_dataset(cfg);

  double true_mean_se = 0.0, true_mean_sp = 0.0;
  for (const auto& ct : truth.countries) {
    true_mean_se += ct.path.se_at(2002);
    true_mean_sp += ct.path.sp_at(2002);
  }
  true_mean_se /= truth.countries.size();
  true_mean_sp /= truth.countries.size();

  McmcConfig mc = McmcConfig::desk();
  mc.seed = 506;
  const PosteriorSamples samples = fit_global(dataset, mc);

  const double med_se = median(pooled_natural(samples, 0));
  const double med_sp = median(pooled_natural(samples, 1));
  crit.expect(std::fabs(med_se - true_mean_se) <= 0.05,
              "sensitivity: median " + std::to_string(med_se) + " vs true mean " +
                  std::to_string(true_mean_se));
  crit.expect(std::fabs(med_sp - true_mean_sp) <= 0.0005,
              "specificity: median " + std::to_string(med_sp) + " vs true mean " +
                  std::to_string(true_mean_sp));

  for (const auto& [name, rhat] : hyper_diagnostics(samples)) {
    crit.expect(!std::isnan(rhat) && rhat < 1.05,
                name + " rhat " + std::to_string(rhat));
  }
}

TEST_CASE("criterion 06: validation-harness calibration") {
  Criterion crit(6, "validation-harness calibration");

  // the held-out-year predictive spread must dominate the count noise the
  // Box-style predictions ignore: realistic random-walk innovations and
  // large envelopes keep the interval miss rates near the nominal 10%
  ScenarioConfig sim = grid_scenario(100, 3, 60000, 0.012, 606);
  sim.hyper.delta_plus = 0.15;
  sim.hyper.delta_minus = 0.15;
  const auto [dataset, truth] = simulate_dataset(sim);

  McmcConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 1600;
  cfg.n_burn = 800;
  cfg.thin = 4;
  cfg.seed = 607;
  cfg.apply_constraints = false;

  for (const ValidationScheme scheme :
       {ValidationScheme::Random20, ValidationScheme::LeaveLast}) {
    const ValidationReport report = run_validation(dataset, scheme, cfg);
    const std::string tag = to_string(scheme);
    crit.expect(report.n_failed_reps == 0, tag + ": failed reps");
    crit.expect(std::fabs(report.me) < 0.001,
                tag + ": |ME| = " + std::to_string(std::fabs(report.me)));
    crit.expect(report.prop_below_80 >= 0.05 && report.prop_below_80 <= 0.15,
                tag + ": prop_below = " + std::to_string(report.prop_below_80));
    crit.expect(report.prop_above_80 >= 0.05 && report.prop_above_80 <= 0.15,
                tag + ": prop_above = " + std::to_string(report.prop_above_80));
  }
}

TEST_CASE("criterion 07: kappa/theta machinery") {
  Criterion crit(7, "kappa/theta machinery");
  KappaModel model;
  model.n_samples = 100000;
  model.seed = 707;
  crit.expect(kappa_theta_variance(1.0, model) == 0.0, "m_hat at rho=1 not zero");

  const Eigen::ArrayXd kappa = kappa_draws(model);
  std::vector<double> v(kappa.data(), kappa.data() + kappa.size());
  const double q1 = quantile(v, 0.25);
  const double q3 = quantile(v, 0.75);
  crit.expect(std::fabs(q1 - 0.50941) <= 0.01, "kappa Q1 " + std::to_string(q1));
  crit.expect(std::fabs(q3 - 1.96303) <= 0.01, "kappa Q3 " + std::to_string(q3));

  KappaModel other = model;
  other.seed = 708;
  const double m1 = kappa_theta_variance(0.8, model);
  const double m2 = kappa_theta_variance(0.8, other);
  crit.expect(std::fabs(m1 - m2) / m1 < 0.05, "m_hat seed spread");
}

TEST_CASE("criterion 08: negative binomial correctness") {
  Criterion crit(8, "negative binomial correctness");

  double total = 0.0;
  for (std::int64_t y = 0; y <= 500; ++y) {
    total += std::exp(negbin_logpdf_mean_var(y, 5.0, 9.0));
  }
  crit.expect(std::fabs(total - 1.0) <= 1e-8, "pdf normalization " + std::to_string(total));

  const double E = 50.0, V = 80.0;
  const double shape = E * E / (V - E);
  const double scale = (V - E) / E;
  Rng rng(808);
  const long n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double y = static_cast<double>(rng.poisson(rng.gamma(shape, scale)));
    sum += y;
    sumsq += y * y;
  }
  const double mean_hat = sum / n;
  const double var_hat = sumsq / n - mean_hat * mean_hat;
  crit.expect(std::fabs(mean_hat - E) / E < 0.01, "sampler mean " + std::to_string(mean_hat));
  crit.expect(std::fabs(var_hat - V) / V < 0.01, "sampler variance " + std::to_string(var_hat));

  for (std::int64_t y : {30, 50, 70}) {
    const double nb = negbin_logpdf_mean_var(y, E, E * (1.0 + 1e-6));
    const double pois = -E + y * std::log(E) - log_factorial(y);
    crit.expect(std::fabs(nb - pois) < 1e-3, "Poisson limit at y=" + std::to_string(y));
  }
}

TEST_CASE("criterion 09: lag-validation coverage shape") {
  Criterion crit(9, "lag-validation coverage shape");

  const ScenarioConfig sim = grid_scenario(40, 3, 30000, 0.012, 909);
  const auto [dataset, truth] = simulate_dataset(sim);

  McmcConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 2000;
  cfg.n_burn = 1000;
  cfg.thin = 4;
  cfg.seed = 910;
  cfg.apply_constraints = false;
  const PosteriorSamples fit = fit_global(dataset, cfg);

  const int lags[] = {0, 1, 2, 5, 10, 15};
  const auto rows = lag_validation(fit, dataset, lags);
  REQUIRE(rows.size() == 6u);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    crit.expect(rows[i + 1].prop_below <= rows[i].prop_below + 1e-12,
                "prop_below not non-increasing at lag " + std::to_string(rows[i + 1].lag));
    crit.expect(rows[i + 1].prop_above <= rows[i].prop_above + 1e-12,
                "prop_above not non-increasing at lag " + std::to_string(rows[i + 1].lag));
  }
  crit.expect(rows.front().prop_below + rows.front().prop_above > 0.0,
              "coverage check degenerate: nothing outside at lag 0");
}

TEST_CASE("criterion 10: simulation-based calibration") {
  Criterion crit(10, "simulation-based calibration");

  const int n_reps = 50;
  const int n_bins = 5;
  std::vector<int> bins_ewp(n_bins, 0), bins_ewm(n_bins, 0), bins_dp(n_bins, 0),
      bins_dm(n_bins, 0);
  long m_draws = 0;

  for (int rep = 0; rep < n_reps; ++rep) {
    Rng prior_rng(Rng::mix(1010, rep));
    HyperParams truth;
    truth.eta_world_plus = se_to_eta(prior_rng.uniform(0.1 + 1e-9, 1.0 - 1e-9));
    truth.eta_world_minus = sp_to_eta(prior_rng.uniform(0.995 + 1e-12, 1.0 - 1e-12));
    truth.sigma_plus = std::fabs(prior_rng.normal());
    truth.sigma_minus = std::fabs(prior_rng.normal());
    truth.delta_plus = std::fabs(prior_rng.normal());
    truth.delta_minus = std::fabs(prior_rng.normal());
    truth.phi = prior_rng.uniform(-0.95, 0.95);

    ScenarioConfig sim;
    sim.hyper = truth;
    sim.seed = Rng::mix(2020, rep);
    sim.draw_truemat_uniform = true;
    for (int c = 0; c < 3; ++c) {
      CountryScenario sc;
      sc.name = "C" + std::to_string(c);
      sc.year_start = 2000;
      sc.year_end = 2004;
      sc.deaths_per_year = 300;
      sc.truemat = 0.5;  // overridden by the uniform draw
      sc.studies.push_back({StudyKind::TruematCrvsOnly, 2000, 2000});
      sc.studies.push_back({StudyKind::TruematCrvsOnly, 2004, 2004});
      sim.countries.push_back(sc);
    }
    const auto [dataset, truth_data] = simulate_dataset(sim);

    McmcConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iter = 2500;
    cfg.n_burn = 1000;
    cfg.thin = 15;
    cfg.seed = Rng::mix(3030, rep);
    cfg.apply_constraints = false;
    const PosteriorSamples fit = fit_global(dataset, cfg);
    m_draws = fit.total_draws();

    const auto rank_of = [&](int param, double true_value) {
      int rank = 0;
      for (int c = 0; c < fit.n_chains(); ++c) {
        for (long i = 0; i < fit.n_kept(); ++i) {
          if (fit.chains[c](i, param) < true_value) ++rank;
        }
      }
      return rank;
    };
    const auto bin_of = [&](int rank) {
      return std::min<int>(n_bins - 1,
                           rank * n_bins / static_cast<int>(m_draws + 1));
    };
    bins_ewp[bin_of(rank_of(0, truth.eta_world_plus))]++;
    bins_ewm[bin_of(rank_of(1, truth.eta_world_minus))]++;
    bins_dp[bin_of(rank_of(4, std::log(truth.delta_plus)))]++;
    bins_dm[bin_of(rank_of(5, std::log(truth.delta_minus)))]++;
  }

  const auto chi2_p = [&](const std::vector<int>& bins) {
    const double expected = static_cast<double>(n_reps) / n_bins;
    double stat = 0.0;
    for (int b : bins) stat += (b - expected) * (b - expected) / expected;
    return chi2_sf(stat, n_bins - 1);
  };
  const double p_ewp = chi2_p(bins_ewp);
  const double p_ewm = chi2_p(bins_ewm);
  const double p_dp = chi2_p(bins_dp);
  const double p_dm = chi2_p(bins_dm);
  crit.expect(p_ewp > 0.01, "eta_world_plus rank p " + std::to_string(p_ewp));
  crit.expect(p_ewm > 0.01, "eta_world_minus rank p " + std::to_string(p_ewm));
  crit.expect(p_dp > 0.01, "delta_plus rank p " + std::to_string(p_dp));
  crit.expect(p_dm > 0.01, "delta_minus rank p " + std::to_string(p_dm));
}

TEST_CASE("criterion 11: CLI bit-reproducibility") {
  Criterion crit(11, "CLI bit-reproducibility");

  const fs::path root = fs::temp_directory_path() / "crvsadj_accept";
  fs::remove_all(root);
  fs::create_directories(root);

  // small scenario and fit configs
  atomic_write_file(root / "sim.cfg",
                    "sim_n_countries = 3\nsim_year_start = 2000\n"
                    "sim_year_end = 2004\nsim_deaths_per_year = 5000\n"
                    "sim_truemat = 0.02\nsim_studies_per_country = 2\n"
                    "seed = 11\n");
  atomic_write_file(root / "fit.cfg",
                    "n_chains = 2\nn_iter = 400\nn_burn = 200\nthin = 2\n"
                    "seed = 12\n");

  const auto path = [&](const std::string& p) { return (root / p).string(); };
  std::string detail;

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("simulate --config " + path("sim.cfg") + " --out " +
                        path(std::string("sim") + tag)) == 0,
                "simulate exit code");
  }
  crit.expect(dirs_identical(root / "simA", root / "simB", &detail),
              "simulate: " + detail);

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("fit --studies " + path("simA/studies.csv") + " --crvs " +
                        path("simA/crvs.csv") + " --config " + path("fit.cfg") +
                        " --out " + path(std::string("fit") + tag)) == 0,
                "fit exit code");
  }
  crit.expect(dirs_identical(root / "fitA", root / "fitB", &detail),
              "fit: " + detail);

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("completeness --crvs " + path("simA/crvs.csv") + " --out " +
                        path(std::string("comp") + tag + ".csv")) == 0,
                "completeness exit code");
  }
  crit.expect(slurp(root / "compA.csv") == slurp(root / "compB.csv"), "completeness");

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("predict --fit " + path("fitA") + " --lag 1 --seed 5 --out " +
                        path(std::string("pred") + tag + ".csv")) == 0,
                "predict exit code");
    crit.expect(run_cli("predict --fit " + path("fitA") +
                        " --lag 1 --seed 5 --format json --out " +
                        path(std::string("predj") + tag + ".csv")) == 0,
                "predict json exit code");
  }
  crit.expect(slurp(root / "predA.csv") == slurp(root / "predB.csv"), "predict");
  crit.expect(slurp(root / "predjA.json") == slurp(root / "predjB.json"),
              "predict json mirror");

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("fit-country --country C01 --studies " +
                        path("simA/studies.csv") + " --crvs " +
                        path("simA/crvs.csv") + " --fit " + path("fitA") +
                        " --config " + path("fit.cfg") + " --horizon 1998:2006" +
                        " --out " + path(std::string("fc") + tag)) == 0,
                "fit-country exit code");
  }
  crit.expect(dirs_identical(root / "fcA", root / "fcB", &detail),
              "fit-country: " + detail);

  atomic_write_file(root / "pm.csv",
                    "country,year,p_truemat\nC01,2000,0.02\nC01,2002,0.015\n");
  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("adjust --summaries " + path("fcA/country_C01.csv") +
                        " --truepm " + path("pm.csv") + " --out " +
                        path(std::string("adj") + tag + ".csv")) == 0,
                "adjust exit code");
  }
  crit.expect(slurp(root / "adjA.csv") == slurp(root / "adjB.csv"), "adjust");

  // with specificity pinned at one the factor column is exactly 1/se
  atomic_write_file(root / "spfix.csv",
                    "country,year,lambda_plus,lambda_minus,v_plus,v_minus,u,"
                    "e_plus,e_minus\n"
                    "X,2000,0.5,1,0,0,0,0.25,0\n"
                    "X,2001,0.8,1,0,0,0,0.64,0\n");
  atomic_write_file(root / "pmfix.csv",
                    "country,year,p_truemat\nX,2000,0.3\nX,2001,0.07\n");
  crit.expect(run_cli("adjust --summaries " + path("spfix.csv") + " --truepm " +
                      path("pmfix.csv") + " --out " + path("adjfix.csv")) == 0,
              "adjust sp=1 exit code");
  const std::string adjfix = slurp(root / "adjfix.csv");
  crit.expect(adjfix.find("X,2000,0.5,1,0.3,2\n") != std::string::npos,
              "adjust sp=1: expected factor 2 for se=0.5");
  crit.expect(adjfix.find("X,2001,0.8,1,0.07,1.25\n") != std::string::npos,
              "adjust sp=1: expected factor 1.25 for se=0.8");

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("validate --studies " + path("simA/studies.csv") +
                        " --crvs " + path("simA/crvs.csv") +
                        " --scheme leavelast --config " + path("fit.cfg") +
                        " --out " + path(std::string("val") + tag)) == 0,
                "validate exit code");
  }
  crit.expect(dirs_identical(root / "valA", root / "valB", &detail),
              "validate: " + detail);

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("export-bmat --summaries " + path("fcA/country_C01.csv") +
                        " --crvs " + path("simA/crvs.csv") +
                        " --kappa-samples 5000 --kappa-seed 3 --out " +
                        path(std::string("bmat") + tag + ".csv")) == 0,
                "export-bmat exit code");
  }
  crit.expect(slurp(root / "bmatA.csv") == slurp(root / "bmatB.csv"), "export-bmat");

  for (const char* tag : {"A", "B"}) {
    crit.expect(run_cli("summarize --run " + path("fitA") + " --out " +
                        path(std::string("sum") + tag + ".csv")) == 0,
                "summarize exit code");
  }
  crit.expect(slurp(root / "sumA.csv") == slurp(root / "sumB.csv"), "summarize");

  // rerunning a completed run id is a no-op without --force
  const auto before = slurp(root / "fitA/manifest.json");
  crit.expect(run_cli("fit --studies " + path("simA/studies.csv") + " --crvs " +
                      path("simA/crvs.csv") + " --config " + path("fit.cfg") +
                      " --seed 999 --out " + path("fitA")) == 0,
              "no-op rerun exit code");
  crit.expect(slurp(root / "fitA/manifest.json") == before, "no-op rerun rewrote");

  // adjust at sp = 1 gives exactly 1/se: covered at the library level in
  // criterion 3; here check the error exit codes
  crit.expect(run_cli("fit --studies missing.csv") == 1, "usage error exit code");
  crit.expect(run_cli("completeness --crvs " + path("nowhere.csv") + " --out " +
                      path("x.csv")) == 2,
              "data error exit code");
}
