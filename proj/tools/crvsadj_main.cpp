// crvsadj: misclassification-adjustment engine for CRVS maternal-mortality
// reporting. Subcommands cover model fitting, no-study prediction,
// adjustment tables, validation exercises, completeness assessment,
// synthetic-data simulation, and export for the downstream mortality model.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "crvsadj/cli_io.hpp"

namespace fs = std::filesystem;
using namespace crvsadj;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

Config snapshot_mcmc(const McmcConfig& cfg) {
  Config snap;
  snap.set("n_chains", std::to_string(cfg.n_chains));
  snap.set("n_iter", std::to_string(cfg.n_iter));
  snap.set("n_burn", std::to_string(cfg.n_burn));
  snap.set("thin", std::to_string(cfg.thin));
  snap.set("seed", std::to_string(cfg.seed));
  snap.set("adapt_window", std::to_string(cfg.adapt_window));
  snap.set("target_accept", format_real(cfg.target_accept));
  snap.set("apply_constraints", cfg.apply_constraints ? "true" : "false");
  snap.set("max_init_retries", std::to_string(cfg.max_init_retries));
  snap.set("progress_every", std::to_string(cfg.progress_every));
  snap.set("n_threads", std::to_string(cfg.n_threads));
  return snap;
}

McmcConfig resolve_mcmc(const std::string& config_path, bool desk,
                        long seed_override) {
  McmcConfig cfg = desk ? McmcConfig::desk() : McmcConfig{};
  if (!config_path.empty()) {
    Config file = Config::parse_file(config_path);
    if (desk) {
      // desk baseline with file overrides
      Config base;
      base.set("n_chains", std::to_string(cfg.n_chains));
      base.set("n_iter", std::to_string(cfg.n_iter));
      base.set("n_burn", std::to_string(cfg.n_burn));
      base.set("thin", std::to_string(cfg.thin));
      for (const auto& [k, v] : file.entries()) base.set(k, v);
      cfg = base.mcmc();
    } else {
      cfg = file.mcmc();
    }
  }
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  return cfg;
}

ProgressFn progress_printer(const McmcConfig& cfg) {
  if (cfg.progress_every <= 0) return {};
  return [](int chain, long iter, long n_iter) {
    std::fprintf(stderr, "chain %d: %ld/%ld\n", chain, iter, n_iter);
  };
}

OutFormat parse_format(const std::string& name) {
  if (name == "csv") return OutFormat::Csv;
  if (name == "json") return OutFormat::Json;
  throw DataError("unknown format: " + name + " (expected csv or json)");
}

void write_country_tables(const fs::path& dir, const PosteriorSamples& samples,
                          const MisclassPoint& nostudy, OutFormat format) {
  for (std::size_t c = 0; c < samples.layout.countries.size(); ++c) {
    const auto& cl = samples.layout.countries[c];
    const MisclassSummary summary = postprocess_country(
        samples, nostudy, cl.year_start, cl.year_end, cl.country);
    country_summary_table(summary).write(dir / ("country_" + cl.country + ".csv"),
                                         format);
  }
}

int cmd_fit(const std::string& studies, const std::string& crvs,
            const std::string& config_path, const std::string& out, bool desk,
            long seed_override, const std::string& format_name, bool force,
            bool strict_convergence) {
  const OutFormat format = parse_format(format_name);
  const fs::path dir(out);
  if (run_is_complete(dir) && !force) {
    std::fprintf(stderr, "run %s already complete; use --force to redo\n",
                 out.c_str());
    return kExitOk;
  }
  const Dataset dataset = load_dataset(studies, crvs);
  const McmcConfig cfg = resolve_mcmc(config_path, desk, seed_override);

  const PosteriorSamples samples = fit_global(dataset, cfg, progress_printer(cfg));

  hyper_summary_table(samples).write(dir / "hypers.csv", format);
  diagnostics_table(samples).write(dir / "diagnostics.csv", format);
  hyper_draws_table(samples).write(dir / "hyper_draws.csv", format);
  const MisclassPoint nostudy = predict_no_study(samples, 0);
  write_country_tables(dir, samples, nostudy, format);

  RunArtifact artifact;
  artifact.dir = dir;
  artifact.config_snapshot = snapshot_mcmc(cfg);
  artifact.dataset_hash = samples.dataset_hash;
  write_manifest(artifact, "fit", {{"studies", studies}, {"crvs", crvs}});

  double max_rhat = 0.0;
  std::printf("parameter,rhat\n");
  for (const auto& [name, rhat] : hyper_diagnostics(samples)) {
    std::printf("%s,%s\n", name.c_str(),
                std::isnan(rhat) ? "undefined" : format_real(rhat).c_str());
    if (!std::isnan(rhat)) max_rhat = std::max(max_rhat, rhat);
  }
  std::fprintf(stderr, "fit: %ld draws in %.1fs\n", samples.total_draws(),
               samples.wall_seconds);
  if (strict_convergence && max_rhat > 1.1) {
    std::fprintf(stderr, "non-convergence: max rhat %.3f > 1.1\n", max_rhat);
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_fit_country(const std::string& country, const std::string& studies,
                    const std::string& crvs, const std::string& fit_dir,
                    const std::string& config_path, const std::string& out,
                    bool desk, long seed_override, const std::string& format_name,
                    bool force, const std::string& horizon) {
  const OutFormat format = parse_format(format_name);
  const fs::path dir(out);
  if (run_is_complete(dir) && !force) {
    std::fprintf(stderr, "run %s already complete; use --force to redo\n",
                 out.c_str());
    return kExitOk;
  }
  Dataset full = load_dataset(studies, crvs);
  Dataset subset;
  for (const auto& s : full.studies) {
    if (s.country == country) subset.studies.push_back(s);
  }
  for (const auto& r : full.crvs) {
    if (r.country == country) subset.crvs.push_back(r);
  }
  if (subset.studies.empty()) {
    throw DataError("fit-country: no studies for country " + country +
                    "; use predict for no-study countries");
  }
  const McmcConfig cfg = resolve_mcmc(config_path, desk, seed_override);

  PosteriorSamples global = read_hyper_draws_csv(fs::path(fit_dir) / "hyper_draws.csv");
  global.config.seed = cfg.seed;
  const HyperParams hyper = hyper_point_estimates(global);
  const MisclassPoint nostudy = predict_no_study(global, 0);

  const PosteriorSamples samples =
      fit_fixed_hyper(subset, hyper, cfg, progress_printer(cfg));

  int y0 = samples.layout.countries.front().year_start;
  int y1 = samples.layout.countries.front().year_end;
  if (!horizon.empty()) {
    const auto colon = horizon.find(':');
    if (colon == std::string::npos) throw DataError("bad --horizon, expected Y0:Y1");
    y0 = std::stoi(horizon.substr(0, colon));
    y1 = std::stoi(horizon.substr(colon + 1));
  }
  const MisclassSummary summary = postprocess_country(samples, nostudy, y0, y1, country);
  country_summary_table(summary).write(dir / ("country_" + country + ".csv"), format);

  RunArtifact artifact;
  artifact.dir = dir;
  artifact.config_snapshot = snapshot_mcmc(cfg);
  artifact.dataset_hash = subset.hash();
  write_manifest(artifact, "fit-country",
                 {{"studies", studies}, {"crvs", crvs}, {"fit", fit_dir}});
  std::fprintf(stderr, "fit-country %s: %ld draws in %.1fs\n", country.c_str(),
               samples.total_draws(), samples.wall_seconds);
  return kExitOk;
}

int cmd_predict(const std::string& fit_dir, int lag, long seed,
                const std::string& out, const std::string& format_name) {
  PosteriorSamples global = read_hyper_draws_csv(fs::path(fit_dir) / "hyper_draws.csv");
  global.config.seed = static_cast<std::uint64_t>(seed);
  const MisclassPoint point = predict_no_study(global, lag);
  misclass_point_table(point, lag).write(out, parse_format(format_name));
  return kExitOk;
}

int cmd_adjust(const std::string& summaries, const std::string& truepm,
               const std::string& out, const std::string& format_name) {
  const auto rows = parse_summary_csv(summaries);
  std::map<std::pair<std::string, int>, const SummaryRow*> by_key;
  for (const auto& row : rows) by_key[{row.country, row.year}] = &row;

  const auto pm_rows = [&] {
    std::vector<std::vector<std::string>> raw;
    std::ifstream in(truepm);
    if (!in) throw DataError("cannot open file: " + truepm);
    std::string line;
    std::vector<std::vector<std::string>> parsed;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::string cur;
      for (char c : line) {
        if (c == ',') {
          fields.push_back(cur);
          cur.clear();
        } else if (c != '\r') {
          cur += c;
        }
      }
      fields.push_back(cur);
      parsed.push_back(fields);
    }
    return parsed;
  }();
  if (pm_rows.empty() ||
      pm_rows.front() != std::vector<std::string>{"country", "year", "p_truemat"}) {
    throw DataError(truepm + ": expected header country,year,p_truemat");
  }

  Table table;
  table.columns = {"country", "year",      "lambda_plus", "lambda_minus",
                   "p_truemat", "crvs_adjustment"};
  for (std::size_t r = 1; r < pm_rows.size(); ++r) {
    const auto& f = pm_rows[r];
    if (f.size() != 3) {
      throw DataError(truepm + " row " + std::to_string(r + 1) + ": bad field count");
    }
    const std::string& country = f[0];
    const int year = std::stoi(f[1]);
    const double p = std::stod(f[2]);
    const auto it = by_key.find({country, year});
    if (it == by_key.end()) {
      throw DataError(truepm + " row " + std::to_string(r + 1) +
                      ": no summary for " + country + " " + f[1]);
    }
    const auto& point = it->second->point;
    const double factor = adjustment_factor(point.lambda_plus, point.lambda_minus, p);
    table.add_row({country, f[1], format_real(point.lambda_plus),
                   format_real(point.lambda_minus), format_real(p),
                   format_real(factor)});
  }
  table.write(out, parse_format(format_name));
  return kExitOk;
}

int cmd_validate(const std::string& studies, const std::string& crvs,
                 const std::string& scheme_name, const std::string& config_path,
                 bool desk, long seed_override, const std::string& out,
                 const std::string& format_name, bool force) {
  const OutFormat format = parse_format(format_name);
  const fs::path dir(out);
  if (run_is_complete(dir) && !force) {
    std::fprintf(stderr, "run %s already complete; use --force to redo\n",
                 out.c_str());
    return kExitOk;
  }
  const Dataset dataset = load_dataset(studies, crvs);
  const ValidationScheme scheme = scheme_from_string(scheme_name);
  const McmcConfig cfg = resolve_mcmc(config_path, desk, seed_override);
  const ValidationReport report = run_validation(dataset, scheme, cfg);
  validation_table(report).write(dir / "validation.csv", format);

  RunArtifact artifact;
  artifact.dir = dir;
  artifact.config_snapshot = snapshot_mcmc(cfg);
  artifact.config_snapshot.set("scheme", to_string(scheme));
  artifact.dataset_hash = dataset.hash();
  write_manifest(artifact, "validate", {{"studies", studies}, {"crvs", crvs}});
  std::printf("%s: n=%d me=%s mae=%s mare_pct=%s below=%s above=%s\n",
              to_string(scheme), report.n_leftout, format_real(report.me).c_str(),
              format_real(report.mae).c_str(), format_real(report.mare_pct).c_str(),
              format_real(report.prop_below_80).c_str(),
              format_real(report.prop_above_80).c_str());
  return kExitOk;
}

int cmd_completeness(const std::string& crvs, int window, const std::string& out,
                     const std::string& format_name) {
  const auto records = parse_crvs_csv(crvs);
  std::map<std::string, std::vector<CrvsYearRecord>> by_country;
  for (const auto& r : records) by_country[r.country].push_back(r);
  std::vector<CompletenessAssessment> assessments;
  for (const auto& [country, recs] : by_country) {
    assessments.push_back(assess(recs, window));
  }
  completeness_table(assessments).write(out, parse_format(format_name));
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 long seed_override, const std::string& format_name, bool force) {
  const OutFormat format = parse_format(format_name);
  const fs::path dir(out);
  if (run_is_complete(dir) && !force) {
    std::fprintf(stderr, "run %s already complete; use --force to redo\n",
                 out.c_str());
    return kExitOk;
  }
  Config file = config_path.empty() ? Config() : Config::parse_file(config_path);
  if (seed_override >= 0) file.set("seed", std::to_string(seed_override));
  const ScenarioConfig scenario = file.scenario();
  const auto [dataset, truth] = simulate_dataset(scenario);

  write_studies(dir / "studies.csv", dataset.studies, format);
  write_crvs(dir / "crvs.csv", dataset.crvs, format);

  Table truth_table;
  truth_table.columns = {"country", "year",    "se_true",
                         "sp_true", "truemat_true", "completeness_true"};
  for (const auto& ct : truth.countries) {
    for (int year = ct.path.year_start; year <= ct.path.year_end; ++year) {
      const int k = year - ct.path.year_start;
      truth_table.add_row({ct.name, std::to_string(year),
                           format_real(ct.path.se_at(year)),
                           format_real(ct.path.sp_at(year)),
                           format_real(ct.truemat[k]),
                           format_real(ct.completeness[k])});
    }
  }
  truth_table.write(dir / "truth.csv", format);

  RunArtifact artifact;
  artifact.dir = dir;
  artifact.config_snapshot = file;
  artifact.dataset_hash = dataset.hash();
  write_manifest(artifact, "simulate", {});
  return kExitOk;
}

int cmd_export_bmat(const std::string& summaries, const std::string& crvs,
                    long kappa_samples, long kappa_seed, const std::string& out,
                    const std::string& format_name) {
  const auto rows = parse_summary_csv(summaries);
  std::map<std::string, std::vector<CrvsYearRecord>> by_country;
  if (!crvs.empty()) {
    for (const auto& r : parse_crvs_csv(crvs)) by_country[r.country].push_back(r);
  }
  std::map<std::string, CompletenessAssessment> assessed;
  for (const auto& [country, recs] : by_country) {
    assessed[country] = assess(recs);
  }
  KappaModel model;
  model.n_samples = kappa_samples;
  model.seed = static_cast<std::uint64_t>(kappa_seed);
  const Eigen::ArrayXd kappa = kappa_draws(model);  // shared across rows

  Table table;
  table.columns = {"country", "year",    "lambda_plus", "lambda_minus",
                   "v_plus",  "v_minus", "u",           "e_plus",
                   "e_minus", "rho_crvs", "m_hat"};
  for (const auto& row : rows) {
    double completeness = 1.0;
    const auto it = assessed.find(row.country);
    if (it != assessed.end()) {
      bool has_year = false;
      for (const auto& y : it->second.years) has_year |= y.year == row.year;
      if (has_year) completeness = it->second.value(row.year);
    }
    const double m_hat = theta_variance(completeness, kappa);
    const auto& p = row.point;
    table.add_row({row.country, std::to_string(row.year), format_real(p.lambda_plus),
                   format_real(p.lambda_minus), format_real(p.v_plus),
                   format_real(p.v_minus), format_real(p.u), format_real(p.e_plus),
                   format_real(p.e_minus), format_real(completeness),
                   format_real(m_hat)});
  }
  table.write(out, parse_format(format_name));
  return kExitOk;
}

int cmd_summarize(const std::string& run_dir, const std::string& out,
                  const std::string& format_name) {
  const fs::path dir(run_dir);
  Table table;
  table.columns = {"country", "year", "param", "q10", "q50", "q90"};

  std::set<fs::path> country_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("country_", 0) == 0 && entry.path().extension() == ".csv") {
      country_files.insert(entry.path());
    }
  }
  for (const auto& file : country_files) {
    std::ifstream in(file);
    std::string line;
    std::vector<std::string> header;
    std::map<std::string, std::size_t> idx;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::string cur;
      for (char c : line) {
        if (c == ',') {
          f.push_back(cur);
          cur.clear();
        } else if (c != '\r') {
          cur += c;
        }
      }
      f.push_back(cur);
      if (first) {
        header = f;
        for (std::size_t i = 0; i < f.size(); ++i) idx[f[i]] = i;
        for (const char* need :
             {"country", "year", "lambda_plus", "lambda_minus", "se_q10",
              "se_q90", "sp_q10", "sp_q90"}) {
          if (!idx.count(need)) {
            throw DataError(file.string() + ": missing column " + need);
          }
        }
        first = false;
        continue;
      }
      table.add_row({f[idx["country"]], f[idx["year"]], "sensitivity",
                     f[idx["se_q10"]], f[idx["lambda_plus"]], f[idx["se_q90"]]});
      table.add_row({f[idx["country"]], f[idx["year"]], "specificity",
                     f[idx["sp_q10"]], f[idx["lambda_minus"]], f[idx["sp_q90"]]});
    }
  }

  const fs::path hypers = dir / "hypers.csv";
  if (fs::exists(hypers)) {
    std::ifstream in(hypers);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::string cur;
      for (char c : line) {
        if (c == ',') {
          f.push_back(cur);
          cur.clear();
        } else if (c != '\r') {
          cur += c;
        }
      }
      f.push_back(cur);
      if (first) {
        first = false;
        continue;
      }
      if (f.size() == 4) {
        table.add_row({"GLOBAL", "", f[0], f[1], f[2], f[3]});
      }
    }
  }
  table.write(out, parse_format(format_name));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRVS misclassification adjustment engine"};
  app.require_subcommand(1);

  std::string studies, crvs, config_path, out, country, fit_dir, horizon;
  std::string scheme = "random20";
  std::string format_name = "csv";
  std::string truepm, summaries, run_dir;
  long seed = -1;
  int lag = 0;
  int window = 5;
  long kappa_samples = 100000;
  long kappa_seed = 1;
  bool desk = false, force = false, strict = false;

  auto* fit = app.add_subcommand("fit", "fit the global model");
  fit->add_option("--studies", studies)->required();
  fit->add_option("--crvs", crvs)->required();
  fit->add_option("--config", config_path);
  fit->add_option("--out", out)->required();
  fit->add_option("--seed", seed);
  fit->add_option("--format", format_name);
  fit->add_flag("--desk", desk, "desk-scale defaults (4x4000) instead of 10x40000");
  fit->add_flag("--force", force);
  fit->add_flag("--strict-convergence", strict, "exit 3 when max rhat > 1.1");

  auto* fitc = app.add_subcommand("fit-country", "one-country refit with fixed globals");
  fitc->add_option("--country", country)->required();
  fitc->add_option("--studies", studies)->required();
  fitc->add_option("--crvs", crvs)->required();
  fitc->add_option("--fit", fit_dir, "run directory of the global fit")->required();
  fitc->add_option("--config", config_path);
  fitc->add_option("--out", out)->required();
  fitc->add_option("--seed", seed);
  fitc->add_option("--horizon", horizon, "Y0:Y1 extension horizon");
  fitc->add_option("--format", format_name);
  fitc->add_flag("--desk", desk);
  fitc->add_flag("--force", force);

  auto* predict = app.add_subcommand("predict", "no-study predictive summaries");
  predict->add_option("--fit", fit_dir)->required();
  predict->add_option("--lag", lag);
  predict->add_option("--seed", seed);
  predict->add_option("--out", out)->required();
  predict->add_option("--format", format_name);

  auto* adjust = app.add_subcommand("adjust", "adjustment factors from summaries");
  adjust->add_option("--summaries", summaries)->required();
  adjust->add_option("--truepm", truepm)->required();
  adjust->add_option("--out", out)->required();
  adjust->add_option("--format", format_name);

  auto* validate = app.add_subcommand("validate", "out-of-sample validation");
  validate->add_option("--studies", studies)->required();
  validate->add_option("--crvs", crvs)->required();
  validate->add_option("--scheme", scheme, "random20 or leavelast");
  validate->add_option("--config", config_path);
  validate->add_option("--out", out)->required();
  validate->add_option("--seed", seed);
  validate->add_option("--format", format_name);
  validate->add_flag("--desk", desk);
  validate->add_flag("--force", force);

  auto* completeness = app.add_subcommand("completeness", "CRVS completeness assessment");
  completeness->add_option("--crvs", crvs)->required();
  completeness->add_option("--window", window);
  completeness->add_option("--out", out)->required();
  completeness->add_option("--format", format_name);

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate->add_option("--config", config_path);
  simulate->add_option("--out", out)->required();
  simulate->add_option("--seed", seed);
  simulate->add_option("--format", format_name);
  simulate->add_flag("--force", force);

  auto* exportb = app.add_subcommand("export-bmat", "data-model export table");
  exportb->add_option("--summaries", summaries)->required();
  exportb->add_option("--crvs", crvs);
  exportb->add_option("--kappa-samples", kappa_samples);
  exportb->add_option("--kappa-seed", kappa_seed);
  exportb->add_option("--out", out)->required();
  exportb->add_option("--format", format_name);

  auto* summarize = app.add_subcommand("summarize", "plot-ready estimate table");
  summarize->add_option("--run", run_dir)->required();
  summarize->add_option("--out", out)->required();
  summarize->add_option("--format", format_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(fit)) {
      return cmd_fit(studies, crvs, config_path, out, desk, seed, format_name,
                     force, strict);
    }
    if (app.got_subcommand(fitc)) {
      return cmd_fit_country(country, studies, crvs, fit_dir, config_path, out,
                             desk, seed, format_name, force, horizon);
    }
    if (app.got_subcommand(predict)) {
      return cmd_predict(fit_dir, lag, seed < 0 ? 1 : seed, out, format_name);
    }
    if (app.got_subcommand(adjust)) {
      return cmd_adjust(summaries, truepm, out, format_name);
    }
    if (app.got_subcommand(validate)) {
      return cmd_validate(studies, crvs, scheme, config_path, desk, seed, out,
                          format_name, force);
    }
    if (app.got_subcommand(completeness)) {
      return cmd_completeness(crvs, window, out, format_name);
    }
    if (app.got_subcommand(simulate)) {
      return cmd_simulate(config_path, out, seed, format_name, force);
    }
    if (app.got_subcommand(exportb)) {
      return cmd_export_bmat(summaries, crvs, kappa_samples, kappa_seed, out,
                             format_name);
    }
    if (app.got_subcommand(summarize)) {
      return cmd_summarize(run_dir, out, format_name);
    }
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitUsage;
}
