#include "crvsadj/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crvsadj/stats.hpp"

namespace crvsadj {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r') {
      // tolerate CRLF
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw DataError("empty CSV file: " + path.string());
  return rows;
}

std::int64_t parse_int_field(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw DataError(where + ": not an integer: '" + s + "'");
  }
  return v;
}

double parse_real_field(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + s + "'");
  }
}

std::string opt_to_string(const std::optional<std::int64_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

const std::vector<std::string> kStudyColumns = {
    "country",  "t1",       "t2",      "z_crvs",  "z_matcrvs",
    "z_truemat_crvs", "z_truemat", "z_fminus", "z_fplus", "z_uplus",
    "z_unreg",  "z_env",    "z_tot"};

StudyKind infer_kind(const StudyObservation& obs, const std::string& where) {
  const bool has_breakdown = obs.z_fminus.has_value() || obs.z_fplus.has_value();
  if (obs.z_truemat_crvs && obs.z_truemat) {
    throw DataError(where + ": both z_truemat_crvs and z_truemat present; kind ambiguous");
  }
  if (obs.z_truemat_crvs) {
    if (has_breakdown) {
      throw DataError(where + ": z_truemat_crvs together with breakdown counts; kind ambiguous");
    }
    return StudyKind::TruematCrvsOnly;
  }
  if (obs.z_truemat) {
    if (has_breakdown) {
      throw DataError(where + ": z_truemat together with breakdown counts; kind ambiguous");
    }
    if (!obs.z_unreg) {
      throw DataError(where + ": z_truemat requires z_unreg");
    }
    return StudyKind::TruematAndUplus;
  }
  if (obs.z_fminus && obs.z_fplus && obs.z_uplus) return StudyKind::FminusFplusUplus;
  if (obs.z_fminus && obs.z_fplus) return StudyKind::FminusFplus;
  if (obs.z_fminus && obs.z_uplus) return StudyKind::FminusUplus;
  if (obs.z_fminus) return StudyKind::FminusOnly;
  throw DataError(where + ": cannot infer study kind from the reported columns");
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  return parse_string(read_file(path));
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw DataError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw DataError("config line " + std::to_string(line_no) + ": empty key");
    }
    cfg.entries_[key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

long Config::get_int(const std::string& key, long fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return parse_int_field(it->second, "config key " + key);
}

double Config::get_real(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return parse_real_field(it->second, "config key " + key);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw DataError("config key " + key + ": expected true/false");
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

McmcConfig Config::mcmc() const {
  McmcConfig cfg;
  cfg.n_chains = static_cast<int>(get_int("n_chains", cfg.n_chains));
  cfg.n_iter = get_int("n_iter", cfg.n_iter);
  cfg.n_burn = get_int("n_burn", cfg.n_burn);
  cfg.thin = static_cast<int>(get_int("thin", cfg.thin));
  cfg.seed = static_cast<std::uint64_t>(get_int("seed", static_cast<long>(cfg.seed)));
  cfg.adapt_window = static_cast<int>(get_int("adapt_window", cfg.adapt_window));
  cfg.target_accept = get_real("target_accept", cfg.target_accept);
  cfg.apply_constraints = get_bool("apply_constraints", cfg.apply_constraints);
  cfg.max_init_retries = static_cast<int>(get_int("max_init_retries", cfg.max_init_retries));
  cfg.progress_every = get_int("progress_every", cfg.progress_every);
  cfg.n_threads = static_cast<int>(get_int("n_threads", cfg.n_threads));
  cfg.validate();
  return cfg;
}

KappaModel Config::kappa() const {
  KappaModel model;
  model.n_samples = get_int("kappa_n_samples", model.n_samples);
  model.seed = static_cast<std::uint64_t>(
      get_int("kappa_seed", static_cast<long>(model.seed)));
  model.validate();
  return model;
}

ScenarioConfig Config::scenario() const {
  ScenarioConfig cfg;
  const int n_countries = static_cast<int>(get_int("sim_n_countries", 5));
  const int year_start = static_cast<int>(get_int("sim_year_start", 1990));
  const int year_end = static_cast<int>(get_int("sim_year_end", 2005));
  const auto deaths = get_int("sim_deaths_per_year", 10000);
  const double truemat = get_real("sim_truemat", 0.01);
  const double completeness = get_real("sim_completeness", 1.0);
  const double kappa = get_real("sim_kappa", 1.0);
  const int studies_per_country = static_cast<int>(get_int("sim_studies_per_country", 2));
  const int period_length = static_cast<int>(get_int("sim_period_length", 1));
  const StudyKind kind =
      study_kind_from_string(get_string("sim_study_kind", "TRUEMAT_CRVS_ONLY"));

  cfg.hyper.eta_world_plus = se_to_eta(get_real("sim_se_world", 0.6));
  cfg.hyper.eta_world_minus = sp_to_eta(get_real("sim_sp_world", 0.999));
  cfg.hyper.sigma_plus = get_real("sim_sigma_plus", 0.3);
  cfg.hyper.sigma_minus = get_real("sim_sigma_minus", 0.3);
  cfg.hyper.delta_plus = get_real("sim_delta_plus", 0.1);
  cfg.hyper.delta_minus = get_real("sim_delta_minus", 0.1);
  cfg.hyper.phi = get_real("sim_phi", 0.0);
  cfg.seed = static_cast<std::uint64_t>(get_int("seed", 1));
  cfg.draw_truemat_uniform = get_bool("sim_draw_truemat_uniform", false);

  const int n_years = year_end - year_start + 1;
  if (period_length > n_years) {
    throw DataError("scenario: sim_period_length exceeds the year range");
  }
  int width = 2;
  if (n_countries >= 100) width = 3;
  for (int i = 0; i < n_countries; ++i) {
    CountryScenario sc;
    std::ostringstream name;
    name << "C";
    name.width(width);
    name.fill('0');
    name << (i + 1);
    sc.name = name.str();
    sc.year_start = year_start;
    sc.year_end = year_end;
    sc.deaths_per_year = deaths;
    sc.truemat = truemat;
    sc.completeness = completeness;
    sc.kappa = kappa;
    const int usable = n_years - period_length + 1;
    for (int k = 0; k < studies_per_country; ++k) {
      StudyDesign d;
      d.kind = kind;
      const int offset =
          studies_per_country > 1
              ? static_cast<int>(std::llround(static_cast<double>(k) *
                                              static_cast<double>(usable - 1) /
                                              static_cast<double>(studies_per_country - 1)))
              : (usable - 1) / 2;
      d.t1 = year_start + offset;
      d.t2 = d.t1 + period_length - 1;
      sc.studies.push_back(d);
    }
    cfg.countries.push_back(sc);
  }
  cfg.validate();
  return cfg;
}

std::vector<StudyObservation> parse_studies_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.front() != kStudyColumns) {
    throw DataError(path.string() + ": unexpected studies.csv header");
  }
  std::vector<StudyObservation> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    const auto& f = rows[r];
    if (f.size() != kStudyColumns.size()) {
      throw DataError(where + ": wrong number of fields");
    }
    StudyObservation obs;
    obs.country = f[0];
    obs.t1 = static_cast<int>(parse_int_field(f[1], where));
    obs.t2 = static_cast<int>(parse_int_field(f[2], where));
    obs.z_crvs = parse_int_field(f[3], where);
    obs.z_matcrvs = parse_int_field(f[4], where);
    const auto opt = [&](const std::string& s) -> std::optional<std::int64_t> {
      if (s.empty()) return std::nullopt;
      return parse_int_field(s, where);
    };
    obs.z_truemat_crvs = opt(f[5]);
    obs.z_truemat = opt(f[6]);
    obs.z_fminus = opt(f[7]);
    obs.z_fplus = opt(f[8]);
    obs.z_uplus = opt(f[9]);
    obs.z_unreg = opt(f[10]);
    obs.z_env = opt(f[11]);
    obs.z_tot = opt(f[12]);
    obs.kind = infer_kind(obs, where);
    try {
      obs.validate();
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(std::move(obs));
  }
  return out;
}

void write_studies(const std::filesystem::path& path,
                   std::span<const StudyObservation> studies, OutFormat format) {
  Table table;
  table.columns = kStudyColumns;
  for (const auto& s : studies) {
    table.add_row({s.country, std::to_string(s.t1), std::to_string(s.t2),
                   std::to_string(s.z_crvs), std::to_string(s.z_matcrvs),
                   opt_to_string(s.z_truemat_crvs), opt_to_string(s.z_truemat),
                   opt_to_string(s.z_fminus), opt_to_string(s.z_fplus),
                   opt_to_string(s.z_uplus), opt_to_string(s.z_unreg),
                   opt_to_string(s.z_env), opt_to_string(s.z_tot)});
  }
  table.write(path, format);
}

std::vector<CrvsYearRecord> parse_crvs_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  const std::vector<std::string> header = {"country", "year", "mat_crvs",
                                           "crvs_total", "who_envelope"};
  if (rows.front() != header) {
    throw DataError(path.string() + ": unexpected crvs.csv header");
  }
  std::vector<CrvsYearRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    const auto& f = rows[r];
    if (f.size() != header.size()) {
      throw DataError(where + ": wrong number of fields");
    }
    CrvsYearRecord rec;
    rec.country = f[0];
    rec.year = static_cast<int>(parse_int_field(f[1], where));
    rec.mat_crvs = parse_int_field(f[2], where);
    rec.crvs_total = parse_int_field(f[3], where);
    rec.who_envelope = parse_real_field(f[4], where);
    try {
      rec.validate();
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_crvs(const std::filesystem::path& path,
                std::span<const CrvsYearRecord> records, OutFormat format) {
  Table table;
  table.columns = {"country", "year", "mat_crvs", "crvs_total", "who_envelope"};
  for (const auto& r : records) {
    table.add_row({r.country, std::to_string(r.year), std::to_string(r.mat_crvs),
                   std::to_string(r.crvs_total), format_real(r.who_envelope)});
  }
  table.write(path, format);
}

Dataset load_dataset(const std::filesystem::path& studies_path,
                     const std::filesystem::path& crvs_path) {
  Dataset dataset;
  dataset.studies = parse_studies_csv(studies_path);
  if (!crvs_path.empty()) dataset.crvs = parse_crvs_csv(crvs_path);
  dataset.validate();
  return dataset;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp);
    out << content;
    if (!out.good()) throw DataError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    throw DataError("Table: row width mismatch");
  }
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(columns[c]);
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << csv_escape(row[c]);
    }
    out << '\n';
  }
  return out.str();
}

std::string Table::to_json() const {
  ordered_json arr = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json obj = ordered_json::object();
    for (std::size_t c = 0; c < columns.size(); ++c) obj[columns[c]] = row[c];
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

void Table::write(const std::filesystem::path& path, OutFormat format) const {
  std::filesystem::path target = path;
  if (format == OutFormat::Json) target.replace_extension(".json");
  atomic_write_file(target, format == OutFormat::Csv ? to_csv() : to_json());
}

std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

bool run_is_complete(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "manifest.json");
}

void write_manifest(const RunArtifact& artifact, const std::string& command,
                    const std::map<std::string, std::string>& inputs) {
  ordered_json manifest = ordered_json::object();
  manifest["command"] = command;
  manifest["dataset_hash"] = artifact.dataset_hash;
  ordered_json cfg = ordered_json::object();
  for (const auto& [key, value] : artifact.config_snapshot.entries()) {
    cfg[key] = value;
  }
  manifest["config"] = std::move(cfg);
  ordered_json ins = ordered_json::object();
  for (const auto& [key, value] : inputs) ins[key] = value;
  manifest["inputs"] = std::move(ins);
  atomic_write_file(artifact.dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

std::vector<double> natural_hyper_draws(const PosteriorSamples& samples, int k) {
  const Eigen::VectorXd raw = samples.pooled(k);
  std::vector<double> out(raw.data(), raw.data() + raw.size());
  if (k == 0) {
    for (double& v : out) v = eta_to_se(v);
  } else if (k == 1) {
    for (double& v : out) v = eta_to_sp(v);
  } else if (k >= 2 && k <= 5) {
    for (double& v : out) v = std::exp(v);
  }
  return out;
}

}  // namespace

Table hyper_summary_table(const PosteriorSamples& samples) {
  const std::vector<std::string> display = {
      "lambda_world_plus", "lambda_world_minus", "sigma_plus", "sigma_minus",
      "delta_plus",        "delta_minus",        "phi"};
  const int order[7] = {0, 1, 2, 3, 4, 5, 6};
  Table table;
  table.columns = {"parameter", "q10", "q50", "q90"};
  for (int i = 0; i < 7; ++i) {
    const auto draws = natural_hyper_draws(samples, order[i]);
    table.add_row({display[i], format_real(quantile(draws, 0.10)),
                   format_real(quantile(draws, 0.50)),
                   format_real(quantile(draws, 0.90))});
  }
  return table;
}

Table diagnostics_table(const PosteriorSamples& samples) {
  Table table;
  table.columns = {"parameter", "rhat"};
  for (const auto& [name, rhat] : hyper_diagnostics(samples)) {
    table.add_row({name, std::isnan(rhat) ? "undefined" : format_real(rhat)});
  }
  return table;
}

Table hyper_draws_table(const PosteriorSamples& samples) {
  Table table;
  table.columns = {"chain",          "draw",           "eta_world_plus",
                   "eta_world_minus", "log_sigma_plus", "log_sigma_minus",
                   "log_delta_plus", "log_delta_minus", "phi"};
  for (int c = 0; c < samples.n_chains(); ++c) {
    for (long i = 0; i < samples.n_kept(); ++i) {
      std::vector<std::string> row = {std::to_string(c), std::to_string(i)};
      for (int k = 0; k < ParamLayout::hyper_dim; ++k) {
        row.push_back(format_real(samples.chains[c](i, k)));
      }
      table.add_row(std::move(row));
    }
  }
  return table;
}

PosteriorSamples read_hyper_draws_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  PosteriorSamples samples;
  samples.layout.has_hyper = true;
  samples.layout.n_params = ParamLayout::hyper_dim;
  samples.layout.names = {"eta_world_plus",  "eta_world_minus", "log_sigma_plus",
                          "log_sigma_minus", "log_delta_plus",  "log_delta_minus",
                          "phi"};
  std::map<int, std::vector<Eigen::VectorXd>> by_chain;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    const auto& f = rows[r];
    if (f.size() != 9) throw DataError(where + ": wrong number of fields");
    const int chain = static_cast<int>(parse_int_field(f[0], where));
    Eigen::VectorXd v(ParamLayout::hyper_dim);
    for (int k = 0; k < ParamLayout::hyper_dim; ++k) {
      v[k] = parse_real_field(f[2 + k], where);
    }
    by_chain[chain].push_back(std::move(v));
  }
  if (by_chain.empty()) throw DataError(path.string() + ": no draws");
  for (const auto& [chain, draws] : by_chain) {
    Eigen::MatrixXd m(static_cast<long>(draws.size()), ParamLayout::hyper_dim);
    for (std::size_t i = 0; i < draws.size(); ++i) m.row(i) = draws[i].transpose();
    samples.chains.push_back(std::move(m));
  }
  return samples;
}

Table country_summary_table(const MisclassSummary& summary) {
  Table table;
  table.columns = {"country",  "year",     "lambda_plus", "lambda_minus",
                   "v_plus",   "v_minus",  "u",           "e_plus",
                   "e_minus",  "se_q10",   "se_q90",      "sp_q10",
                   "sp_q90",   "data_informed"};
  for (const auto& row : summary.rows) {
    const auto& p = row.point;
    table.add_row({summary.country, std::to_string(row.year),
                   format_real(p.lambda_plus), format_real(p.lambda_minus),
                   format_real(p.v_plus), format_real(p.v_minus), format_real(p.u),
                   format_real(p.e_plus), format_real(p.e_minus),
                   format_real(row.se_q10), format_real(row.se_q90),
                   format_real(row.sp_q10), format_real(row.sp_q90),
                   row.data_informed ? "1" : "0"});
  }
  return table;
}

Table misclass_point_table(const MisclassPoint& point, int lag) {
  Table table;
  table.columns = {"lag",    "lambda_plus", "lambda_minus", "v_plus",
                   "v_minus", "u",           "e_plus",       "e_minus"};
  table.add_row({std::to_string(lag), format_real(point.lambda_plus),
                 format_real(point.lambda_minus), format_real(point.v_plus),
                 format_real(point.v_minus), format_real(point.u),
                 format_real(point.e_plus), format_real(point.e_minus)});
  return table;
}

Table validation_table(const ValidationReport& report) {
  Table table;
  table.columns = {"scheme",   "n_leftout", "me",          "mae",
                   "mre_pct",  "mare_pct",  "prop_below_80", "prop_above_80",
                   "n_failed_reps"};
  table.add_row({to_string(report.scheme), std::to_string(report.n_leftout),
                 format_real(report.me), format_real(report.mae),
                 format_real(report.mre_pct), format_real(report.mare_pct),
                 format_real(report.prop_below_80), format_real(report.prop_above_80),
                 std::to_string(report.n_failed_reps)});
  return table;
}

Table completeness_table(const std::vector<CompletenessAssessment>& assessments) {
  Table table;
  table.columns = {"country", "year",           "ratio",
                   "ci_upper_95", "complete_flag", "country_complete",
                   "completeness"};
  for (const auto& a : assessments) {
    for (const auto& y : a.years) {
      table.add_row({a.country, std::to_string(y.year), format_real(y.ratio),
                     format_real(y.ci_upper_95), y.complete_flag ? "1" : "0",
                     a.country_complete ? "1" : "0", format_real(a.value(y.year))});
    }
  }
  return table;
}

Table lag_table(std::span<const LagCoverage> rows) {
  Table table;
  table.columns = {"lag", "prop_below_80", "prop_above_80"};
  for (const auto& row : rows) {
    table.add_row({std::to_string(row.lag), format_real(row.prop_below),
                   format_real(row.prop_above)});
  }
  return table;
}

std::vector<SummaryRow> parse_summary_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  const auto& header = rows.front();
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError(path.string() + ": missing column " + name);
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_country = col("country");
  const auto c_year = col("year");
  const auto c_lp = col("lambda_plus"), c_lm = col("lambda_minus");
  const auto c_vp = col("v_plus"), c_vm = col("v_minus"), c_u = col("u");
  const auto c_ep = col("e_plus"), c_em = col("e_minus");
  const bool has_flag =
      std::find(header.begin(), header.end(), "data_informed") != header.end();
  std::size_t c_flag = has_flag ? col("data_informed") : 0;

  std::vector<SummaryRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    const auto& f = rows[r];
    if (f.size() != header.size()) throw DataError(where + ": wrong number of fields");
    SummaryRow row;
    row.country = f[c_country];
    row.year = static_cast<int>(parse_int_field(f[c_year], where));
    row.point.lambda_plus = parse_real_field(f[c_lp], where);
    row.point.lambda_minus = parse_real_field(f[c_lm], where);
    row.point.v_plus = parse_real_field(f[c_vp], where);
    row.point.v_minus = parse_real_field(f[c_vm], where);
    row.point.u = parse_real_field(f[c_u], where);
    row.point.e_plus = parse_real_field(f[c_ep], where);
    row.point.e_minus = parse_real_field(f[c_em], where);
    if (has_flag) row.data_informed = f[c_flag] == "1";
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace crvsadj
