#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crvsadj/bmat_bridge.hpp"
#include "crvsadj/completeness.hpp"
#include "crvsadj/core_types.hpp"
#include "crvsadj/mcmc.hpp"
#include "crvsadj/postprocess.hpp"
#include "crvsadj/simulator.hpp"
#include "crvsadj/validation.hpp"

namespace crvsadj {

enum class OutFormat { Csv, Json };

// Flat key = value configuration file; '#' starts a comment. Every runtime
// knob has a key here so a run is reproducible from its config snapshot.
class Config {
 public:
  Config() = default;

  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return entries_; }

  McmcConfig mcmc() const;
  KappaModel kappa() const;
  ScenarioConfig scenario() const;

 private:
  std::map<std::string, std::string> entries_;
};

// studies.csv: country,t1,t2,z_crvs,z_matcrvs,z_truemat_crvs,z_truemat,
//              z_fminus,z_fplus,z_uplus,z_unreg,z_env,z_tot (blank = absent);
// the study kind is inferred from which columns are present.
std::vector<StudyObservation> parse_studies_csv(const std::filesystem::path& path);
void write_studies(const std::filesystem::path& path,
                   std::span<const StudyObservation> studies,
                   OutFormat format = OutFormat::Csv);

// crvs.csv: country,year,mat_crvs,crvs_total,who_envelope
std::vector<CrvsYearRecord> parse_crvs_csv(const std::filesystem::path& path);
void write_crvs(const std::filesystem::path& path,
                std::span<const CrvsYearRecord> records,
                OutFormat format = OutFormat::Csv);

Dataset load_dataset(const std::filesystem::path& studies_path,
                     const std::filesystem::path& crvs_path);

// temp file + rename in the target directory
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// generic table writer shared by every artifact: header + string rows
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string to_csv() const;
  std::string to_json() const;
  void write(const std::filesystem::path& path, OutFormat format) const;
};

std::string format_real(double x);

// run artifacts
struct RunArtifact {
  std::filesystem::path dir;
  Config config_snapshot;
  std::uint64_t dataset_hash = 0;
  double wall_seconds = 0.0;  // reported to the console, never serialized
};

bool run_is_complete(const std::filesystem::path& dir);
void write_manifest(const RunArtifact& artifact, const std::string& command,
                    const std::map<std::string, std::string>& inputs);

// posterior summary tables
Table hyper_summary_table(const PosteriorSamples& samples);
Table diagnostics_table(const PosteriorSamples& samples);
Table hyper_draws_table(const PosteriorSamples& samples);
Table country_summary_table(const MisclassSummary& summary);
Table misclass_point_table(const MisclassPoint& point, int lag);
Table validation_table(const ValidationReport& report);
Table completeness_table(const std::vector<CompletenessAssessment>& assessments);
Table lag_table(std::span<const LagCoverage> rows);

// parse a hyper_draws table back into usable posterior draws (hyper only)
PosteriorSamples read_hyper_draws_csv(const std::filesystem::path& path);

// country-year misclassification summaries written by fit-country / fit
struct SummaryRow {
  std::string country;
  int year = 0;
  MisclassPoint point;
  bool data_informed = true;
};
std::vector<SummaryRow> parse_summary_csv(const std::filesystem::path& path);

}  // namespace crvsadj
