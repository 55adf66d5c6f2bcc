#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crvsadj {

// Input data failed a consistency check; maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure (non-finite posterior, failed initialization, ...);
// maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Death counts for one country-year split by registration status and
// true/reported maternal cause: T+/T- correctly coded maternal/non-maternal,
// F+/F- miscoded, U+/U- unregistered maternal/non-maternal.
struct SixBoxCounts {
  std::int64_t t_plus = 0;
  std::int64_t t_minus = 0;
  std::int64_t f_plus = 0;
  std::int64_t f_minus = 0;
  std::int64_t u_plus = 0;
  std::int64_t u_minus = 0;

  std::int64_t crvs_total() const { return t_plus + t_minus + f_plus + f_minus; }
  std::int64_t grand_total() const { return crvs_total() + u_plus + u_minus; }
  std::int64_t mat_crvs() const { return t_plus + f_plus; }
  std::int64_t truemat_crvs() const { return t_plus + f_minus; }

  void validate() const;
};

// Cell probabilities for the six-box partition; must sum to one.
struct ProbVector6 {
  double t_plus = 0.0;
  double t_minus = 0.0;
  double f_plus = 0.0;
  double f_minus = 0.0;
  double u_plus = 0.0;
  double u_minus = 0.0;

  double crvs_mass() const { return t_plus + t_minus + f_plus + f_minus; }
  void validate() const;
};

// What a specialized study reported, mirroring the observed data categories.
enum class StudyKind {
  TruematCrvsOnly,   // true maternal count among CRVS-registered deaths
  TruematAndUplus,   // true maternal count including unregistered maternal deaths
  FminusFplusUplus,  // false negatives, false positives, and U+
  FminusFplus,       // false negatives and false positives
  FminusUplus,       // false negatives and U+
  FminusOnly,        // false negatives only
};

const char* to_string(StudyKind kind);
StudyKind study_kind_from_string(const std::string& name);

// One specialized-study record for a country-period. z_crvs and z_matcrvs
// come from the CRVS system for the same period; the optional fields carry
// whatever the study itself counted. Absent is not zero: zero is a legal
// observed count.
struct StudyObservation {
  std::string country;
  int t1 = 0;
  int t2 = 0;
  StudyKind kind = StudyKind::TruematCrvsOnly;
  std::int64_t z_crvs = 0;
  std::int64_t z_matcrvs = 0;
  std::optional<std::int64_t> z_truemat_crvs;
  std::optional<std::int64_t> z_truemat;
  std::optional<std::int64_t> z_fminus;
  std::optional<std::int64_t> z_fplus;
  std::optional<std::int64_t> z_uplus;
  std::optional<std::int64_t> z_unreg;
  std::optional<std::int64_t> z_env;
  std::optional<std::int64_t> z_tot;

  int midpoint_year() const { return (t1 + t2) / 2; }

  // True maternal count within the CRVS when reported or implied by a
  // breakdown (T+ + F- with T+ = z_matcrvs - z_fplus); nullopt otherwise.
  std::optional<std::int64_t> truemat_crvs_implied() const;

  void validate() const;
};

// One country-year of CRVS reporting plus the WHO envelope used for
// completeness assessment.
struct CrvsYearRecord {
  std::string country;
  int year = 0;
  std::int64_t mat_crvs = 0;
  std::int64_t crvs_total = 0;
  double who_envelope = 0.0;
  double completeness = 1.0;

  void validate() const;
};

struct Dataset {
  std::vector<StudyObservation> studies;
  std::vector<CrvsYearRecord> crvs;

  void validate() const;
  std::uint64_t hash() const;
};

// CRVS-based observed proportion maternal: (T+ + F+) / CRVS total.
double crvs_pm(const SixBoxCounts& counts);

// Sums (mat_crvs, crvs_total) over [t1, t2] for one country's records;
// every year in the period must be present.
std::pair<std::int64_t, std::int64_t> aggregate_period(
    std::span<const CrvsYearRecord> records, int t1, int t2);

}  // namespace crvsadj
