#pragma once

#include <span>
#include <string>
#include <vector>

#include "crvsadj/core_types.hpp"

namespace crvsadj {

struct YearCompleteness {
  int year = 0;
  double ratio = 0.0;
  double ci_upper_95 = 0.0;
  bool complete_flag = false;  // ci_upper_95 > 0.95
};

struct CompletenessAssessment {
  std::string country;
  std::vector<YearCompleteness> years;
  bool country_complete = false;

  // completeness value used downstream: 1 when the whole series is judged
  // complete, otherwise the year ratio capped at 1
  double value(int year) const;
};

// Ratio of registered deaths to the WHO envelope over a moving window of
// `window` years centered on `year` (truncated at the series ends), plus the
// upper bound of a 95% interval treating the registered count as Poisson.
std::pair<double, double> completeness_ratio(std::span<const CrvsYearRecord> records,
                                             int year, int window = 5);

// Applies the ratio rule to every year with data for one country's series.
CompletenessAssessment assess(std::span<const CrvsYearRecord> records, int window = 5);

// Fills CrvsYearRecord::completeness from per-country assessments.
void apply_completeness(std::vector<CrvsYearRecord>& records, int window = 5);

}  // namespace crvsadj
