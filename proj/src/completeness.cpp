#include "crvsadj/completeness.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace crvsadj {

double CompletenessAssessment::value(int year) const {
  if (country_complete) return 1.0;
  for (const auto& y : years) {
    if (y.year == year) return std::min(y.ratio, 1.0);
  }
  throw DataError(country + ": no completeness assessment for year " +
                  std::to_string(year));
}

std::pair<double, double> completeness_ratio(std::span<const CrvsYearRecord> records,
                                             int year, int window) {
  if (window < 1) throw DataError("completeness_ratio: window must be >= 1");
  const int half = window / 2;
  double registered = 0.0;
  double envelope = 0.0;
  bool any = false;
  for (const auto& r : records) {
    if (r.year >= year - half && r.year <= year + half) {
      registered += static_cast<double>(r.crvs_total);
      envelope += r.who_envelope;
      any = true;
    }
  }
  if (!any) {
    throw DataError("completeness_ratio: no records in window around year " +
                    std::to_string(year));
  }
  const double ratio = registered / envelope;
  // normal approximation to the Poisson count; the exact-quantile version
  // lives in the test oracle
  const double ci_upper = (registered + 1.96 * std::sqrt(registered)) / envelope;
  return {ratio, ci_upper};
}

CompletenessAssessment assess(std::span<const CrvsYearRecord> records, int window) {
  if (records.empty()) throw DataError("assess: empty CRVS series");
  const std::string country = records.front().country;
  for (const auto& r : records) {
    if (r.country != country) {
      throw DataError("assess: records span more than one country");
    }
  }

  std::vector<int> years;
  for (const auto& r : records) years.push_back(r.year);
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());

  CompletenessAssessment out;
  out.country = country;
  out.country_complete = true;
  for (int year : years) {
    auto [ratio, ci] = completeness_ratio(records, year, window);
    YearCompleteness yc;
    yc.year = year;
    yc.ratio = ratio;
    yc.ci_upper_95 = ci;
    yc.complete_flag = ci > 0.95;
    if (!yc.complete_flag) out.country_complete = false;
    out.years.push_back(yc);
  }
  return out;
}

void apply_completeness(std::vector<CrvsYearRecord>& records, int window) {
  std::map<std::string, std::vector<CrvsYearRecord>> by_country;
  for (const auto& r : records) by_country[r.country].push_back(r);
  std::map<std::string, CompletenessAssessment> assessed;
  for (const auto& [country, recs] : by_country) {
    assessed[country] = assess(recs, window);
  }
  for (auto& r : records) {
    const double v = assessed[r.country].value(r.year);
    // completeness is used as a probability downstream; keep it off zero
    r.completeness = std::max(v, 1e-12);
  }
}

}  // namespace crvsadj
