#include "crvsadj/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace crvsadj {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DataError(msg);
}

}  // namespace

void SixBoxCounts::validate() const {
  require(t_plus >= 0 && t_minus >= 0 && f_plus >= 0 && f_minus >= 0 &&
              u_plus >= 0 && u_minus >= 0,
          "SixBoxCounts: negative cell count");
}

void ProbVector6::validate() const {
  const double cells[6] = {t_plus, t_minus, f_plus, f_minus, u_plus, u_minus};
  double sum = 0.0;
  for (double c : cells) {
    require(c >= 0.0 && c <= 1.0, "ProbVector6: component outside [0,1]");
    sum += c;
  }
  require(std::fabs(sum - 1.0) <= 1e-12, "ProbVector6: components do not sum to 1");
}

const char* to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::TruematCrvsOnly: return "TRUEMAT_CRVS_ONLY";
    case StudyKind::TruematAndUplus: return "TRUEMAT_AND_UPLUS";
    case StudyKind::FminusFplusUplus: return "FMINUS_FPLUS_UPLUS";
    case StudyKind::FminusFplus: return "FMINUS_FPLUS";
    case StudyKind::FminusUplus: return "FMINUS_UPLUS";
    case StudyKind::FminusOnly: return "FMINUS_ONLY";
  }
  return "UNKNOWN";
}

StudyKind study_kind_from_string(const std::string& name) {
  if (name == "TRUEMAT_CRVS_ONLY") return StudyKind::TruematCrvsOnly;
  if (name == "TRUEMAT_AND_UPLUS") return StudyKind::TruematAndUplus;
  if (name == "FMINUS_FPLUS_UPLUS") return StudyKind::FminusFplusUplus;
  if (name == "FMINUS_FPLUS") return StudyKind::FminusFplus;
  if (name == "FMINUS_UPLUS") return StudyKind::FminusUplus;
  if (name == "FMINUS_ONLY") return StudyKind::FminusOnly;
  throw DataError("unknown study kind: " + name);
}

std::optional<std::int64_t> StudyObservation::truemat_crvs_implied() const {
  if (z_truemat_crvs) return z_truemat_crvs;
  if (z_fminus && z_fplus) return (z_matcrvs - *z_fplus) + *z_fminus;
  return std::nullopt;
}

void StudyObservation::validate() const {
  require(t1 <= t2, country + ": study period has t1 > t2");
  require(z_crvs >= 0 && z_matcrvs >= 0, country + ": negative CRVS count");
  require(z_matcrvs <= z_crvs, country + ": z_matcrvs exceeds z_crvs");

  const auto nonneg = [&](const std::optional<std::int64_t>& v, const char* name) {
    if (v) require(*v >= 0, country + std::string(": negative ") + name);
  };
  nonneg(z_truemat_crvs, "z_truemat_crvs");
  nonneg(z_truemat, "z_truemat");
  nonneg(z_fminus, "z_fminus");
  nonneg(z_fplus, "z_fplus");
  nonneg(z_uplus, "z_uplus");
  nonneg(z_unreg, "z_unreg");
  nonneg(z_env, "z_env");
  nonneg(z_tot, "z_tot");

  switch (kind) {
    case StudyKind::TruematCrvsOnly:
      require(z_truemat_crvs.has_value(), country + ": TRUEMAT_CRVS_ONLY needs z_truemat_crvs");
      require(*z_truemat_crvs <= z_crvs, country + ": z_truemat_crvs exceeds z_crvs");
      break;
    case StudyKind::TruematAndUplus:
      require(z_truemat.has_value() && z_unreg.has_value(),
              country + ": TRUEMAT_AND_UPLUS needs z_truemat and z_unreg");
      require(*z_truemat <= z_crvs + *z_unreg,
              country + ": z_truemat exceeds z_crvs + z_unreg");
      break;
    case StudyKind::FminusFplusUplus:
      require(z_fminus.has_value() && z_fplus.has_value() && z_uplus.has_value(),
              country + ": FMINUS_FPLUS_UPLUS needs z_fminus, z_fplus, z_uplus");
      break;
    case StudyKind::FminusFplus:
      require(z_fminus.has_value() && z_fplus.has_value(),
              country + ": FMINUS_FPLUS needs z_fminus and z_fplus");
      break;
    case StudyKind::FminusUplus:
      require(z_fminus.has_value() && z_uplus.has_value(),
              country + ": FMINUS_UPLUS needs z_fminus and z_uplus");
      break;
    case StudyKind::FminusOnly:
      require(z_fminus.has_value(), country + ": FMINUS_ONLY needs z_fminus");
      break;
  }

  if (z_fplus) {
    require(*z_fplus <= z_matcrvs, country + ": z_fplus exceeds z_matcrvs");
  }
  if (z_fminus) {
    require(*z_fminus <= z_crvs - z_matcrvs,
            country + ": z_fminus exceeds z_crvs - z_matcrvs");
  }
  if (z_env && z_tot) {
    require(*z_env <= *z_tot, country + ": z_env exceeds z_tot");
  }
}

void CrvsYearRecord::validate() const {
  require(mat_crvs >= 0 && crvs_total >= 0, country + ": negative CRVS count");
  require(mat_crvs <= crvs_total, country + ": mat_crvs exceeds crvs_total");
  require(who_envelope > 0.0, country + ": who_envelope must be positive");
  require(completeness > 0.0 && completeness <= 1.0,
          country + ": completeness outside (0,1]");
}

void Dataset::validate() const {
  for (const auto& s : studies) s.validate();
  std::map<std::pair<std::string, int>, int> seen;
  for (const auto& r : crvs) {
    r.validate();
    if (++seen[{r.country, r.year}] > 1) {
      throw DataError(r.country + ": duplicate CRVS record for year " +
                      std::to_string(r.year));
    }
  }
}

namespace {

void fnv_put(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}

void fnv_str(std::uint64_t& h, const std::string& s) {
  fnv_put(h, s.data(), s.size());
  const char sep = '\x1f';
  fnv_put(h, &sep, 1);
}

void fnv_opt(std::uint64_t& h, const std::optional<std::int64_t>& v) {
  fnv_str(h, v ? std::to_string(*v) : std::string("."));
}

}  // namespace

std::uint64_t Dataset::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& s : studies) {
    fnv_str(h, s.country);
    fnv_str(h, std::to_string(s.t1));
    fnv_str(h, std::to_string(s.t2));
    fnv_str(h, to_string(s.kind));
    fnv_str(h, std::to_string(s.z_crvs));
    fnv_str(h, std::to_string(s.z_matcrvs));
    fnv_opt(h, s.z_truemat_crvs);
    fnv_opt(h, s.z_truemat);
    fnv_opt(h, s.z_fminus);
    fnv_opt(h, s.z_fplus);
    fnv_opt(h, s.z_uplus);
    fnv_opt(h, s.z_unreg);
    fnv_opt(h, s.z_env);
    fnv_opt(h, s.z_tot);
  }
  for (const auto& r : crvs) {
    fnv_str(h, r.country);
    fnv_str(h, std::to_string(r.year));
    fnv_str(h, std::to_string(r.mat_crvs));
    fnv_str(h, std::to_string(r.crvs_total));
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", r.who_envelope);
    fnv_str(h, buf);
  }
  return h;
}

double crvs_pm(const SixBoxCounts& counts) {
  counts.validate();
  const std::int64_t total = counts.crvs_total();
  if (total == 0) throw DataError("crvs_pm: CRVS total is zero");
  return static_cast<double>(counts.t_plus + counts.f_plus) / static_cast<double>(total);
}

std::pair<std::int64_t, std::int64_t> aggregate_period(
    std::span<const CrvsYearRecord> records, int t1, int t2) {
  if (t1 > t2) throw DataError("aggregate_period: t1 > t2");
  std::int64_t mat = 0, total = 0;
  std::vector<int> missing;
  for (int year = t1; year <= t2; ++year) {
    bool found = false;
    for (const auto& r : records) {
      if (r.year == year) {
        mat += r.mat_crvs;
        total += r.crvs_total;
        found = true;
        break;
      }
    }
    if (!found) missing.push_back(year);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "aggregate_period: missing CRVS years:";
    for (int y : missing) msg << ' ' << y;
    throw DataError(msg.str());
  }
  return {mat, total};
}

}  // namespace crvsadj
