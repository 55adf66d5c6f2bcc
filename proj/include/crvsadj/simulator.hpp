#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crvsadj/core_types.hpp"
#include "crvsadj/mcmc.hpp"
#include "crvsadj/process_model.hpp"

namespace crvsadj {

struct StudyDesign {
  StudyKind kind = StudyKind::TruematCrvsOnly;
  int t1 = 0;
  int t2 = 0;
};

struct CountryScenario {
  std::string name;
  int year_start = 0;
  int year_end = 0;
  std::int64_t deaths_per_year = 10000;
  double truemat = 0.01;       // true maternal probability among CRVS deaths
  double completeness = 1.0;   // constant unless a schedule is given
  std::vector<double> completeness_schedule;  // optional, one value per year
  double kappa = 1.0;          // maternal risk ratio outside vs inside CRVS
  std::vector<StudyDesign> studies;
};

struct ScenarioConfig {
  std::vector<CountryScenario> countries;
  HyperParams hyper;
  std::uint64_t seed = 1;
  // draw each country-year truemat from U(0,1) instead of the configured
  // value; used for calibration runs where truemat must follow its prior
  bool draw_truemat_uniform = false;

  void validate() const;
};

struct CountryTruth {
  std::string name;
  CountryPath path;  // true transformed sensitivity/specificity
  std::vector<double> truemat;        // per year
  std::vector<double> completeness;   // per year
  std::vector<ProbVector6> rho;       // per year
  std::vector<SixBoxCounts> counts;   // per year
};

struct GroundTruth {
  HyperParams hyper;
  std::vector<CountryTruth> countries;

  const CountryTruth& country(const std::string& name) const;
};

// Draws paths from the process model, annual six-box counts from the
// multinomial, and emits study observations plus CRVS year records.
std::pair<Dataset, GroundTruth> simulate_dataset(const ScenarioConfig& cfg);

enum class AdjustmentStrategy { Constant15, ModelBased };

struct StrategyScore {
  AdjustmentStrategy strategy;
  double mean_abs_error = 0.0;
  int n = 0;
};

// Scores adjustment strategies against the simulated truth at every study
// observation: |factor * observed CRVS PM - true PM|, averaged. ModelBased
// needs a fitted global posterior.
std::vector<StrategyScore> compare_adjustments(
    const Dataset& dataset, const GroundTruth& truth,
    std::span<const AdjustmentStrategy> strategies,
    const PosteriorSamples* global_fit = nullptr);

}  // namespace crvsadj
