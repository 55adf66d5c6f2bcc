#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crvsadj/core_types.hpp"
#include "crvsadj/process_model.hpp"

namespace crvsadj {

struct McmcConfig {
  int n_chains = 10;
  long n_iter = 40000;
  long n_burn = 10000;
  int thin = 20;
  std::uint64_t seed = 1;
  int adapt_window = 50;
  double target_accept = 0.44;
  bool apply_constraints = true;
  int max_init_retries = 20;
  long progress_every = 0;  // 0 disables progress reporting
  int n_threads = 0;        // 0 = hardware concurrency

  long n_kept_per_chain() const { return (n_iter - n_burn) / thin; }

  // minutes-scale configuration for tests and experiments
  static McmcConfig desk();

  void validate() const;
};

// Where each sampled scalar lives in the flat state vector. Per country the
// layout is [ref+, ref-, inc+(t), inc-(t), ...] with forward increments for
// years after the reference year and backward increments for years before;
// a path value is the reference pair plus the cumulated increments.
struct CountryLayout {
  std::string country;
  int year_start = 0;
  int year_end = 0;
  int t_ref = 0;
  int offset = 0;  // index of ref+ in the state vector
  std::vector<int> obs_indices;

  int n_years() const { return year_end - year_start + 1; }
  int n_params() const { return 2 * n_years(); }
};

struct ParamLayout {
  bool has_hyper = true;
  HyperParams fixed_hyper;  // used when has_hyper is false
  std::vector<CountryLayout> countries;
  std::vector<int> truemat_offset;  // one per study observation
  int n_params = 0;
  std::vector<std::string> names;

  static constexpr int hyper_dim = 7;
  // hyper state order: eta_world+, eta_world-, log sigma+, log sigma-,
  // log delta+, log delta-, phi
  int country_index(const std::string& country) const;
  HyperParams decode_hyper(const Eigen::VectorXd& state) const;
  CountryPath decode_path(const Eigen::VectorXd& state, int country) const;
  std::pair<double, double> se_sp_at(const Eigen::VectorXd& state, int country,
                                     int year) const;
};

ParamLayout build_layout(const Dataset& dataset, bool with_hyper,
                         const HyperParams& fixed = HyperParams{});

struct PosteriorSamples {
  ParamLayout layout;
  std::vector<Eigen::MatrixXd> chains;  // n_kept x n_params, transformed scale
  McmcConfig config;
  std::uint64_t dataset_hash = 0;
  double wall_seconds = 0.0;

  int n_chains() const { return static_cast<int>(chains.size()); }
  long n_kept() const { return chains.empty() ? 0 : chains.front().rows(); }
  long total_draws() const { return n_kept() * n_chains(); }

  HyperParams hyper_draw(int chain, long i) const;
  CountryPath path_draw(int chain, long i, int country) const;
  std::pair<double, double> se_sp_draw(int chain, long i, int country, int year) const;
  double truemat_draw(int chain, long i, int obs) const;

  // all chains stacked, one column of the state
  Eigen::VectorXd pooled(int param) const;
  int param_index(const std::string& name) const;
};

using ProgressFn = std::function<void(int chain, long iter, long n_iter)>;

// Samples the joint posterior of the global parameters, every country path,
// and the per-study true maternal probabilities.
PosteriorSamples fit_global(const Dataset& dataset, const McmcConfig& config,
                            ProgressFn progress = {});

// Same sampler with the global parameters frozen; used for one-country fits.
PosteriorSamples fit_fixed_hyper(const Dataset& dataset, const HyperParams& hyper,
                                 const McmcConfig& config, ProgressFn progress = {});

// Split-chain potential scale reduction factor. Returns NaN (diagnostic
// undefined) when the within-chain variance vanishes.
double gelman_rubin(const std::vector<Eigen::VectorXd>& chains);
double gelman_rubin(const PosteriorSamples& samples, int param);
double gelman_rubin(const PosteriorSamples& samples, const std::string& name);

// R-hat for the seven global parameters, by name.
std::vector<std::pair<std::string, double>> hyper_diagnostics(
    const PosteriorSamples& samples);

}  // namespace crvsadj
