#include "crvsadj/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "crvsadj/likelihood.hpp"
#include "crvsadj/rng.hpp"
#include "crvsadj/special.hpp"

namespace crvsadj {

namespace {

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// unchecked construction: extreme proposals may put cells exactly at zero,
// which the likelihood handles by returning -inf
GammaFour make_gamma(double se, double sp, double tm) {
  GammaFour g;
  g.g_tplus = se * tm;
  g.g_fminus = tm - g.g_tplus;
  g.g_tminus = sp * (1.0 - tm);
  g.g_fplus = (1.0 - tm) - g.g_tminus;
  return g;
}

double observed_pm_estimate(const StudyObservation& obs) {
  double denom = static_cast<double>(obs.z_crvs);
  double num = 0.0;
  switch (obs.kind) {
    case StudyKind::TruematCrvsOnly:
      num = static_cast<double>(*obs.z_truemat_crvs);
      break;
    case StudyKind::TruematAndUplus:
      num = static_cast<double>(*obs.z_truemat);
      denom += static_cast<double>(*obs.z_unreg);
      break;
    case StudyKind::FminusFplus:
    case StudyKind::FminusFplusUplus:
      num = static_cast<double>(obs.z_matcrvs - *obs.z_fplus + *obs.z_fminus);
      break;
    case StudyKind::FminusOnly:
    case StudyKind::FminusUplus:
      num = static_cast<double>(obs.z_matcrvs + *obs.z_fminus);
      break;
  }
  if (denom <= 0.0) return 0.5;
  return std::clamp(num / denom, 1e-6, 1.0 - 1e-6);
}

struct ObsBinding {
  StudyLikelihood lik;
  int country = -1;
  int year = 0;
  int truemat_param = -1;
};

struct Block {
  enum Type { HyperScalar, RefScalar, IncScalar, TruematScalar };
  Type type;
  int state_index;
  int hyper_k = -1;
  int country = -1;
  int comp = 0;  // 0 = plus, 1 = minus
  int year = 0;  // calendar year of the increment
  int obs = -1;
};

// natural-scale view of the global parameters used in density evaluations
struct HyperNat {
  double eta_w_plus, eta_w_minus, sigma_plus, sigma_minus, delta_plus,
      delta_minus, phi;
};

HyperNat to_nat(const HyperParams& h) {
  return {h.eta_world_plus, h.eta_world_minus, h.sigma_plus, h.sigma_minus,
          h.delta_plus, h.delta_minus, h.phi};
}

HyperParams to_params(const HyperNat& n) {
  HyperParams h;
  h.eta_world_plus = n.eta_w_plus;
  h.eta_world_minus = n.eta_w_minus;
  h.sigma_plus = n.sigma_plus;
  h.sigma_minus = n.sigma_minus;
  h.delta_plus = n.delta_plus;
  h.delta_minus = n.delta_minus;
  h.phi = n.phi;
  return h;
}

int inc_state_index(const CountryLayout& c, int year) {
  if (year > c.t_ref) return c.offset + 2 + 2 * (year - c.t_ref - 1);
  return c.offset + 2 + 2 * (c.year_end - c.t_ref) + 2 * (c.t_ref - year - 1);
}

class ChainRunner {
 public:
  ChainRunner(const ParamLayout& layout, const std::vector<ObsBinding>& obs,
              const McmcConfig& cfg, std::uint64_t chain_seed)
      : layout_(layout), obs_(obs), cfg_(cfg), rng_(chain_seed) {
    build_blocks();
    build_affected_lists();
  }

  Eigen::MatrixXd run(int chain_index, const ProgressFn& progress);

 private:
  void build_blocks();
  void build_affected_lists();
  void initialize();
  bool refresh_caches();
  double total_log_posterior() const;

  double hier_term(int c, const HyperNat& h) const;
  double incr_terms(int c, const HyperNat& h) const;
  double all_hier(const HyperNat& h) const;
  double all_incr(const HyperNat& h) const;
  // log prior of the sampled hyper scalars, including the log-SD Jacobians
  double hyper_log_prior(const HyperNat& h, double log_sd_sum) const;

  double obs_loglik(int j, double eta_p, double eta_m, double logit_tm) const;

  const ParamLayout& layout_;
  const std::vector<ObsBinding>& obs_;
  const McmcConfig& cfg_;
  Rng rng_;

  Eigen::VectorXd x_;
  HyperNat hyper_{};
  std::vector<Eigen::ArrayXd> eta_plus_, eta_minus_;
  std::vector<double> obs_ll_;
  std::vector<std::map<int, std::vector<int>>> affected_;

  std::vector<Block> blocks_;
  std::vector<double> log_step_;
  std::vector<double> scratch_ll_;
};

void ChainRunner::build_blocks() {
  if (layout_.has_hyper) {
    for (int k = 0; k < ParamLayout::hyper_dim; ++k) {
      blocks_.push_back({Block::HyperScalar, k, k, -1, 0, 0, -1});
    }
  }
  for (int c = 0; c < static_cast<int>(layout_.countries.size()); ++c) {
    const auto& cl = layout_.countries[c];
    for (int comp = 0; comp < 2; ++comp) {
      blocks_.push_back({Block::RefScalar, cl.offset + comp, -1, c, comp, 0, -1});
    }
    for (int year = cl.t_ref + 1; year <= cl.year_end; ++year) {
      for (int comp = 0; comp < 2; ++comp) {
        blocks_.push_back({Block::IncScalar, inc_state_index(cl, year) + comp, -1,
                           c, comp, year, -1});
      }
    }
    for (int year = cl.t_ref - 1; year >= cl.year_start; --year) {
      for (int comp = 0; comp < 2; ++comp) {
        blocks_.push_back({Block::IncScalar, inc_state_index(cl, year) + comp, -1,
                           c, comp, year, -1});
      }
    }
  }
  for (int j = 0; j < static_cast<int>(obs_.size()); ++j) {
    blocks_.push_back(
        {Block::TruematScalar, layout_.truemat_offset[j], -1, -1, 0, 0, j});
  }
  log_step_.assign(blocks_.size(), std::log(0.5));
}

void ChainRunner::build_affected_lists() {
  affected_.resize(layout_.countries.size());
  for (int j = 0; j < static_cast<int>(obs_.size()); ++j) {
    const auto& b = obs_[j];
    const auto& cl = layout_.countries[b.country];
    for (int year = cl.t_ref + 1; year <= b.year; ++year) {
      affected_[b.country][year].push_back(j);
    }
    for (int year = cl.t_ref - 1; year >= b.year; --year) {
      affected_[b.country][year].push_back(j);
    }
  }
}

double ChainRunner::obs_loglik(int j, double eta_p, double eta_m,
                               double logit_tm) const {
  return obs_[j].lik(
      make_gamma(eta_to_se(eta_p), eta_to_sp(eta_m), sigmoid(logit_tm)));
}

bool ChainRunner::refresh_caches() {
  const int nc = static_cast<int>(layout_.countries.size());
  eta_plus_.resize(nc);
  eta_minus_.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const auto& cl = layout_.countries[c];
    eta_plus_[c] = Eigen::ArrayXd::Zero(cl.n_years());
    eta_minus_[c] = Eigen::ArrayXd::Zero(cl.n_years());
    const int ref = cl.t_ref - cl.year_start;
    eta_plus_[c][ref] = x_[cl.offset];
    eta_minus_[c][ref] = x_[cl.offset + 1];
    for (int year = cl.t_ref + 1; year <= cl.year_end; ++year) {
      const int i = year - cl.year_start;
      const int idx = inc_state_index(cl, year);
      eta_plus_[c][i] = eta_plus_[c][i - 1] + x_[idx];
      eta_minus_[c][i] = eta_minus_[c][i - 1] + x_[idx + 1];
    }
    for (int year = cl.t_ref - 1; year >= cl.year_start; --year) {
      const int i = year - cl.year_start;
      const int idx = inc_state_index(cl, year);
      eta_plus_[c][i] = eta_plus_[c][i + 1] + x_[idx];
      eta_minus_[c][i] = eta_minus_[c][i + 1] + x_[idx + 1];
    }
  }
  obs_ll_.assign(obs_.size(), 0.0);
  for (int j = 0; j < static_cast<int>(obs_.size()); ++j) {
    const auto& b = obs_[j];
    const auto& cl = layout_.countries[b.country];
    const int i = b.year - cl.year_start;
    obs_ll_[j] = obs_loglik(j, eta_plus_[b.country][i], eta_minus_[b.country][i],
                            x_[layout_.truemat_offset[j]]);
  }
  return std::isfinite(total_log_posterior());
}

double ChainRunner::hier_term(int c, const HyperNat& h) const {
  const auto& cl = layout_.countries[c];
  return bvn_logpdf(x_[cl.offset], x_[cl.offset + 1], h.eta_w_plus, h.eta_w_minus,
                    h.sigma_plus, h.sigma_minus, h.phi);
}

double ChainRunner::incr_terms(int c, const HyperNat& h) const {
  const auto& cl = layout_.countries[c];
  double lp = 0.0;
  for (int year = cl.year_start; year <= cl.year_end; ++year) {
    if (year == cl.t_ref) continue;
    const int idx = inc_state_index(cl, year);
    lp += bvn_logpdf(x_[idx], x_[idx + 1], 0.0, 0.0, h.delta_plus, h.delta_minus,
                     h.phi);
  }
  return lp;
}

double ChainRunner::all_hier(const HyperNat& h) const {
  double lp = 0.0;
  for (int c = 0; c < static_cast<int>(layout_.countries.size()); ++c) {
    lp += hier_term(c, h);
  }
  return lp;
}

double ChainRunner::all_incr(const HyperNat& h) const {
  double lp = 0.0;
  for (int c = 0; c < static_cast<int>(layout_.countries.size()); ++c) {
    lp += incr_terms(c, h);
  }
  return lp;
}

double ChainRunner::hyper_log_prior(const HyperNat& h, double log_sd_sum) const {
  return log_prior_hyper(to_params(h)) + log_sd_sum;
}

double ChainRunner::total_log_posterior() const {
  double lp = 0.0;
  if (layout_.has_hyper) {
    lp += hyper_log_prior(hyper_, x_[2] + x_[3] + x_[4] + x_[5]);
  }
  lp += all_hier(hyper_) + all_incr(hyper_);
  for (int j = 0; j < static_cast<int>(obs_.size()); ++j) {
    const double t = x_[layout_.truemat_offset[j]];
    lp += log_sigmoid(t) + log_sigmoid(-t) + obs_ll_[j];
  }
  return lp;
}

void ChainRunner::initialize() {
  x_ = Eigen::VectorXd::Zero(layout_.n_params);

  const double eta_w_plus0 = se_to_eta(0.55);
  const double eta_w_minus0 = sp_to_eta(0.9975);
  const double log_sd0 = std::log(0.674);  // half-normal(0,1) median

  if (layout_.has_hyper) {
    x_[0] = eta_w_plus0;
    x_[1] = eta_w_minus0;
    x_[2] = x_[3] = x_[4] = x_[5] = log_sd0;
    x_[6] = 0.0;
  }
  hyper_ = to_nat(layout_.decode_hyper(x_));

  for (const auto& cl : layout_.countries) {
    x_[cl.offset] = hyper_.eta_w_plus;
    x_[cl.offset + 1] = hyper_.eta_w_minus;
  }
  for (int j = 0; j < static_cast<int>(obs_.size()); ++j) {
    const double pm = observed_pm_estimate(obs_[j].lik.observation());
    x_[layout_.truemat_offset[j]] = std::log(pm / (1.0 - pm));
  }

  if (refresh_caches()) return;

  for (int attempt = 0; attempt < cfg_.max_init_retries; ++attempt) {
    for (int k = 0; k < layout_.n_params; ++k) {
      x_[k] += rng_.normal(0.0, 0.3);
    }
    hyper_ = to_nat(layout_.decode_hyper(x_));
    if (layout_.has_hyper &&
        !std::isfinite(log_prior_hyper(layout_.decode_hyper(x_)))) {
      continue;
    }
    if (refresh_caches()) return;
  }
  throw NumericalError("mcmc: could not find a finite starting density");
}

Eigen::MatrixXd ChainRunner::run(int chain_index, const ProgressFn& progress) {
  initialize();

  const long n_kept = cfg_.n_kept_per_chain();
  Eigen::MatrixXd kept(n_kept, layout_.n_params);
  long kept_row = 0;

  std::vector<int> batch_accept(blocks_.size(), 0);
  long batch = 0;

  for (long iter = 0; iter < cfg_.n_iter; ++iter) {
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const Block& b = blocks_[bi];
      const double d = std::exp(log_step_[bi]) * rng_.normal();
      const double log_u = std::log(rng_.uniform_pos());

      switch (b.type) {
        case Block::HyperScalar: {
          const double old_x = x_[b.state_index];
          const double new_x = old_x + d;
          HyperNat h_new = hyper_;
          switch (b.hyper_k) {
            case 0: h_new.eta_w_plus = new_x; break;
            case 1: h_new.eta_w_minus = new_x; break;
            case 2: h_new.sigma_plus = std::exp(new_x); break;
            case 3: h_new.sigma_minus = std::exp(new_x); break;
            case 4: h_new.delta_plus = std::exp(new_x); break;
            case 5: h_new.delta_minus = std::exp(new_x); break;
            case 6: h_new.phi = new_x; break;
          }
          const double log_sd_sum = x_[2] + x_[3] + x_[4] + x_[5];
          const double jac_shift =
              (b.hyper_k >= 2 && b.hyper_k <= 5) ? d : 0.0;
          const double prior_new = hyper_log_prior(h_new, log_sd_sum + jac_shift);
          if (!std::isfinite(prior_new)) break;
          double delta = prior_new - hyper_log_prior(hyper_, log_sd_sum);
          if (b.hyper_k <= 3 || b.hyper_k == 6) {
            delta += all_hier(h_new) - all_hier(hyper_);
          }
          if (b.hyper_k >= 4) {
            delta += all_incr(h_new) - all_incr(hyper_);
          }
          if (std::isfinite(delta) && log_u < delta) {
            x_[b.state_index] = new_x;
            hyper_ = h_new;
            ++batch_accept[bi];
          }
          break;
        }
        case Block::RefScalar: {
          const auto& cl = layout_.countries[b.country];
          const int idx = cl.offset + b.comp;
          const double rp = x_[cl.offset] + (b.comp == 0 ? d : 0.0);
          const double rm = x_[cl.offset + 1] + (b.comp == 1 ? d : 0.0);
          double delta = bvn_logpdf(rp, rm, hyper_.eta_w_plus, hyper_.eta_w_minus,
                                    hyper_.sigma_plus, hyper_.sigma_minus,
                                    hyper_.phi) -
                         hier_term(b.country, hyper_);
          scratch_ll_.assign(cl.obs_indices.size(), 0.0);
          for (std::size_t q = 0; q < cl.obs_indices.size(); ++q) {
            const int j = cl.obs_indices[q];
            const int i = obs_[j].year - cl.year_start;
            const double ep = eta_plus_[b.country][i] + (b.comp == 0 ? d : 0.0);
            const double em = eta_minus_[b.country][i] + (b.comp == 1 ? d : 0.0);
            scratch_ll_[q] = obs_loglik(j, ep, em, x_[layout_.truemat_offset[j]]);
            delta += scratch_ll_[q] - obs_ll_[j];
          }
          if (std::isfinite(delta) && log_u < delta) {
            x_[idx] += d;
            (b.comp == 0 ? eta_plus_[b.country] : eta_minus_[b.country]) += d;
            for (std::size_t q = 0; q < cl.obs_indices.size(); ++q) {
              obs_ll_[cl.obs_indices[q]] = scratch_ll_[q];
            }
            ++batch_accept[bi];
          }
          break;
        }
        case Block::IncScalar: {
          const auto& cl = layout_.countries[b.country];
          const int idx0 = inc_state_index(cl, b.year);
          const int idx = idx0 + b.comp;
          const double ip = x_[idx0] + (b.comp == 0 ? d : 0.0);
          const double im = x_[idx0 + 1] + (b.comp == 1 ? d : 0.0);
          double delta = bvn_logpdf(ip, im, 0.0, 0.0, hyper_.delta_plus,
                                    hyper_.delta_minus, hyper_.phi) -
                         bvn_logpdf(x_[idx0], x_[idx0 + 1], 0.0, 0.0,
                                    hyper_.delta_plus, hyper_.delta_minus,
                                    hyper_.phi);
          const auto it = affected_[b.country].find(b.year);
          const std::vector<int>* js =
              it == affected_[b.country].end() ? nullptr : &it->second;
          if (js) {
            scratch_ll_.assign(js->size(), 0.0);
            for (std::size_t q = 0; q < js->size(); ++q) {
              const int j = (*js)[q];
              const int i = obs_[j].year - cl.year_start;
              const double ep = eta_plus_[b.country][i] + (b.comp == 0 ? d : 0.0);
              const double em = eta_minus_[b.country][i] + (b.comp == 1 ? d : 0.0);
              scratch_ll_[q] = obs_loglik(j, ep, em, x_[layout_.truemat_offset[j]]);
              delta += scratch_ll_[q] - obs_ll_[j];
            }
          }
          if (std::isfinite(delta) && log_u < delta) {
            x_[idx] += d;
            auto& arr = b.comp == 0 ? eta_plus_[b.country] : eta_minus_[b.country];
            if (b.year > cl.t_ref) {
              const int from = b.year - cl.year_start;
              for (int i = from; i < cl.n_years(); ++i) arr[i] += d;
            } else {
              const int to = b.year - cl.year_start;
              for (int i = 0; i <= to; ++i) arr[i] += d;
            }
            if (js) {
              for (std::size_t q = 0; q < js->size(); ++q) {
                obs_ll_[(*js)[q]] = scratch_ll_[q];
              }
            }
            ++batch_accept[bi];
          }
          break;
        }
        case Block::TruematScalar: {
          const int idx = layout_.truemat_offset[b.obs];
          const double old_x = x_[idx];
          const double new_x = old_x + d;
          const auto& ob = obs_[b.obs];
          const auto& cl = layout_.countries[ob.country];
          const int i = ob.year - cl.year_start;
          const double new_ll = obs_loglik(
              b.obs, eta_plus_[ob.country][i], eta_minus_[ob.country][i], new_x);
          const double delta = log_sigmoid(new_x) + log_sigmoid(-new_x) -
                               log_sigmoid(old_x) - log_sigmoid(-old_x) +
                               new_ll - obs_ll_[b.obs];
          if (std::isfinite(delta) && log_u < delta) {
            x_[idx] = new_x;
            obs_ll_[b.obs] = new_ll;
            ++batch_accept[bi];
          }
          break;
        }
      }
    }

    // step-size adaptation during burn-in, frozen afterward
    if (iter < cfg_.n_burn && (iter + 1) % cfg_.adapt_window == 0) {
      ++batch;
      const double gain = std::min(1.0, 3.0 / std::sqrt(static_cast<double>(batch)));
      for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const double rate =
            static_cast<double>(batch_accept[bi]) / cfg_.adapt_window;
        log_step_[bi] += gain * (rate - cfg_.target_accept);
        batch_accept[bi] = 0;
      }
    }

    if (iter >= cfg_.n_burn && (iter - cfg_.n_burn) % cfg_.thin == 0 &&
        kept_row < n_kept) {
      kept.row(kept_row++) = x_.transpose();
    }
    if (progress && cfg_.progress_every > 0 &&
        (iter + 1) % cfg_.progress_every == 0) {
      progress(chain_index, iter + 1, cfg_.n_iter);
    }
  }
  return kept;
}

}  // namespace

McmcConfig McmcConfig::desk() {
  McmcConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iter = 4000;
  cfg.n_burn = 2000;
  cfg.thin = 2;
  return cfg;
}

void McmcConfig::validate() const {
  if (n_chains < 1) throw DataError("McmcConfig: n_chains must be >= 1");
  if (n_burn >= n_iter) throw DataError("McmcConfig: n_burn must be below n_iter");
  if (n_burn < 0) throw DataError("McmcConfig: n_burn must be >= 0");
  if (thin < 1) throw DataError("McmcConfig: thin must be >= 1");
  if (adapt_window < 1) throw DataError("McmcConfig: adapt_window must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw DataError("McmcConfig: target_accept outside (0,1)");
  }
}

int ParamLayout::country_index(const std::string& country) const {
  for (int c = 0; c < static_cast<int>(countries.size()); ++c) {
    if (countries[c].country == country) return c;
  }
  return -1;
}

HyperParams ParamLayout::decode_hyper(const Eigen::VectorXd& state) const {
  if (!has_hyper) return fixed_hyper;
  HyperParams h;
  h.eta_world_plus = state[0];
  h.eta_world_minus = state[1];
  h.sigma_plus = std::exp(state[2]);
  h.sigma_minus = std::exp(state[3]);
  h.delta_plus = std::exp(state[4]);
  h.delta_minus = std::exp(state[5]);
  h.phi = state[6];
  return h;
}

CountryPath ParamLayout::decode_path(const Eigen::VectorXd& state, int country) const {
  const auto& cl = countries.at(country);
  CountryPath path;
  path.country = cl.country;
  path.t_ref = cl.t_ref;
  path.year_start = cl.year_start;
  path.year_end = cl.year_end;
  const int n = cl.n_years();
  path.eta_plus = Eigen::ArrayXd::Zero(n);
  path.eta_minus = Eigen::ArrayXd::Zero(n);
  const int ref = cl.t_ref - cl.year_start;
  path.eta_plus[ref] = state[cl.offset];
  path.eta_minus[ref] = state[cl.offset + 1];
  for (int year = cl.t_ref + 1; year <= cl.year_end; ++year) {
    const int i = year - cl.year_start;
    const int idx = inc_state_index(cl, year);
    path.eta_plus[i] = path.eta_plus[i - 1] + state[idx];
    path.eta_minus[i] = path.eta_minus[i - 1] + state[idx + 1];
  }
  for (int year = cl.t_ref - 1; year >= cl.year_start; --year) {
    const int i = year - cl.year_start;
    const int idx = inc_state_index(cl, year);
    path.eta_plus[i] = path.eta_plus[i + 1] + state[idx];
    path.eta_minus[i] = path.eta_minus[i + 1] + state[idx + 1];
  }
  for (int j : cl.obs_indices) {
    path.truemat.push_back(sigmoid(state[truemat_offset.at(j)]));
  }
  return path;
}

std::pair<double, double> ParamLayout::se_sp_at(const Eigen::VectorXd& state,
                                                int country, int year) const {
  const auto& cl = countries.at(country);
  if (year < cl.year_start || year > cl.year_end) {
    throw DataError(cl.country + ": year outside sampled span");
  }
  double ep = state[cl.offset];
  double em = state[cl.offset + 1];
  if (year > cl.t_ref) {
    for (int t = cl.t_ref + 1; t <= year; ++t) {
      const int idx = inc_state_index(cl, t);
      ep += state[idx];
      em += state[idx + 1];
    }
  } else if (year < cl.t_ref) {
    for (int t = cl.t_ref - 1; t >= year; --t) {
      const int idx = inc_state_index(cl, t);
      ep += state[idx];
      em += state[idx + 1];
    }
  }
  return {eta_to_se(ep), eta_to_sp(em)};
}

ParamLayout build_layout(const Dataset& dataset, bool with_hyper,
                         const HyperParams& fixed) {
  ParamLayout layout;
  layout.has_hyper = with_hyper;
  layout.fixed_hyper = fixed;

  // countries sorted by name; spans from study periods, falling back to the
  // CRVS midyear for countries without studies
  std::map<std::string, std::pair<int, int>> study_span;
  std::map<std::string, std::pair<int, int>> crvs_span;
  for (const auto& s : dataset.studies) {
    auto it = study_span.find(s.country);
    if (it == study_span.end()) {
      study_span[s.country] = {s.t1, s.t2};
    } else {
      it->second.first = std::min(it->second.first, s.t1);
      it->second.second = std::max(it->second.second, s.t2);
    }
  }
  for (const auto& r : dataset.crvs) {
    auto it = crvs_span.find(r.country);
    if (it == crvs_span.end()) {
      crvs_span[r.country] = {r.year, r.year};
    } else {
      it->second.first = std::min(it->second.first, r.year);
      it->second.second = std::max(it->second.second, r.year);
    }
  }
  std::set<std::string> names;
  for (const auto& [name, span] : study_span) names.insert(name);
  for (const auto& [name, span] : crvs_span) names.insert(name);
  if (names.empty()) throw DataError("build_layout: dataset has no countries");

  int offset = with_hyper ? ParamLayout::hyper_dim : 0;
  if (with_hyper) {
    layout.names = {"eta_world_plus",  "eta_world_minus", "log_sigma_plus",
                    "log_sigma_minus", "log_delta_plus",  "log_delta_minus",
                    "phi"};
  }
  for (const auto& name : names) {
    CountryLayout cl;
    cl.country = name;
    if (auto it = study_span.find(name); it != study_span.end()) {
      cl.year_start = it->second.first;
      cl.year_end = it->second.second;
      cl.t_ref = (cl.year_start + cl.year_end) / 2;
    } else {
      const auto& span = crvs_span.at(name);
      cl.t_ref = (span.first + span.second) / 2;
      cl.year_start = cl.year_end = cl.t_ref;
    }
    cl.offset = offset;
    offset += cl.n_params();
    layout.names.push_back("ref_plus[" + name + "]");
    layout.names.push_back("ref_minus[" + name + "]");
    for (int year = cl.t_ref + 1; year <= cl.year_end; ++year) {
      layout.names.push_back("inc_plus[" + name + "," + std::to_string(year) + "]");
      layout.names.push_back("inc_minus[" + name + "," + std::to_string(year) + "]");
    }
    for (int year = cl.t_ref - 1; year >= cl.year_start; --year) {
      layout.names.push_back("inc_plus[" + name + "," + std::to_string(year) + "]");
      layout.names.push_back("inc_minus[" + name + "," + std::to_string(year) + "]");
    }
    layout.countries.push_back(cl);
  }
  for (int j = 0; j < static_cast<int>(dataset.studies.size()); ++j) {
    const auto& s = dataset.studies[j];
    const int c = layout.country_index(s.country);
    layout.countries[c].obs_indices.push_back(j);
    layout.truemat_offset.push_back(offset++);
    layout.names.push_back("logit_truemat[" + std::to_string(j) + "]");
  }
  layout.n_params = offset;
  return layout;
}

namespace {

PosteriorSamples run_fit(const Dataset& dataset, const ParamLayout& layout,
                         const McmcConfig& config, const ProgressFn& progress) {
  config.validate();
  dataset.validate();

  std::vector<ObsBinding> bindings;
  bindings.reserve(dataset.studies.size());
  for (int j = 0; j < static_cast<int>(dataset.studies.size()); ++j) {
    const auto& s = dataset.studies[j];
    bindings.push_back(ObsBinding{StudyLikelihood(s, config.apply_constraints),
                                  layout.country_index(s.country),
                                  s.midpoint_year(), layout.truemat_offset[j]});
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Eigen::MatrixXd> chains(config.n_chains);
  std::vector<std::exception_ptr> errors(config.n_chains);
  std::mutex progress_mutex;
  ProgressFn locked_progress;
  if (progress) {
    locked_progress = [&](int chain, long iter, long n_iter) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(chain, iter, n_iter);
    };
  }

  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  const int n_workers =
      std::min(config.n_chains, config.n_threads > 0 ? config.n_threads : hw);

  std::atomic<int> next_chain{0};
  auto worker = [&]() {
    for (;;) {
      const int c = next_chain.fetch_add(1);
      if (c >= config.n_chains) return;
      try {
        ChainRunner runner(layout, bindings, config,
                           Rng::mix(config.seed, static_cast<std::uint64_t>(c)));
        chains[c] = runner.run(c, locked_progress);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PosteriorSamples out;
  out.layout = layout;
  out.chains = std::move(chains);
  out.config = config;
  out.dataset_hash = dataset.hash();
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

PosteriorSamples fit_global(const Dataset& dataset, const McmcConfig& config,
                            ProgressFn progress) {
  const ParamLayout layout = build_layout(dataset, true);
  return run_fit(dataset, layout, config, progress);
}

PosteriorSamples fit_fixed_hyper(const Dataset& dataset, const HyperParams& hyper,
                                 const McmcConfig& config, ProgressFn progress) {
  hyper.validate();
  const ParamLayout layout = build_layout(dataset, false, hyper);
  return run_fit(dataset, layout, config, progress);
}

HyperParams PosteriorSamples::hyper_draw(int chain, long i) const {
  return layout.decode_hyper(chains.at(chain).row(i).transpose());
}

CountryPath PosteriorSamples::path_draw(int chain, long i, int country) const {
  return layout.decode_path(chains.at(chain).row(i).transpose(), country);
}

std::pair<double, double> PosteriorSamples::se_sp_draw(int chain, long i,
                                                       int country, int year) const {
  return layout.se_sp_at(chains.at(chain).row(i).transpose(), country, year);
}

double PosteriorSamples::truemat_draw(int chain, long i, int obs) const {
  return sigmoid(chains.at(chain)(i, layout.truemat_offset.at(obs)));
}

Eigen::VectorXd PosteriorSamples::pooled(int param) const {
  Eigen::VectorXd out(total_draws());
  long r = 0;
  for (const auto& chain : chains) {
    out.segment(r, chain.rows()) = chain.col(param);
    r += chain.rows();
  }
  return out;
}

int PosteriorSamples::param_index(const std::string& name) const {
  for (int k = 0; k < static_cast<int>(layout.names.size()); ++k) {
    if (layout.names[k] == name) return k;
  }
  throw DataError("unknown parameter name: " + name);
}

double gelman_rubin(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) throw DataError("gelman_rubin: need at least 2 chains");
  for (const auto& c : chains) {
    if (c.size() < 10) throw DataError("gelman_rubin: need >= 10 draws per chain");
  }
  std::vector<Eigen::VectorXd> halves;
  for (const auto& c : chains) {
    const long n = c.size() / 2;
    halves.push_back(c.head(n));
    halves.push_back(c.tail(n));
  }
  const long m = static_cast<long>(halves.size());
  const long n = halves.front().size();
  Eigen::VectorXd means(m), vars(m);
  for (long j = 0; j < m; ++j) {
    means[j] = halves[j].mean();
    vars[j] =
        (halves[j].array() - means[j]).square().sum() / static_cast<double>(n - 1);
  }
  const double grand = means.mean();
  const double b_over_n =
      (means.array() - grand).square().sum() / static_cast<double>(m - 1);
  const double w = vars.mean();
  if (w <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double var_hat =
      (static_cast<double>(n - 1) / static_cast<double>(n)) * w + b_over_n;
  return std::sqrt(var_hat / w);
}

double gelman_rubin(const PosteriorSamples& samples, int param) {
  std::vector<Eigen::VectorXd> per_chain;
  per_chain.reserve(samples.chains.size());
  for (const auto& chain : samples.chains) per_chain.push_back(chain.col(param));
  return gelman_rubin(per_chain);
}

double gelman_rubin(const PosteriorSamples& samples, const std::string& name) {
  return gelman_rubin(samples, samples.param_index(name));
}

std::vector<std::pair<std::string, double>> hyper_diagnostics(
    const PosteriorSamples& samples) {
  std::vector<std::pair<std::string, double>> out;
  if (!samples.layout.has_hyper) return out;
  for (int k = 0; k < ParamLayout::hyper_dim; ++k) {
    out.emplace_back(samples.layout.names[k], gelman_rubin(samples, k));
  }
  return out;
}

}  // namespace crvsadj
