#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mmm/ars.hpp"
#include "mmm/full_conditional.hpp"
#include "mmm/lattice.hpp"
#include "mmm/model.hpp"
#include "mmm/pbf.hpp"
#include "mmm/prior.hpp"

namespace mmm {

struct RunConfig {
  PriorConfig prior = PriorConfig::with_radius(5.0);
  double nu = 0.5;
  int r_ars = 10;
  long iterations = 1'250'000;
  long burnin = 250'000;
  long stride = 50;
  double prob_param_move = 0.55;
  std::uint64_t seed = 1;

  void validate() const {
    prior.validate();
    if (!(nu >= 0.0)) throw std::domain_error("nu must be non-negative");
    if (r_ars < 2) throw std::domain_error("r_ars must be at least 2");
    if (iterations < 0) throw std::domain_error("iterations must be non-negative");
    if (burnin < 0) throw std::domain_error("burnin must be non-negative");
    if (stride < 1) throw std::domain_error("stride must be at least 1");
    if (!(prob_param_move >= 0.0 && prob_param_move <= 1.0)) {
      throw std::domain_error("prob_param_move must lie in [0,1]");
    }
  }
};

enum class MoveKind { param, add, remove, null };

inline const char* to_string(MoveKind k) {
  switch (k) {
    case MoveKind::param: return "param";
    case MoveKind::add: return "add";
    case MoveKind::remove: return "remove";
    case MoveKind::null: return "null";
  }
  return "null";
}

inline MoveKind parse_move_kind(const std::string& s) {
  if (s == "param") return MoveKind::param;
  if (s == "add") return MoveKind::add;
  if (s == "remove") return MoveKind::remove;
  if (s == "null") return MoveKind::null;
  throw std::invalid_argument("unknown move kind '" + s + "'");
}

struct TraceRecord {
  long iteration = 0;
  Pbf model;
  double log_posterior = 0.0;
  MoveKind move = MoveKind::null;
  bool accepted = true;
};

struct ChainTrace {
  std::vector<TraceRecord> records;
};

/// Thrown when a component fails mid-run; carries the last valid state.
class ChainAborted : public std::runtime_error {
 public:
  ChainAborted(const std::string& what, long iteration, ModelState last)
      : std::runtime_error(what), iteration_(iteration), last_(std::move(last)) {}
  long iteration() const noexcept { return iteration_; }
  const ModelState& last_state() const noexcept { return last_; }

 private:
  long iteration_;
  ModelState last_;
};

inline void validate_state(const ModelState& s, const PriorConfig& prior) {
  for (Offset t : s.pbf.tmpl()) {
    if (!prior.tau0.contains(t)) throw std::logic_error("state template offset " + to_string(t) + " is outside tau0");
  }
  if (!is_dense(s.pbf.support().members())) throw std::logic_error("state support is not dense");
}

// ---- Trans-dimensional parameter maps ---------------------------------------

/// Minimum sum of squares lost by dropping `l`, measured over the subsets of l.
inline double removal_distance(double beta, const Interaction& l) {
  return beta * beta / std::ldexp(1.0, static_cast<int>(l.size()));
}

/// Selection probabilities over the removable interactions, proportional to
/// exp(-nu * d). Empty when nothing is removable.
inline InteractionMap removal_weights(const Pbf& f, double nu) {
  InteractionMap w;
  const std::vector<Interaction> cand = removable(f.support());
  if (cand.empty()) return w;
  double lo = std::numeric_limits<double>::infinity();
  for (const Interaction& l : cand) lo = std::min(lo, nu * removal_distance(f.beta_at(l), l));
  double total = 0.0;
  for (const Interaction& l : cand) {
    const double e = std::exp(-(nu * removal_distance(f.beta_at(l), l) - lo));
    w.emplace(l, e);
    total += e;
  }
  for (auto& [l, v] : w) v /= total;
  return w;
}

/// (-1/2)^k
inline double neg_half_pow(std::size_t k) {
  const double m = std::ldexp(1.0, -static_cast<int>(k));
  return (k % 2 == 0) ? m : -m;
}

struct RemoveProjection {
  InteractionMap beta;   // over the support without the removed interaction
  double discarded = 0;  // beta of the removed interaction
};

/// Least-squares projection of f onto functions without `removed`.
inline RemoveProjection project_remove(const Pbf& f, const Interaction& removed) {
  const auto cand = removable(f.support());
  if (std::find(cand.begin(), cand.end(), removed) == cand.end()) {
    throw std::domain_error("project_remove: " + removed.to_string() + " is not removable");
  }
  RemoveProjection out;
  out.discarded = f.beta_at(removed);
  for (const auto& [l, b] : f.beta()) {
    if (l == removed) continue;
    double v = b;
    if (l.is_subset_of(removed)) v -= neg_half_pow(removed.size() - l.size()) * out.discarded;
    out.beta.emplace_hint(out.beta.end(), l, v);
  }
  return out;
}

inline Pbf remove_interaction(const Pbf& f, const Interaction& removed) {
  RemoveProjection p = project_remove(f, removed);
  return Pbf::from_beta(f.support().erased(removed), std::move(p.beta));
}

/// Inverse of project_remove: insert `added` with beta-value `value`.
inline Pbf add_interaction(const Pbf& f, const Interaction& added, double value) {
  if (f.support().contains(added)) throw std::domain_error("add_interaction: " + added.to_string() + " is active");
  InteractionSet support = f.support().inserted(added);
  InteractionMap beta;
  for (const Interaction& l : support) {
    if (l == added) {
      beta.emplace_hint(beta.end(), l, value);
      continue;
    }
    double v = f.beta_at(l);
    if (l.is_subset_of(added)) v += neg_half_pow(added.size() - l.size()) * value;
    beta.emplace_hint(beta.end(), l, v);
  }
  return Pbf::from_beta(std::move(support), std::move(beta));
}

struct AddDirection {
  InteractionMap theta;  // current function evaluated on the enlarged support
  InteractionMap delta;  // d theta / d beta(added) on the enlarged support
};

/// Theta on the enlarged support is theta + alpha * delta, alpha = beta(added).
inline AddDirection add_direction(const Pbf& f, const Interaction& added) {
  InteractionSet support = f.support().inserted(added);
  InteractionMap dbeta;
  for (const Interaction& l : support) {
    dbeta.emplace_hint(dbeta.end(), l, l.is_subset_of(added) ? neg_half_pow(added.size() - l.size()) : 0.0);
  }
  AddDirection out;
  out.delta = theta_from_beta(support, dbeta);
  for (const Interaction& l : support) out.theta.emplace_hint(out.theta.end(), l, evaluate(f, l));
  return out;
}

/// Linear map theta -> beta over the support, canonical order (lower order first).
inline Eigen::MatrixXd moebius_matrix(const InteractionSet& support) {
  const auto n = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd a(n, n);
  Eigen::Index j = 0;
  for (const Interaction& col : support) {
    InteractionMap theta;
    for (const Interaction& l : support) theta.emplace(l, l == col ? 1.0 : 0.0);
    Eigen::Index i = 0;
    for (const auto& [l, b] : beta_from_theta(support, theta)) a(i++, j) = b;
    ++j;
  }
  return a;
}

/// Linear map theta -> [theta* ; beta(removed)] of the remove proposal.
inline Eigen::MatrixXd transform_matrix(const InteractionSet& support, const Interaction& removed) {
  const auto n = static_cast<Eigen::Index>(support.size());
  const InteractionSet reduced = support.erased(removed);
  Eigen::MatrixXd a(n, n);
  Eigen::Index j = 0;
  for (const Interaction& col : support) {
    InteractionMap theta;
    for (const Interaction& l : support) theta.emplace(l, l == col ? 1.0 : 0.0);
    const RemoveProjection p = project_remove(Pbf(support, theta), removed);
    Eigen::Index i = 0;
    for (const auto& [l, t] : theta_from_beta(reduced, p.beta)) a(i++, j) = t;
    a(n - 1, j) = p.discarded;
    ++j;
  }
  return a;
}

// ---- Sampler ----------------------------------------------------------------

struct MoveOutcome {
  MoveKind kind = MoveKind::null;
  bool accepted = true;
  double log_posterior = 0.0;
};

/// One chain: owns its state and the incremental neighbor-pattern cache.
/// Patterns are bit masks over tau0, so template changes need no rebuild.
class Chain {
 public:
  Chain(ModelState state, RunConfig cfg) : cfg_(std::move(cfg)), state_(std::move(state)), index_(cfg_.prior.tau0) {
    cfg_.validate();
    validate_state(state_, cfg_.prior);
    masks_ = neighbor_masks(state_.scene, index_);
    for (std::size_t idx = 0; idx < state_.scene.size(); ++idx) {
      if (!state_.scene.observed_at(idx)) unobserved_.push_back(idx);
    }
    refresh();
  }

  const ModelState& state() const noexcept { return state_; }
  const RunConfig& config() const noexcept { return cfg_; }

  double log_posterior() const { return log_posterior_of(state_.pbf, compiled_, counts(tau_mask_)); }

  /// |unobserved| single-site Gibbs updates at uniformly drawn unobserved nodes.
  void sweep(Rng& rng) {
    if (unobserved_.empty()) return;
    std::uniform_int_distribution<std::size_t> pick(0, unobserved_.size() - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t k = 0; k < unobserved_.size(); ++k) {
      const std::size_t idx = unobserved_[pick(rng)];
      const double p = logistic(flip_ratio(idx));
      set_cell(idx, unif(rng) < p);
    }
  }

  /// Gibbs step along a standard-normal random direction.
  MoveOutcome update_parameters(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    InteractionMap delta;
    for (const Interaction& l : state_.pbf.support()) delta.emplace_hint(delta.end(), l, normal(rng));
    return update_parameters_along(delta, rng);
  }

  MoveOutcome update_parameters_along(const InteractionMap& delta, Rng& rng) {
    const auto data = counts(tau_mask_);
    const Pbf direction(state_.pbf.support(), delta);
    std::vector<std::pair<double, double>> prior_terms;
    for (const auto& [l, t] : state_.pbf.theta()) prior_terms.emplace_back(t, delta.at(l));
    AlphaConditional g(std::move(prior_terms), pattern_terms(compiled_, compile(direction, index_), data),
                       cfg_.prior.sigma);
    if (!g.degenerate()) {
      const double alpha = ars_sample(g.density(), {-1.0, 1.0}, rng);
      InteractionMap theta;
      for (const auto& [l, t] : state_.pbf.theta()) theta.emplace_hint(theta.end(), l, t + alpha * delta.at(l));
      state_.pbf = Pbf(state_.pbf.support(), std::move(theta));
      refresh();
    }
    return {MoveKind::param, true, log_posterior_of(state_.pbf, compiled_, data)};
  }

  /// Add or remove one interaction (probability 1/2 each).
  MoveOutcome update_structure(Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < 0.5) return propose_remove(rng);
    return propose_add(rng);
  }

  /// One full iteration: sweep, then a parameter or a structure update.
  MoveOutcome iterate(Rng& rng) {
    sweep(rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MoveOutcome out = unif(rng) < cfg_.prob_param_move ? update_parameters(rng) : update_structure(rng);
#ifndef NDEBUG
    validate_state(state_, cfg_.prior);
#endif
    return out;
  }

 private:
  struct GaussianFit {
    double mean = 0.0;
    double var = 1.0;
  };

  void refresh() {
    compiled_ = compile(state_.pbf, index_);
    tau_mask_ = index_.mask_of(state_.pbf.tmpl());
  }

  std::vector<PatternCount> counts(std::uint64_t mask) const { return count_patterns(masks_, state_.scene, mask); }

  double log_posterior_of(const Pbf& f, const CompiledPbf& c, const std::vector<PatternCount>& data) const {
    return log_prior(f, cfg_.prior) + log_likelihood(c, data);
  }

  static std::vector<PatternTerm> pattern_terms(const CompiledPbf& base, const CompiledPbf& direction,
                                                const std::vector<PatternCount>& data) {
    std::vector<PatternTerm> out;
    out.reserve(data.size());
    for (const PatternCount& c : data) {
      out.push_back({base(c.pattern), direction(c.pattern), static_cast<double>(c.count), static_cast<double>(c.ones)});
    }
    return out;
  }

  void set_cell(std::size_t idx, bool x) {
    if (state_.scene.value_at(idx) == x) return;
    state_.scene.set_value_at(idx, x);
    const NodeId v = state_.scene.node(idx);
    const LatticeDims& d = state_.scene.dims();
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const Offset t = index_.offset(k);
      const int i = v.i - t.row, j = v.j - t.col;
      if (!d.contains(i, j)) continue;
      masks_[static_cast<std::size_t>(i - 1) * d.n + (j - 1)] ^= std::uint64_t{1} << k;
    }
  }

  double flip_ratio(std::size_t idx) const {
    const NodeId v = state_.scene.node(idx);
    const LatticeDims& d = state_.scene.dims();
    double r = compiled_(masks_[idx] & tau_mask_);
    for (std::uint64_t m = tau_mask_; m; m &= m - 1) {
      const auto k = static_cast<std::size_t>(std::countr_zero(m));
      const Offset t = index_.offset(k);
      const int i = v.i - t.row, j = v.j - t.col;
      if (!d.contains(i, j)) continue;
      const std::size_t u = static_cast<std::size_t>(i - 1) * d.n + (j - 1);
      const std::uint64_t bit = std::uint64_t{1} << k;
      const std::uint64_t p = masks_[u] & tau_mask_;
      const bool xu = state_.scene.value_at(u);
      r += bernoulli_logit(xu, compiled_(p | bit)) - bernoulli_logit(xu, compiled_(p & ~bit));
    }
    return r;
  }

  /// Gaussian fitted to r_ars exact draws of beta(added)'s full conditional
  /// when `added` joins `base`.
  GaussianFit fit_add_proposal(const Pbf& base, const Interaction& added, const std::vector<PatternCount>& data,
                               Rng& rng) const {
    const AddDirection dir = add_direction(base, added);
    std::vector<std::pair<double, double>> prior_terms;
    for (const auto& [l, t] : dir.theta) prior_terms.emplace_back(t, dir.delta.at(l));
    InteractionMap dbeta;
    for (const auto& [l, b] : base.beta()) {
      if (l.is_subset_of(added)) dbeta.emplace(l, neg_half_pow(added.size() - l.size()));
    }
    dbeta.emplace(added, 1.0);
    AlphaConditional g(std::move(prior_terms), pattern_terms(compile(base, index_), compile(dbeta, index_), data),
                       cfg_.prior.sigma);
    AdaptiveRejectionSampler sampler(g.density(), {-1.0, 1.0});
    std::vector<double> draws(static_cast<std::size_t>(cfg_.r_ars));
    for (double& a : draws) a = sampler.draw(rng);
    GaussianFit fit;
    double sum = 0.0;
    for (double a : draws) sum += a;
    fit.mean = sum / static_cast<double>(draws.size());
    double ss = 0.0;
    for (double a : draws) ss += (a - fit.mean) * (a - fit.mean);
    fit.var = std::max(ss / static_cast<double>(draws.size() - 1), 1e-12);
    return fit;
  }

  static double log_normal_density(double x, const GaussianFit& g) {
    constexpr double log_two_pi = 1.8378770664093454836;
    const double z = x - g.mean;
    return -0.5 * (log_two_pi + std::log(g.var)) - 0.5 * z * z / g.var;
  }

  /// Probability of picking the first-order (or higher-order) class of add
  /// move, and the size of the chosen class.
  static std::pair<double, std::size_t> add_choice(const AddCandidates& c, bool first_order) {
    const std::size_t n = first_order ? c.first_order.size() : c.higher_order.size();
    const bool both = !c.first_order.empty() && !c.higher_order.empty();
    return {both ? 0.5 : 1.0, n};
  }

  MoveOutcome propose_remove(Rng& rng) {
    const InteractionMap q = removal_weights(state_.pbf, cfg_.nu);
    const auto data = counts(tau_mask_);
    const double lp_old = log_posterior_of(state_.pbf, compiled_, data);
    if (q.empty()) return {MoveKind::null, true, lp_old};

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    auto pick = q.begin();
    for (auto it = q.begin(); it != q.end(); ++it) {
      pick = it;
      if (u < it->second) break;
      u -= it->second;
    }
    const Interaction removed = pick->first;
    const double q_removed = pick->second;

    const RemoveProjection proj = project_remove(state_.pbf, removed);
    Pbf proposal = Pbf::from_beta(state_.pbf.support().erased(removed), proj.beta);
    const CompiledPbf compiled = compile(proposal, index_);
    const double lp_new = log_posterior_of(proposal, compiled, data);

    // Reverse move: add `removed` back to the proposal with the discarded beta.
    const AddCandidates reverse = addable(proposal.support(), cfg_.prior.tau0);
    const auto [p_class, n_class] = add_choice(reverse, removed.size() == 1);
    const GaussianFit fit = fit_add_proposal(proposal, removed, data, rng);
    const double log_reverse =
        std::log(0.5) + std::log(p_class) - std::log(static_cast<double>(n_class)) + log_normal_density(proj.discarded, fit);
    const double log_forward = std::log(0.5) + std::log(q_removed);

    const double log_accept = lp_new - lp_old + log_reverse - log_forward;
    if (std::log(unif(rng)) < log_accept) {
      state_.pbf = std::move(proposal);
      refresh();
      return {MoveKind::remove, true, lp_new};
    }
    return {MoveKind::remove, false, lp_old};
  }

  MoveOutcome propose_add(Rng& rng) {
    const AddCandidates cand = addable(state_.pbf.support(), cfg_.prior.tau0);
    if (cand.first_order.empty() && cand.higher_order.empty()) {
      return {MoveKind::null, true, log_posterior()};
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool first_order;
    if (cand.first_order.empty()) first_order = false;
    else if (cand.higher_order.empty()) first_order = true;
    else first_order = unif(rng) < 0.5;
    const auto [p_class, n_class] = add_choice(cand, first_order);
    std::uniform_int_distribution<std::size_t> pick(0, n_class - 1);
    const std::size_t k = pick(rng);
    const Interaction added = first_order ? Interaction{cand.first_order[k]} : cand.higher_order[k];

    const auto data = counts(tau_mask_ | index_.mask(added));
    const double lp_old = log_posterior_of(state_.pbf, compiled_, data);
    const GaussianFit fit = fit_add_proposal(state_.pbf, added, data, rng);
    std::normal_distribution<double> normal(fit.mean, std::sqrt(fit.var));
    const double value = normal(rng);

    Pbf proposal = add_interaction(state_.pbf, added, value);
    const CompiledPbf compiled = compile(proposal, index_);
    const double lp_new = log_posterior_of(proposal, compiled, data);

    const InteractionMap q = removal_weights(proposal, cfg_.nu);
    const double log_reverse = std::log(0.5) + std::log(q.at(added));
    const double log_forward =
        std::log(0.5) + std::log(p_class) - std::log(static_cast<double>(n_class)) + log_normal_density(value, fit);

    const double log_accept = lp_new - lp_old + log_reverse - log_forward;
    if (std::log(unif(rng)) < log_accept) {
      state_.pbf = std::move(proposal);
      refresh();
      return {MoveKind::add, true, lp_new};
    }
    return {MoveKind::add, false, lp_old};
  }

  RunConfig cfg_;
  ModelState state_;
  TemplateIndex index_;
  std::vector<std::uint64_t> masks_;
  std::vector<std::size_t> unobserved_;
  CompiledPbf compiled_;
  std::uint64_t tau_mask_ = 0;
};

// ---- Free-function surface --------------------------------------------------

inline ModelState gibbs_parameter_update(ModelState state, const RunConfig& cfg, Rng& rng) {
  Chain chain(std::move(state), cfg);
  chain.update_parameters(rng);
  return chain.state();
}

inline std::pair<ModelState, MoveOutcome> structure_update(ModelState state, const RunConfig& cfg, Rng& rng) {
  Chain chain(std::move(state), cfg);
  MoveOutcome out = chain.update_structure(rng);
  return {chain.state(), out};
}

inline ModelState single_site_sweep(ModelState state, const RunConfig& cfg, Rng& rng) {
  Chain chain(std::move(state), cfg);
  chain.sweep(rng);
  return chain.state();
}

/// Smallest valid model (empty template, theta(empty) from its prior) with
/// every unobserved cell set to 0.
inline ModelState initial_state(const Scene& scene, const RunConfig& cfg, Rng& rng) {
  AlphaConditional prior({{0.0, 1.0}}, {}, cfg.prior.sigma);
  const double t0 = ars_sample(prior.density(), {-1.0, 1.0}, rng);
  ModelState s{Pbf(InteractionSet{}, InteractionMap{{Interaction{}, t0}}), scene};
  for (std::size_t idx = 0; idx < s.scene.size(); ++idx) {
    if (!s.scene.observed_at(idx)) s.scene.set_value_at(idx, false);
  }
  return s;
}

using TraceSink = std::function<void(const TraceRecord&)>;

/// Runs `cfg.iterations` iterations and hands every record (the initial
/// state first) to `sink`. Returns the final state.
inline ModelState run_chain(const Scene& scene, const RunConfig& cfg, const TraceSink& sink) {
  cfg.validate();
  Rng rng(cfg.seed);
  Chain chain(initial_state(scene, cfg, rng), cfg);
  sink(TraceRecord{0, chain.state().pbf, chain.log_posterior(), MoveKind::null, true});
  for (long it = 1; it <= cfg.iterations; ++it) {
    MoveOutcome out;
    try {
      out = chain.iterate(rng);
    } catch (const std::exception& e) {
      throw ChainAborted(std::string("iteration ") + std::to_string(it) + ": " + e.what(), it, chain.state());
    }
    sink(TraceRecord{it, chain.state().pbf, out.log_posterior, out.kind, out.accepted});
  }
  return chain.state();
}

inline ChainTrace run_chain(const Scene& scene, const RunConfig& cfg) {
  ChainTrace trace;
  trace.records.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  run_chain(scene, cfg, [&trace](const TraceRecord& r) { trace.records.push_back(r); });
  return trace;
}

}  // namespace mmm
