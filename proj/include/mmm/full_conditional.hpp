#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmm/ars.hpp"
#include "mmm/model.hpp"
#include "mmm/pbf.hpp"
#include "mmm/prior.hpp"

namespace mmm {

/// Aggregated likelihood data for one realized active-interaction pattern:
/// `count` nodes see the pattern, `ones` of them are on.
struct PatternTerm {
  double theta = 0.0;
  double delta = 0.0;
  double count = 0.0;
  double ones = 0.0;
};

/// Log full conditional of the step length alpha along theta + alpha * delta:
///
///   g(a) = sum_l [ t_l - 2 log(1 + e^t_l) - t_l^2 / 2s^2 ]            (prior)
///        + sum_p [ ones_p u_p - count_p log(1 + e^u_p) ]                (data)
///
/// with t_l = theta(l) + a delta(l) over the active interactions and
/// u_p = theta_p + a delta_p over the realized patterns. Additive constants
/// are dropped.
class AlphaConditional {
 public:
  AlphaConditional(std::vector<std::pair<double, double>> prior_terms, std::vector<PatternTerm> data, double sigma)
      : prior_(std::move(prior_terms)), data_(std::move(data)), inv_var_(1.0 / (sigma * sigma)) {
    // Terms with zero direction are constant in alpha.
    std::erase_if(data_, [](const PatternTerm& p) { return p.delta == 0.0; });
  }

  std::pair<double, double> operator()(double a) const {
    double g = 0.0, dg = 0.0;
    for (const auto& [theta, delta] : prior_) {
      const double t = theta + a * delta;
      g += t - 2.0 * softplus(t) - 0.5 * t * t * inv_var_;
      dg += delta * (1.0 - 2.0 * logistic(t) - t * inv_var_);
    }
    for (const PatternTerm& p : data_) {
      const double u = p.theta + a * p.delta;
      g += p.ones * u - p.count * softplus(u);
      dg += p.delta * (p.ones - p.count * logistic(u));
    }
    return {g, dg};
  }

  /// True when every direction component vanishes (flat, improper in alpha).
  bool degenerate() const noexcept {
    return std::all_of(prior_.begin(), prior_.end(), [](const auto& t) { return t.second == 0.0; }) && data_.empty();
  }

  LogDensity density() const {
    return LogDensity{[self = *this](double a) { return self(a); }};
  }

  std::size_t pattern_count() const noexcept { return data_.size(); }

 private:
  std::vector<std::pair<double, double>> prior_;
  std::vector<PatternTerm> data_;
  double inv_var_;
};

/// Node counts per on-neighbor pattern restricted to `tau_mask`.
struct PatternCount {
  std::uint64_t pattern = 0;
  long count = 0;
  long ones = 0;
};

inline std::vector<PatternCount> count_patterns(const std::vector<std::uint64_t>& masks, const Scene& scene,
                                                std::uint64_t tau_mask) {
  std::unordered_map<std::uint64_t, std::pair<long, long>> acc;
  for (std::size_t idx = 0; idx < masks.size(); ++idx) {
    auto& slot = acc[masks[idx] & tau_mask];
    ++slot.first;
    slot.second += scene.value_at(idx) ? 1 : 0;
  }
  std::vector<PatternCount> out;
  out.reserve(acc.size());
  for (const auto& [p, c] : acc) out.push_back({p, c.first, c.second});
  std::sort(out.begin(), out.end(), [](const PatternCount& a, const PatternCount& b) { return a.pattern < b.pattern; });
  return out;
}

/// Likelihood from aggregated pattern counts.
inline double log_likelihood(const CompiledPbf& f, const std::vector<PatternCount>& counts) {
  double ll = 0.0;
  for (const PatternCount& c : counts) {
    const double t = f(c.pattern);
    ll += static_cast<double>(c.ones) * -softplus(-t) + static_cast<double>(c.count - c.ones) * -softplus(t);
  }
  return ll;
}

/// Full conditional of alpha for the direction `delta` (theta-direction keyed
/// by the active interactions of the state's function), given the current
/// fill-in of the scene.
inline LogDensity alpha_full_conditional(const ModelState& state, const InteractionMap& delta, const PriorConfig& cfg) {
  const Pbf& f = state.pbf;
  const Pbf direction(f.support(), delta);
  std::vector<std::pair<double, double>> prior_terms;
  prior_terms.reserve(f.theta().size());
  for (const auto& [l, t] : f.theta()) prior_terms.emplace_back(t, delta.at(l));

  std::map<Interaction, std::pair<long, long>> patterns;
  for (std::size_t idx = 0; idx < state.scene.size(); ++idx) {
    auto& slot = patterns[active_interaction(state.scene, f.tmpl(), state.scene.node(idx))];
    ++slot.first;
    slot.second += state.scene.value_at(idx) ? 1 : 0;
  }
  std::vector<PatternTerm> data;
  data.reserve(patterns.size());
  for (const auto& [l, c] : patterns) {
    data.push_back({evaluate(f, l), evaluate(direction, l), static_cast<double>(c.first), static_cast<double>(c.second)});
  }
  return AlphaConditional(std::move(prior_terms), std::move(data), cfg.sigma).density();
}

}  // namespace mmm
