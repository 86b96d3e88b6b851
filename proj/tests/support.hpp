#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "mmm/ars.hpp"
#include "mmm/full_conditional.hpp"
#include "mmm/lattice.hpp"
#include "mmm/model.hpp"
#include "mmm/pbf.hpp"
#include "mmm/prior.hpp"

namespace mmm::test {

inline constexpr Offset kW{0, -1};
inline constexpr Offset kN{-1, 0};
inline constexpr Offset kNW{-1, -1};
inline constexpr Offset kNE{-1, 1};

/// Random template of `k` offsets drawn from tau0.
inline Template random_template(Rng& rng, const Template& tau0, std::size_t k) {
  std::vector<Offset> pool(tau0.begin(), tau0.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  return Template(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(k, pool.size())));
}

/// Random dense support with template exactly `tau`; each admissible
/// higher-order interaction is activated with probability p.
inline InteractionSet random_support(Rng& rng, const Template& tau, double p = 0.5) {
  std::set<Interaction> members{Interaction{}};
  for (Offset t : tau) members.insert(Interaction{t});
  std::bernoulli_distribution coin(p);
  for (std::size_t k = 2; k <= tau.size(); ++k) {
    std::set<Interaction> next;
    for (const Interaction& l : members) {
      if (l.size() != k - 1) continue;
      for (Offset t : tau) {
        if (l.contains(t)) continue;
        Interaction cand = l.with(t);
        if (next.contains(cand)) continue;
        bool ok = true;
        for (const Interaction& f : cand.facets()) ok = ok && members.contains(f);
        if (ok) next.insert(cand);
      }
    }
    for (const Interaction& l : next) {
      if (coin(rng)) members.insert(l);
    }
  }
  return InteractionSet(std::move(members));
}

inline InteractionMap random_values(Rng& rng, const InteractionSet& support, double lo = -5.0, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  InteractionMap out;
  for (const Interaction& l : support) out.emplace(l, u(rng));
  return out;
}

inline Pbf random_pbf(Rng& rng, const Template& tau, double lo = -2.0, double hi = 2.0, double p = 0.5) {
  InteractionSet s = random_support(rng, tau, p);
  InteractionMap theta = random_values(rng, s, lo, hi);
  return Pbf(std::move(s), std::move(theta));
}

/// All subsets of the template as interactions.
inline std::vector<Interaction> power_set(const Template& tau) {
  std::vector<Offset> ts(tau.begin(), tau.end());
  std::vector<Interaction> out;
  for (unsigned mask = 0; mask < (1u << ts.size()); ++mask) {
    std::vector<Offset> sub;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      if (mask & (1u << k)) sub.push_back(ts[k]);
    }
    out.emplace_back(std::move(sub));
  }
  return out;
}

inline InteractionSet full_support(const Template& tau) {
  auto all = power_set(tau);
  return InteractionSet(std::set<Interaction>(all.begin(), all.end()));
}

inline Scene random_scene(Rng& rng, LatticeDims dims, double p_one = 0.5, double p_observed = 1.0) {
  Scene s(dims);
  std::bernoulli_distribution one(p_one), obs(p_observed);
  for (std::size_t idx = 0; idx < s.size(); ++idx) {
    s.set_value_at(idx, one(rng));
    s.set_observed(s.node(idx), obs(rng));
  }
  return s;
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double f = cdf(xs[k]);
    d = std::max({d, f - static_cast<double>(k) / n, static_cast<double>(k + 1) / n - f});
  }
  return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// CDF of exp(target) tabulated by trapezoid quadrature on a grid that
/// covers everything within `drop` log-units of the mode.
class GridCdf {
 public:
  GridCdf(const LogDensity& target, std::size_t points = 100'000, double drop = 40.0) {
    double mode = 0.0;
    double step = 1.0;
    // Walk uphill to a point near the mode.
    for (int k = 0; k < 200; ++k) {
      const double d = target.eval(mode).second;
      if (std::abs(d) < 1e-12) break;
      const double next = mode + (d > 0 ? step : -step);
      if ((target.eval(next).second > 0) != (d > 0)) step *= 0.5;
      else step *= 1.5;
      mode = next;
    }
    const double top = target.eval(mode).first;
    lo_ = mode - 1.0;
    while (target.eval(lo_).first > top - drop) lo_ = mode - 2.0 * (mode - lo_);
    hi_ = mode + 1.0;
    while (target.eval(hi_).first > top - drop) hi_ = mode + 2.0 * (hi_ - mode);
    h_ = (hi_ - lo_) / static_cast<double>(points - 1);
    cum_.assign(points, 0.0);
    double prev = std::exp(target.eval(lo_).first - top);
    for (std::size_t k = 1; k < points; ++k) {
      const double f = std::exp(target.eval(lo_ + static_cast<double>(k) * h_).first - top);
      cum_[k] = cum_[k - 1] + 0.5 * (prev + f) * h_;
      prev = f;
    }
    for (double& c : cum_) c /= cum_.back();
  }

  double operator()(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double pos = (x - lo_) / h_;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= cum_.size()) return 1.0;
    const double w = pos - static_cast<double>(k);
    return (1 - w) * cum_[k] + w * cum_[k + 1];
  }

 private:
  double lo_ = 0, hi_ = 0, h_ = 0;
  std::vector<double> cum_;
};

/// A random small chain state (template within the radius-2.5 disk, 8x8 scene)
/// with a standard-normal direction.
struct RandomConditional {
  ModelState state;
  InteractionMap delta;
  PriorConfig prior;
};

inline RandomConditional random_conditional(Rng& rng, double sigma = 100.0) {
  const Template tau0 = disk_template(2.5);
  std::uniform_int_distribution<std::size_t> size(0, 4);
  RandomConditional out{{random_pbf(rng, random_template(rng, tau0, size(rng)), -2.0, 2.0), random_scene(rng, {8, 8})},
                        {},
                        PriorConfig{tau0, 0.9, sigma}};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Interaction& l : out.state.pbf.support()) out.delta.emplace(l, normal(rng));
  return out;
}

}  // namespace mmm::test
