#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mmm/lattice.hpp"
#include "mmm/model.hpp"
#include "mmm/pbf.hpp"

namespace mmm {

struct PriorConfig {
  Template tau0;
  double p_star = 0.9;
  double sigma = 100.0;

  static PriorConfig with_radius(double radius, double p_star = 0.9, double sigma = 100.0) {
    return PriorConfig{disk_template(radius), p_star, sigma};
  }

  void validate() const {
    if (!(p_star > 0.0 && p_star < 1.0)) throw std::domain_error("p_star must lie in (0,1)");
    if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
    require_past(tau0);
    if (tau0.size() > 64) throw std::domain_error("tau0 may hold at most 64 offsets");
  }
};

/// One chain state: the pseudo-Boolean function (template, active
/// interactions, theta-values) plus the scene with the current fill-in.
struct ModelState {
  Pbf pbf;
  Scene scene;
};

inline double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// Uniform size on {0..|tau0|}, then uniform subset of that size.
inline double log_prior_template(const Template& tau, const PriorConfig& cfg) {
  for (Offset t : tau) {
    if (!cfg.tau0.contains(t)) throw std::domain_error("template offset " + to_string(t) + " is not in tau0");
  }
  const std::size_t k0 = cfg.tau0.size();
  return -std::log(static_cast<double>(k0) + 1.0) - log_binomial(k0, tau.size());
}

/// Order-k interactions over `tau` whose facets all lie in `lower`.
inline std::vector<Interaction> admissible_interactions(const std::vector<Interaction>& lower, const Template& tau) {
  std::set<Interaction> lower_set(lower.begin(), lower.end());
  std::set<Interaction> out;
  for (const Interaction& l : lower) {
    for (Offset t : tau) {
      if (l.contains(t)) continue;
      Interaction cand = l.with(t);
      if (out.contains(cand)) continue;
      bool ok = true;
      for (const Interaction& f : cand.facets()) {
        if (!lower_set.contains(f)) {
          ok = false;
          break;
        }
      }
      if (ok) out.insert(std::move(cand));
    }
  }
  return {out.begin(), out.end()};
}

inline double log_prior_interactions(const InteractionSet& support, const PriorConfig& cfg) {
  const Template& tau = support.tmpl();
  double lp = 0.0;
  std::vector<Interaction> prev = support.level(1);
  for (std::size_t k = 2; k <= tau.size(); ++k) {
    std::vector<Interaction> cur = support.level(k);
    if (prev.empty()) {
      if (!cur.empty()) throw std::domain_error("active interactions of order " + std::to_string(k) + " lack facets");
      break;
    }
    const std::vector<Interaction> admissible = admissible_interactions(prev, tau);
    for (const Interaction& l : cur) {
      if (!std::binary_search(admissible.begin(), admissible.end(), l)) {
        throw std::domain_error("active interaction " + l.to_string() + " is not admissible");
      }
    }
    if (!admissible.empty()) {
      const double np = static_cast<double>(admissible.size());
      const double nl = static_cast<double>(prev.size());
      const double pk = np <= nl ? cfg.p_star : cfg.p_star * nl / np;
      const double active = static_cast<double>(cur.size());
      lp += active * std::log(pk);
      if (np > active) lp += (np - active) * std::log1p(-pk);
    }
    prev = std::move(cur);
  }
  return lp;
}

/// log of the logistic density e^t / (1 + e^t)^2.
inline double log_logistic_density(double t) noexcept { return -std::abs(t) - 2.0 * std::log1p(std::exp(-std::abs(t))); }

namespace detail {

inline double compute_log_c(double sigma) {
  auto integrand = [sigma](double t) {
    return std::exp(log_logistic_density(t) - t * t / (2.0 * sigma * sigma));
  };
  double error = 0.0;
  const double half = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 30, 1e-13, &error);
  return -std::log(2.0 * half);
}

}  // namespace detail

/// Minus log of the integral of the logistic density times exp(-t^2 / 2 sigma^2).
inline double log_c(double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
  static std::mutex mutex;
  static std::map<double, double> memo;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = memo.find(sigma);
  if (it != memo.end()) return it->second;
  const double v = detail::compute_log_c(sigma);
  memo.emplace(sigma, v);
  return v;
}

/// Normalized log prior density of a single theta-value.
inline double log_theta_density(double t, double sigma) {
  return log_c(sigma) + t - 2.0 * softplus(t) - t * t / (2.0 * sigma * sigma);
}

inline double log_prior_theta(const InteractionMap& theta, const PriorConfig& cfg) {
  double lp = 0.0;
  for (const auto& [l, t] : theta) lp += log_theta_density(t, cfg.sigma);
  return lp;
}

inline double log_prior(const Pbf& f, const PriorConfig& cfg) {
  return log_prior_template(f.tmpl(), cfg) + log_prior_interactions(f.support(), cfg) +
         log_prior_theta(f.theta(), cfg);
}

/// Unnormalized log posterior of (template, interactions, theta, fill-in)
/// given the observed cells.
inline double log_posterior(const ModelState& state, const PriorConfig& cfg) {
  return log_prior(state.pbf, cfg) + log_likelihood(Mmm(state.pbf), state.scene);
}

}  // namespace mmm
