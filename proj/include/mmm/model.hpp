#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mmm/lattice.hpp"
#include "mmm/pbf.hpp"

namespace mmm {

using Rng = std::mt19937_64;

inline double logistic(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + e^t) without overflow.
inline double softplus(double t) noexcept {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

/// log f(x | theta) for a single binary factor: x*theta - log(1 + e^theta).
inline double bernoulli_logit(bool x, double theta) noexcept { return x ? -softplus(-theta) : -softplus(theta); }

/// Bit positions for a fixed list of offsets (at most 64), so that an
/// interaction over those offsets becomes a machine word.
class TemplateIndex {
 public:
  TemplateIndex() = default;
  explicit TemplateIndex(const Template& offsets) : offsets_(offsets.begin(), offsets.end()) {
    if (offsets_.size() > 64) throw std::domain_error("template index supports at most 64 offsets");
  }

  std::size_t size() const noexcept { return offsets_.size(); }
  const std::vector<Offset>& offsets() const noexcept { return offsets_; }
  Offset offset(std::size_t bit) const { return offsets_.at(bit); }

  int bit(Offset t) const {
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
      if (offsets_[k] == t) return static_cast<int>(k);
    }
    return -1;
  }

  std::uint64_t mask(const Interaction& l) const {
    std::uint64_t m = 0;
    for (Offset t : l) {
      int b = bit(t);
      if (b < 0) throw std::domain_error("offset " + to_string(t) + " is not indexed");
      m |= std::uint64_t{1} << b;
    }
    return m;
  }

  template <typename Offsets>
  std::uint64_t mask_of(const Offsets& ts) const {
    std::uint64_t m = 0;
    for (Offset t : ts) {
      int b = bit(t);
      if (b < 0) throw std::domain_error("offset " + to_string(t) + " is not indexed");
      m |= std::uint64_t{1} << b;
    }
    return m;
  }

  Interaction interaction(std::uint64_t m) const {
    std::vector<Offset> ts;
    while (m) {
      ts.push_back(offsets_[static_cast<std::size_t>(std::countr_zero(m))]);
      m &= m - 1;
    }
    return Interaction(std::move(ts));
  }

 private:
  std::vector<Offset> offsets_;
};

/// A pseudo-Boolean function flattened to (mask, beta) pairs for fast
/// evaluation at bit-pattern arguments.
struct CompiledPbf {
  std::vector<std::uint64_t> masks;
  std::vector<double> beta;

  double operator()(std::uint64_t pattern) const noexcept {
    double t = 0.0;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      if ((masks[k] & ~pattern) == 0) t += beta[k];
    }
    return t;
  }
};

inline CompiledPbf compile(const InteractionMap& beta, const TemplateIndex& index) {
  CompiledPbf c;
  c.masks.reserve(beta.size());
  c.beta.reserve(beta.size());
  for (const auto& [l, b] : beta) {
    c.masks.push_back(index.mask(l));
    c.beta.push_back(b);
  }
  return c;
}

inline CompiledPbf compile(const Pbf& f, const TemplateIndex& index) { return compile(f.beta(), index); }

/// For every node (raster index) the bit pattern of on-neighbors among the
/// indexed offsets.
inline std::vector<std::uint64_t> neighbor_masks(const Scene& scene, const TemplateIndex& index) {
  std::vector<std::uint64_t> out(scene.size(), 0);
  for (std::size_t idx = 0; idx < scene.size(); ++idx) {
    NodeId v = scene.node(idx);
    std::uint64_t m = 0;
    for (std::size_t k = 0; k < index.size(); ++k) {
      NodeId u = v + index.offset(k);
      if (scene.value_or_zero(u.i, u.j)) m |= std::uint64_t{1} << k;
    }
    out[idx] = m;
  }
  return out;
}

/// Homogeneous binary Markov mesh model.
class Mmm {
 public:
  Mmm() : Mmm(Pbf{}) {}
  explicit Mmm(Pbf f) : pbf_(std::move(f)), index_(pbf_.tmpl()), compiled_(compile(pbf_, index_)) {}

  const Pbf& pbf() const noexcept { return pbf_; }
  const Template& tmpl() const noexcept { return pbf_.tmpl(); }
  const TemplateIndex& index() const noexcept { return index_; }

  /// theta at the on-neighbor pattern (bits over index()).
  double theta(std::uint64_t pattern) const noexcept { return compiled_(pattern); }

  std::uint64_t pattern_at(const Scene& scene, NodeId v) const {
    std::uint64_t m = 0;
    for (std::size_t k = 0; k < index_.size(); ++k) {
      NodeId u = v + index_.offset(k);
      if (scene.value_or_zero(u.i, u.j)) m |= std::uint64_t{1} << k;
    }
    return m;
  }

 private:
  Pbf pbf_;
  TemplateIndex index_;
  CompiledPbf compiled_;
};

inline double conditional_prob(const Mmm& model, const Scene& scene, NodeId v) {
  scene.index(v);
  return logistic(model.theta(model.pattern_at(scene, v)));
}

inline double log_likelihood(const Mmm& model, const Scene& scene) {
  double ll = 0.0;
  for (std::size_t idx = 0; idx < scene.size(); ++idx) {
    NodeId v = scene.node(idx);
    ll += bernoulli_logit(scene.value_at(idx), model.theta(model.pattern_at(scene, v)));
  }
  return ll;
}

/// log f(x with x_v = 1) - log f(x with x_v = 0), touching only the factor at
/// v and the factors of nodes whose neighborhood contains v.
inline double flip_log_ratio(const Mmm& model, const Scene& scene, NodeId v) {
  scene.index(v);
  const TemplateIndex& index = model.index();
  double r = model.theta(model.pattern_at(scene, v));
  for (std::size_t k = 0; k < index.size(); ++k) {
    NodeId u = v + (-index.offset(k));
    if (!scene.dims().contains(u.i, u.j)) continue;
    const std::uint64_t bit = std::uint64_t{1} << k;
    const std::uint64_t p = model.pattern_at(scene, u);
    const bool xu = scene.value(u);
    r += bernoulli_logit(xu, model.theta(p | bit)) - bernoulli_logit(xu, model.theta(p & ~bit));
  }
  return r;
}

/// Ancestral sampling in raster order; the result is fully observed.
inline Scene simulate(const Mmm& model, LatticeDims dims, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Scene scene(dims);
  for (std::size_t idx = 0; idx < scene.size(); ++idx) {
    NodeId v = scene.node(idx);
    const double p = logistic(model.theta(model.pattern_at(scene, v)));
    scene.set_value_at(idx, unif(rng) < p);
  }
  return scene;
}

}  // namespace mmm
