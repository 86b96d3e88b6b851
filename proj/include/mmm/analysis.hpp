#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmm/lattice.hpp"
#include "mmm/model.hpp"
#include "mmm/pbf.hpp"
#include "mmm/rjmcmc.hpp"

namespace mmm {

class EmptySampleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Canonical model identity: the sorted active interactions (theta excluded).
using ModelKey = std::vector<Interaction>;

inline ModelKey model_key(const Pbf& f) { return {f.support().begin(), f.support().end()}; }

inline std::string to_string(const ModelKey& key) {
  std::string s;
  for (const Interaction& l : key) {
    if (!s.empty()) s += ' ';
    s += l.to_string();
  }
  return s;
}

namespace detail {

inline std::vector<const TraceRecord*> post_burnin(const ChainTrace& trace, long burnin) {
  std::vector<const TraceRecord*> out;
  for (const TraceRecord& r : trace.records) {
    if (r.iteration >= burnin) out.push_back(&r);
  }
  if (out.empty()) throw EmptySampleError("no trace records after burn-in " + std::to_string(burnin));
  return out;
}

}  // namespace detail

/// Fraction of post-burn-in records whose template contains each offset of tau0.
inline std::map<Offset, double> neighbor_marginals(const ChainTrace& trace, long burnin, const Template& tau0) {
  const auto recs = detail::post_burnin(trace, burnin);
  std::map<Offset, double> out;
  for (Offset t : tau0) out[t] = 0.0;
  for (const TraceRecord* r : recs) {
    for (Offset t : r->model.tmpl()) {
      auto it = out.find(t);
      if (it != out.end()) it->second += 1.0;
    }
  }
  for (auto& [t, p] : out) p /= static_cast<double>(recs.size());
  return out;
}

/// Inclusion frequency of every interaction seen after burn-in, most probable first.
inline std::vector<std::pair<Interaction, double>> interaction_marginals(const ChainTrace& trace, long burnin) {
  const auto recs = detail::post_burnin(trace, burnin);
  std::map<Interaction, long> counts;
  for (const TraceRecord* r : recs) {
    for (const Interaction& l : r->model.support()) ++counts[l];
  }
  std::vector<std::pair<Interaction, double>> out;
  for (const auto& [l, c] : counts) out.emplace_back(l, static_cast<double>(c) / static_cast<double>(recs.size()));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

/// theta(l) for every post-burn-in record, whether or not l is active.
inline std::vector<double> theta_histogram(const ChainTrace& trace, long burnin, const Interaction& l) {
  std::vector<double> out;
  for (const TraceRecord& r : trace.records) {
    if (r.iteration >= burnin) out.push_back(evaluate(r.model, l));
  }
  return out;
}

/// Distinct models with their counts, most frequent first (ties by key).
inline std::vector<std::pair<ModelKey, long>> tally_models(const ChainTrace& trace, long burnin) {
  const auto recs = detail::post_burnin(trace, burnin);
  std::map<ModelKey, long> counts;
  for (const TraceRecord* r : recs) ++counts[model_key(r->model)];
  std::vector<std::pair<ModelKey, long>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

struct ModelCluster {
  std::vector<ModelKey> models;
  double mass = 0.0;
  ModelKey seed;
};

/// Greedy clustering: seed at the most frequent unassigned model and flood
/// fill over observed models that differ by exactly one interaction.
inline std::vector<ModelCluster> model_clusters(const std::vector<std::pair<ModelKey, long>>& models,
                                                std::optional<std::size_t> max_clusters = std::nullopt) {
  std::vector<ModelCluster> out;
  if (models.empty()) return out;

  std::map<ModelKey, std::size_t> index;
  double total = 0.0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (!index.emplace(models[k].first, k).second) throw std::invalid_argument("model_clusters: duplicate model");
    total += static_cast<double>(models[k].second);
  }

  std::vector<std::vector<std::size_t>> adj(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    const ModelKey& key = models[k].first;
    for (std::size_t drop = 0; drop < key.size(); ++drop) {
      ModelKey smaller = key;
      smaller.erase(smaller.begin() + static_cast<std::ptrdiff_t>(drop));
      auto it = index.find(smaller);
      if (it == index.end()) continue;
      adj[k].push_back(it->second);
      adj[it->second].push_back(k);
    }
  }

  std::vector<std::size_t> order(models.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (models[a].second != models[b].second) return models[a].second > models[b].second;
    return models[a].first < models[b].first;
  });

  std::vector<bool> assigned(models.size(), false);
  for (std::size_t seed : order) {
    if (assigned[seed]) continue;
    if (max_clusters && out.size() >= *max_clusters) break;
    ModelCluster c;
    c.seed = models[seed].first;
    std::vector<std::size_t> stack{seed};
    assigned[seed] = true;
    long count = 0;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      c.models.push_back(models[k].first);
      count += models[k].second;
      for (std::size_t nb : adj[k]) {
        if (!assigned[nb]) {
          assigned[nb] = true;
          stack.push_back(nb);
        }
      }
    }
    std::sort(c.models.begin(), c.models.end());
    c.mass = static_cast<double>(count) / total;
    out.push_back(std::move(c));
  }
  return out;
}

/// Fractions of fully observed 2x2 blocks per configuration code
/// (top-left, top-right, bottom-left, bottom-right as bits 3..0).
inline std::array<double, 16> block_fractions(const Scene& scene) {
  const LatticeDims& d = scene.dims();
  std::array<double, 16> out{};
  if (d.m < 2 || d.n < 2) throw std::domain_error("block_fractions needs at least a 2x2 lattice");
  long blocks = 0;
  for (int i = 1; i < d.m; ++i) {
    for (int j = 1; j < d.n; ++j) {
      const NodeId tl{i, j}, tr{i, j + 1}, bl{i + 1, j}, br{i + 1, j + 1};
      if (!scene.observed(tl) || !scene.observed(tr) || !scene.observed(bl) || !scene.observed(br)) continue;
      const int code = (scene.value(tl) << 3) | (scene.value(tr) << 2) | (scene.value(bl) << 1) | scene.value(br);
      out[static_cast<std::size_t>(code)] += 1.0;
      ++blocks;
    }
  }
  if (blocks == 0) throw std::domain_error("block_fractions: no fully observed 2x2 block");
  for (double& v : out) v /= static_cast<double>(blocks);
  return out;
}

/// Block fractions of scenes simulated from randomly chosen post-burn-in
/// models; entry c holds the samples for configuration code c.
inline std::array<std::vector<double>, 16> posterior_block_densities(const ChainTrace& trace, long burnin,
                                                                     LatticeDims dims, std::size_t n_realizations,
                                                                     std::uint64_t seed) {
  const auto recs = detail::post_burnin(trace, burnin);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, recs.size() - 1);
  std::array<std::vector<double>, 16> out;
  for (auto& v : out) v.reserve(n_realizations);
  for (std::size_t k = 0; k < n_realizations; ++k) {
    const TraceRecord* r = recs[pick(rng)];
    const std::uint64_t sim_seed = rng();
    const auto f = block_fractions(simulate(Mmm(r->model), dims, sim_seed));
    for (std::size_t c = 0; c < 16; ++c) out[c].push_back(f[c]);
  }
  return out;
}

/// Records with iteration >= burnin and (iteration - burnin) % stride == 0.
inline ChainTrace subsample(const ChainTrace& trace, long burnin, long stride) {
  if (stride < 1) throw std::domain_error("stride must be at least 1");
  ChainTrace out;
  for (const TraceRecord& r : trace.records) {
    if (r.iteration >= burnin && (r.iteration - burnin) % stride == 0) out.records.push_back(r);
  }
  return out;
}

/// Number of iterations in [0, iterations) kept by subsample.
inline long subsample_count(long iterations, long burnin, long stride) {
  if (stride < 1) throw std::domain_error("stride must be at least 1");
  if (iterations <= burnin) return 0;
  return (iterations - burnin - 1) / stride + 1;
}

struct PosteriorSummary {
  std::map<Offset, double> neighbor_prob;
  std::vector<std::pair<Interaction, double>> interaction_prob;
  std::vector<std::pair<ModelKey, double>> model_freq;
  std::vector<long> iteration;
  std::vector<std::size_t> n_interactions;
  std::vector<double> log_posterior;
};

inline PosteriorSummary summarize(const ChainTrace& trace, long burnin, const Template& tau0) {
  PosteriorSummary s;
  s.neighbor_prob = neighbor_marginals(trace, burnin, tau0);
  s.interaction_prob = interaction_marginals(trace, burnin);
  const auto models = tally_models(trace, burnin);
  long total = 0;
  for (const auto& [k, c] : models) total += c;
  for (const auto& [k, c] : models) s.model_freq.emplace_back(k, static_cast<double>(c) / static_cast<double>(total));
  for (const TraceRecord& r : trace.records) {
    s.iteration.push_back(r.iteration);
    s.n_interactions.push_back(r.model.support().size());
    s.log_posterior.push_back(r.log_posterior);
  }
  return s;
}

}  // namespace mmm
