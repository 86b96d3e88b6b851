#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmm/interaction.hpp"

namespace mmm {

/// Values keyed by interaction (theta-values or beta-values), iterated in
/// canonical order.
using InteractionMap = std::map<Interaction, double>;

/// Subset-closed and contains the empty interaction.
inline bool is_dense(const std::set<Interaction>& lambda) {
  if (!lambda.contains(Interaction{})) return false;
  for (const Interaction& l : lambda) {
    // Closure under single-offset removal implies closure under all subsets.
    for (const Interaction& f : l.facets()) {
      if (!lambda.contains(f)) return false;
    }
  }
  return true;
}

/// A dense set of active interactions together with its minimal template.
class InteractionSet {
 public:
  InteractionSet() : members_{Interaction{}} {}

  explicit InteractionSet(std::set<Interaction> members) : members_(std::move(members)) {
    if (!is_dense(members_)) throw std::domain_error("interaction set is not dense");
    for (const Interaction& l : members_) {
      if (l.size() == 1) template_.insert(*l.begin());
    }
  }

  const std::set<Interaction>& members() const noexcept { return members_; }
  const Template& tmpl() const noexcept { return template_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool contains(const Interaction& l) const { return members_.contains(l); }
  auto begin() const noexcept { return members_.begin(); }
  auto end() const noexcept { return members_.end(); }

  /// Members of cardinality k.
  std::vector<Interaction> level(std::size_t k) const {
    std::vector<Interaction> out;
    for (const Interaction& l : members_) {
      if (l.size() == k) out.push_back(l);
    }
    return out;
  }

  std::size_t max_order() const noexcept { return members_.empty() ? 0 : members_.rbegin()->size(); }

  InteractionSet inserted(const Interaction& l) const {
    auto m = members_;
    m.insert(l);
    return InteractionSet(std::move(m));
  }

  InteractionSet erased(const Interaction& l) const {
    auto m = members_;
    m.erase(l);
    return InteractionSet(std::move(m));
  }

  friend bool operator==(const InteractionSet& a, const InteractionSet& b) { return a.members_ == b.members_; }

 private:
  std::set<Interaction> members_;
  Template template_;
};

namespace detail {

inline void require_keys(const InteractionSet& support, const InteractionMap& values, const char* what) {
  if (values.size() != support.size()) {
    throw std::invalid_argument(std::string(what) + " must have exactly one entry per active interaction");
  }
  auto it = values.begin();
  for (const Interaction& l : support) {
    if (it->first != l) throw std::invalid_argument(std::string(what) + " is not keyed by the active interactions");
    ++it;
  }
}

}  // namespace detail

/// Triangular solve of theta(l) = sum_{l' in support, l' subset of l} beta(l').
inline InteractionMap beta_from_theta(const InteractionSet& support, const InteractionMap& theta) {
  if (!is_dense(support.members())) throw std::domain_error("beta_from_theta: support is not dense");
  detail::require_keys(support, theta, "theta");
  InteractionMap beta;
  for (const auto& [l, value] : theta) {
    double b = value;
    // Canonical order visits every proper subset before l.
    for (const auto& [sub, sub_beta] : beta) {
      if (sub.size() >= l.size()) break;
      if (sub.is_subset_of(l)) b -= sub_beta;
    }
    beta.emplace_hint(beta.end(), l, b);
  }
  return beta;
}

inline InteractionMap theta_from_beta(const InteractionSet& support, const InteractionMap& beta) {
  detail::require_keys(support, beta, "beta");
  InteractionMap theta;
  for (const Interaction& l : support) {
    double t = 0.0;
    for (const auto& [sub, b] : beta) {
      if (sub.size() > l.size()) break;
      if (sub.is_subset_of(l)) t += b;
    }
    theta.emplace_hint(theta.end(), l, t);
  }
  return theta;
}

/// Pseudo-Boolean function represented on a dense support. Theta-values are
/// canonical; beta-values are derived whenever the function changes.
class Pbf {
 public:
  Pbf() : theta_{{Interaction{}, 0.0}}, beta_{{Interaction{}, 0.0}} {}

  Pbf(InteractionSet support, InteractionMap theta) : support_(std::move(support)), theta_(std::move(theta)) {
    beta_ = beta_from_theta(support_, theta_);
  }

  static Pbf from_beta(InteractionSet support, InteractionMap beta) {
    Pbf f;
    f.theta_ = theta_from_beta(support, beta);
    f.beta_ = std::move(beta);
    f.support_ = std::move(support);
    return f;
  }

  const InteractionSet& support() const noexcept { return support_; }
  const Template& tmpl() const noexcept { return support_.tmpl(); }
  const InteractionMap& theta() const noexcept { return theta_; }
  const InteractionMap& beta() const noexcept { return beta_; }

  double theta_at(const Interaction& l) const {
    auto it = theta_.find(l);
    if (it == theta_.end()) throw std::out_of_range("theta_at: " + l.to_string() + " is not active");
    return it->second;
  }

  double beta_at(const Interaction& l) const {
    auto it = beta_.find(l);
    return it == beta_.end() ? 0.0 : it->second;
  }

  friend bool operator==(const Pbf& a, const Pbf& b) { return a.support_ == b.support_ && a.theta_ == b.theta_; }

 private:
  InteractionSet support_;
  InteractionMap theta_;
  InteractionMap beta_;
};

/// theta at an arbitrary interaction; offsets outside the template are inert.
inline double evaluate(const Pbf& f, const Interaction& l) {
  if (auto it = f.theta().find(l); it != f.theta().end()) return it->second;
  double t = 0.0;
  for (const auto& [sub, b] : f.beta()) {
    if (sub.size() > l.size()) break;
    if (sub.is_subset_of(l)) t += b;
  }
  return t;
}

/// Non-empty members whose removal keeps the support dense, i.e. members that
/// are not a proper subset of any other member.
inline std::vector<Interaction> removable(const InteractionSet& support) {
  std::vector<Interaction> out;
  for (const Interaction& l : support) {
    if (l.empty()) continue;
    bool maximal = true;
    // Density means any superset implies a superset one element larger.
    for (Offset t : support.tmpl()) {
      if (!l.contains(t) && support.contains(l.with(t))) {
        maximal = false;
        break;
      }
    }
    if (maximal) out.push_back(l);
  }
  return out;
}

struct AddCandidates {
  std::vector<Offset> first_order;
  std::vector<Interaction> higher_order;
};

/// Interactions of order >= 2 outside the support whose facets are all active.
inline std::vector<Interaction> higher_order_extensions(const InteractionSet& support) {
  std::set<Interaction> found;
  for (const Interaction& l : support) {
    if (l.empty()) continue;
    for (Offset t : support.tmpl()) {
      if (l.contains(t)) continue;
      Interaction cand = l.with(t);
      if (support.contains(cand) || found.contains(cand)) continue;
      bool ok = true;
      for (const Interaction& f : cand.facets()) {
        if (!support.contains(f)) {
          ok = false;
          break;
        }
      }
      if (ok) found.insert(std::move(cand));
    }
  }
  return {found.begin(), found.end()};
}

inline AddCandidates addable(const InteractionSet& support, const Template& tau0) {
  AddCandidates out;
  for (Offset t : support.tmpl()) {
    if (!tau0.contains(t)) throw std::domain_error("addable: template is not contained in tau0");
  }
  for (Offset t : tau0) {
    if (!support.tmpl().contains(t)) out.first_order.push_back(t);
  }
  out.higher_order = higher_order_extensions(support);
  return out;
}

/// DAG of the support: an edge l' -> l whenever l adds exactly one offset to l'.
inline std::string to_dot(const InteractionSet& support) {
  std::ostringstream os;
  std::map<Interaction, std::size_t> id;
  os << "digraph interactions {\n";
  for (const Interaction& l : support) {
    std::size_t k = id.size();
    id.emplace(l, k);
    os << "  n" << k << " [label=\"" << l.to_string() << "\"];\n";
  }
  for (const Interaction& l : support) {
    for (const Interaction& parent : l.facets()) {
      os << "  n" << id.at(parent) << " -> n" << id.at(l) << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace mmm
