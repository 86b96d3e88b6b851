#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmm {

/// Integer lattice displacement. Row grows downward, so the "past" of a node
/// is everything above it plus everything to its left on the same row.
struct Offset {
  int row = 0;
  int col = 0;

  friend constexpr auto operator<=>(const Offset&, const Offset&) = default;
};

/// Strict past half-plane: row < 0, or row == 0 and col < 0.
constexpr bool in_past(Offset t) noexcept {
  return t.row < 0 || (t.row == 0 && t.col < 0);
}

constexpr Offset operator-(Offset t) noexcept { return {-t.row, -t.col}; }

/// A template sequential neighborhood (a finite subset of the past half-plane).
using Template = std::set<Offset>;

inline std::string to_string(Offset t) {
  return "(" + std::to_string(t.row) + "," + std::to_string(t.col) + ")";
}

inline void require_past(const Template& tau) {
  for (const Offset& t : tau) {
    if (!in_past(t)) {
      throw std::domain_error("offset " + to_string(t) + " is not in the past half-plane");
    }
  }
}

/// A finite set of past-half-plane offsets. Offsets are kept sorted, and
/// interactions order first by cardinality and then lexicographically, which
/// is the canonical iteration order of every interaction container.
class Interaction {
 public:
  Interaction() = default;
  Interaction(std::initializer_list<Offset> offsets) : Interaction(std::vector<Offset>(offsets)) {}

  explicit Interaction(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {
    std::sort(offsets_.begin(), offsets_.end());
    if (std::adjacent_find(offsets_.begin(), offsets_.end()) != offsets_.end()) {
      throw std::invalid_argument("interaction contains a duplicate offset");
    }
    for (Offset t : offsets_) {
      if (!in_past(t)) {
        throw std::domain_error("offset " + mmm::to_string(t) + " is not in the past half-plane");
      }
    }
  }

  std::size_t size() const noexcept { return offsets_.size(); }
  bool empty() const noexcept { return offsets_.empty(); }
  const std::vector<Offset>& offsets() const noexcept { return offsets_; }
  auto begin() const noexcept { return offsets_.begin(); }
  auto end() const noexcept { return offsets_.end(); }

  bool contains(Offset t) const { return std::binary_search(offsets_.begin(), offsets_.end(), t); }

  bool is_subset_of(const Interaction& other) const {
    return size() <= other.size() &&
           std::includes(other.offsets_.begin(), other.offsets_.end(), offsets_.begin(), offsets_.end());
  }

  Interaction with(Offset t) const {
    if (contains(t)) return *this;
    if (!in_past(t)) throw std::domain_error("offset " + mmm::to_string(t) + " is not in the past half-plane");
    Interaction out;
    out.offsets_ = offsets_;
    out.offsets_.insert(std::lower_bound(out.offsets_.begin(), out.offsets_.end(), t), t);
    return out;
  }

  Interaction without(Offset t) const {
    Interaction out;
    out.offsets_.reserve(offsets_.size());
    for (Offset o : offsets_) {
      if (o != t) out.offsets_.push_back(o);
    }
    return out;
  }

  /// All subsets obtained by dropping exactly one offset.
  std::vector<Interaction> facets() const {
    std::vector<Interaction> out;
    out.reserve(offsets_.size());
    for (Offset t : offsets_) out.push_back(without(t));
    return out;
  }

  std::string to_string() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
      if (k) os << ',';
      os << mmm::to_string(offsets_[k]);
    }
    os << '}';
    return os.str();
  }

  friend bool operator==(const Interaction&, const Interaction&) = default;

  friend std::strong_ordering operator<=>(const Interaction& a, const Interaction& b) {
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    return std::lexicographical_compare_three_way(a.offsets_.begin(), a.offsets_.end(), b.offsets_.begin(),
                                                  b.offsets_.end());
  }

 private:
  std::vector<Offset> offsets_;
};

}  // namespace mmm
