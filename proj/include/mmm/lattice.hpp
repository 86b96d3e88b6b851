#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmm/interaction.hpp"

namespace mmm {

struct LatticeDims {
  int m = 1;  // rows
  int n = 1;  // cols

  LatticeDims() = default;
  LatticeDims(int rows, int cols) : m(rows), n(cols) {
    if (rows < 1 || cols < 1) throw std::domain_error("lattice dimensions must be positive");
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(m) * static_cast<std::size_t>(n); }
  bool contains(int i, int j) const noexcept { return i >= 1 && i <= m && j >= 1 && j <= n; }

  friend bool operator==(const LatticeDims&, const LatticeDims&) = default;
};

/// 1-based lattice node; (1,1) is the top-left corner.
struct NodeId {
  int i = 1;
  int j = 1;

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline NodeId operator+(NodeId v, Offset t) noexcept { return {v.i + t.row, v.j + t.col}; }

/// Binary m x n scene with an observed/unobserved mask. Unobserved cells still
/// carry a value (the current fill-in).
class Scene {
 public:
  explicit Scene(LatticeDims dims = {}, bool observed = true)
      : dims_(dims), values_(dims.size(), 0), observed_(dims.size(), observed ? 1 : 0) {}

  const LatticeDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::size_t index(NodeId v) const {
    check(v);
    return static_cast<std::size_t>(v.i - 1) * static_cast<std::size_t>(dims_.n) + static_cast<std::size_t>(v.j - 1);
  }
  NodeId node(std::size_t idx) const noexcept {
    return {static_cast<int>(idx / static_cast<std::size_t>(dims_.n)) + 1,
            static_cast<int>(idx % static_cast<std::size_t>(dims_.n)) + 1};
  }

  bool value(NodeId v) const { return values_[index(v)] != 0; }
  bool observed(NodeId v) const { return observed_[index(v)] != 0; }
  void set_value(NodeId v, bool x) { values_[index(v)] = x ? 1 : 0; }
  void set_observed(NodeId v, bool o) { observed_[index(v)] = o ? 1 : 0; }

  /// Off-lattice cells read as 0.
  bool value_or_zero(int i, int j) const noexcept {
    return dims_.contains(i, j) && values_[static_cast<std::size_t>(i - 1) * dims_.n + (j - 1)] != 0;
  }

  bool value_at(std::size_t idx) const noexcept { return values_[idx] != 0; }
  bool observed_at(std::size_t idx) const noexcept { return observed_[idx] != 0; }
  void set_value_at(std::size_t idx, bool x) noexcept { values_[idx] = x ? 1 : 0; }

  std::size_t count_observed() const noexcept {
    std::size_t c = 0;
    for (auto o : observed_) c += o;
    return c;
  }

  friend bool operator==(const Scene&, const Scene&) = default;

 private:
  void check(NodeId v) const {
    if (!dims_.contains(v.i, v.j)) {
      throw std::domain_error("node (" + std::to_string(v.i) + "," + std::to_string(v.j) + ") is outside the " +
                              std::to_string(dims_.m) + "x" + std::to_string(dims_.n) + " lattice");
    }
  }

  LatticeDims dims_;
  std::vector<std::uint8_t> values_;
  std::vector<std::uint8_t> observed_;
};

/// Raster-order key: u precedes v iff lex_key(u) < lex_key(v).
inline long long lex_key(NodeId v, LatticeDims dims) {
  if (!dims.contains(v.i, v.j)) throw std::domain_error("lex_key: node outside lattice");
  return static_cast<long long>(dims.n) * v.i + v.j;
}

template <typename Offsets>
std::set<NodeId> translate(const Offsets& lambda, NodeId v) {
  std::set<NodeId> out;
  for (const Offset& t : lambda) out.insert(v + t);
  return out;
}

inline std::set<NodeId> sequential_neighborhood(const Template& tau, NodeId v, LatticeDims dims) {
  require_past(tau);
  std::set<NodeId> out;
  for (const Offset& t : tau) {
    NodeId u = v + t;
    if (dims.contains(u.i, u.j)) out.insert(u);
  }
  return out;
}

/// Nodes u whose sequential neighborhood contains v.
inline std::set<NodeId> reverse_dependents(const Template& tau, NodeId v, LatticeDims dims) {
  std::set<NodeId> out;
  for (const Offset& t : tau) {
    NodeId u = v + (-t);
    if (dims.contains(u.i, u.j)) out.insert(u);
  }
  return out;
}

/// Past-half-plane offsets with Euclidean norm strictly below r.
inline Template disk_template(double r) {
  if (!(r > 0.0)) throw std::domain_error("disk radius must be positive");
  Template out;
  const int reach = static_cast<int>(std::ceil(r));
  for (int row = -reach; row <= 0; ++row) {
    for (int col = -reach; col <= reach; ++col) {
      Offset t{row, col};
      if (in_past(t) && std::hypot(row, col) < r) out.insert(t);
    }
  }
  return out;
}

/// The on-neighbors of v in offset coordinates; off-lattice cells count as 0.
inline Interaction active_interaction(const Scene& scene, const Template& tau, NodeId v) {
  std::vector<Offset> on;
  for (const Offset& t : tau) {
    if (!in_past(t)) throw std::domain_error("active_interaction: template offset outside the past half-plane");
    NodeId u = v + t;
    if (scene.value_or_zero(u.i, u.j)) on.push_back(t);
  }
  return Interaction(std::move(on));
}

/// Pads the scene with `margin` unobserved zero cells on every side.
inline Scene extend_scene(const Scene& scene, int margin) {
  if (margin < 0) throw std::domain_error("margin must be non-negative");
  const LatticeDims& d = scene.dims();
  Scene out(LatticeDims(d.m + 2 * margin, d.n + 2 * margin), false);
  for (int i = 1; i <= d.m; ++i) {
    for (int j = 1; j <= d.n; ++j) {
      NodeId dst{i + margin, j + margin};
      out.set_value(dst, scene.value({i, j}));
      out.set_observed(dst, scene.observed({i, j}));
    }
  }
  return out;
}

inline Scene crop_scene(const Scene& scene, int margin) {
  const LatticeDims& d = scene.dims();
  if (margin < 0 || d.m <= 2 * margin || d.n <= 2 * margin) throw std::domain_error("crop margin too large");
  Scene out(LatticeDims(d.m - 2 * margin, d.n - 2 * margin));
  for (int i = 1; i <= out.dims().m; ++i) {
    for (int j = 1; j <= out.dims().n; ++j) {
      out.set_value({i, j}, scene.value({i + margin, j + margin}));
      out.set_observed({i, j}, scene.observed({i + margin, j + margin}));
    }
  }
  return out;
}

// ---- "MMM-SCENE v1" text format -------------------------------------------

inline void write_scene(std::ostream& os, const Scene& scene) {
  const LatticeDims& d = scene.dims();
  os << "MMM-SCENE v1 " << d.m << ' ' << d.n << '\n';
  std::string line(static_cast<std::size_t>(d.n), '0');
  for (int i = 1; i <= d.m; ++i) {
    for (int j = 1; j <= d.n; ++j) {
      line[j - 1] = !scene.observed({i, j}) ? '?' : (scene.value({i, j}) ? '1' : '0');
    }
    os << line << '\n';
  }
}

inline Scene read_scene(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("scene: empty input");
  std::istringstream hs(header);
  std::string magic, version;
  int m = 0, n = 0;
  if (!(hs >> magic >> version >> m >> n) || magic != "MMM-SCENE" || version != "v1") {
    throw std::runtime_error("scene: bad header '" + header + "'");
  }
  std::string extra;
  if (hs >> extra) throw std::runtime_error("scene: trailing tokens in header");
  Scene scene(LatticeDims(m, n));
  std::string line;
  for (int i = 1; i <= m; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error("scene: expected " + std::to_string(m) + " rows");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() != static_cast<std::size_t>(n)) {
      throw std::runtime_error("scene: row " + std::to_string(i) + " has " + std::to_string(line.size()) +
                               " cells, expected " + std::to_string(n));
    }
    for (int j = 1; j <= n; ++j) {
      switch (line[j - 1]) {
        case '0': break;
        case '1': scene.set_value({i, j}, true); break;
        case '?': scene.set_observed({i, j}, false); break;
        default: throw std::runtime_error("scene: invalid character in row " + std::to_string(i));
      }
    }
  }
  while (std::getline(is, line)) {
    if (!line.empty() && line != "\r") throw std::runtime_error("scene: unexpected content after last row");
  }
  return scene;
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  return read_scene(in);
}

inline void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene file: " + path);
  write_scene(out, scene);
}

}  // namespace mmm
