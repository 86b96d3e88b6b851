#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmm/model.hpp"

namespace mmm {

/// Log-density (up to a constant) with its derivative, on an interval.
struct LogDensity {
  std::function<std::pair<double, double>(double)> eval;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

class ConcavityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gilks-Wild adaptive rejection sampler with a tangent upper hull and a
/// secant squeeze. The hull adapts across draws; every draw is exact.
class AdaptiveRejectionSampler {
 public:
  static constexpr std::size_t kMaxPoints = 64;
  static constexpr int kMaxExpansions = 60;

  AdaptiveRejectionSampler(LogDensity target, std::pair<double, double> init) : target_(std::move(target)) {
    double a = std::max(init.first, target_.lower);
    double b = std::min(init.second, target_.upper);
    if (!(a < b)) throw BracketError("ARS: initial points must satisfy left < right inside the domain");
    auto [ha, da] = target_.eval(a);
    auto [hb, db] = target_.eval(b);
    if (db > da + 1e-9 * (1.0 + std::abs(da))) throw ConcavityError("ARS: derivative increases between initial points");
    if (std::isinf(target_.lower)) {
      double step = b - a;
      int k = 0;
      while (!(da > 0.0)) {
        if (++k > kMaxExpansions || !std::isfinite(ha)) throw BracketError("ARS: cannot bracket the mode from the left");
        // Keep the old left point as the new right point if it lies left of the mode.
        b = a, hb = ha, db = da;
        a -= step;
        step *= 2.0;
        std::tie(ha, da) = target_.eval(a);
      }
    }
    if (std::isinf(target_.upper)) {
      double step = b - a;
      int k = 0;
      while (!(db < 0.0)) {
        if (++k > kMaxExpansions || !std::isfinite(hb)) throw BracketError("ARS: cannot bracket the mode from the right");
        if (db > 0.0) a = b, ha = hb, da = db;
        b += step;
        step *= 2.0;
        std::tie(hb, db) = target_.eval(b);
      }
    }
    insert(a, ha, da);
    insert(b, hb, db);
    rebuild();
  }

  double draw(Rng& rng) {
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
    for (;;) {
      const double x = sample_hull(unif(rng), unif(rng));
      const double u = unif(rng);
      const double upper = hull_at(x);
      const double lower = squeeze_at(x);
      if (std::log(u) <= lower - upper) return x;
      auto [h, d] = target_.eval(x);
      if (h > upper + 1e-8 * (1.0 + std::abs(h))) {
        throw ConcavityError("ARS: log-density at " + std::to_string(x) + " lies above the tangent hull");
      }
      const bool accept = std::log(u) <= h - upper;
      if (points_.size() < kMaxPoints && std::isfinite(h)) {
        insert(x, h, d);
        rebuild();
      }
      if (accept) return x;
    }
  }

  std::size_t hull_size() const noexcept { return points_.size(); }

 private:
  struct Point {
    double x, h, d;
  };

  void insert(double x, double h, double d) {
    auto it = std::lower_bound(points_.begin(), points_.end(), x, [](const Point& p, double v) { return p.x < v; });
    if (it != points_.end() && it->x == x) return;
    it = points_.insert(it, Point{x, h, d});
    const std::size_t k = static_cast<std::size_t>(it - points_.begin());
    auto bad = [](const Point& l, const Point& r) { return r.d > l.d + 1e-9 * (1.0 + std::abs(l.d)); };
    if ((k > 0 && bad(points_[k - 1], points_[k])) || (k + 1 < points_.size() && bad(points_[k], points_[k + 1]))) {
      throw ConcavityError("ARS: derivative increases between support points");
    }
  }

  // Tangent intersections z_0 < ... < z_k bound the hull segments; segment k
  // uses the tangent at point k.
  void rebuild() {
    const std::size_t k = points_.size();
    z_.assign(k + 1, 0.0);
    z_[0] = target_.lower;
    z_[k] = target_.upper;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      const Point& p = points_[i];
      const Point& q = points_[i + 1];
      double z;
      const double dd = p.d - q.d;
      if (dd > 1e-12 * (std::abs(p.d) + std::abs(q.d) + 1.0)) {
        z = (q.h - p.h - q.x * q.d + p.x * p.d) / dd;
        z = std::clamp(z, p.x, q.x);
      } else {
        z = 0.5 * (p.x + q.x);
      }
      z_[i + 1] = z;
    }
    log_mass_.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) log_mass_[i] = segment_log_mass(i);
    const double top = *std::max_element(log_mass_.begin(), log_mass_.end());
    cum_.assign(k, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      acc += std::exp(log_mass_[i] - top);
      cum_[i] = acc;
    }
  }

  double tangent(std::size_t i, double x) const {
    const Point& p = points_[i];
    return p.h + p.d * (x - p.x);
  }

  double segment_log_mass(std::size_t i) const {
    const double lo = z_[i], hi = z_[i + 1];
    const double s = points_[i].d;
    if (!(hi > lo)) return -std::numeric_limits<double>::infinity();
    const double ta = std::isinf(lo) ? -std::numeric_limits<double>::infinity() : tangent(i, lo);
    const double tb = std::isinf(hi) ? -std::numeric_limits<double>::infinity() : tangent(i, hi);
    if (std::abs(s) * (hi - lo) < 1e-12) return ta + std::log(hi - lo);
    if (s > 0.0) return tb + std::log(-std::expm1(ta - tb)) - std::log(s);
    return ta + std::log(-std::expm1(tb - ta)) - std::log(-s);
  }

  double sample_hull(double w_segment, double w) const {
    const double target = w_segment * cum_.back();
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), target) - cum_.begin());
    i = std::min(i, cum_.size() - 1);
    while (std::isinf(log_mass_[i]) && i > 0) --i;
    const double lo = z_[i], hi = z_[i + 1];
    const double s = points_[i].d;
    double x;
    if (std::abs(s) * (hi - lo) < 1e-12) {
      x = lo + w * (hi - lo);
    } else if (s > 0.0) {
      const double span = std::isinf(lo) ? std::numeric_limits<double>::infinity() : hi - lo;
      x = hi + std::log(w + (1.0 - w) * std::exp(-s * span)) / s;
    } else {
      const double span = std::isinf(hi) ? std::numeric_limits<double>::infinity() : hi - lo;
      x = lo + std::log((1.0 - w) + w * std::exp(s * span)) / s;
    }
    return std::clamp(x, lo, hi);
  }

  double hull_at(double x) const {
    std::size_t i = static_cast<std::size_t>(std::upper_bound(z_.begin() + 1, z_.end() - 1, x) - (z_.begin() + 1));
    return tangent(i, x);
  }

  double squeeze_at(double x) const {
    if (x < points_.front().x || x > points_.back().x) return -std::numeric_limits<double>::infinity();
    auto it = std::upper_bound(points_.begin(), points_.end(), x, [](double v, const Point& p) { return v < p.x; });
    if (it == points_.end()) return points_.back().h;
    const Point& q = *it;
    const Point& p = *(it - 1);
    return p.h + (q.h - p.h) * (x - p.x) / (q.x - p.x);
  }

  LogDensity target_;
  std::vector<Point> points_;
  std::vector<double> z_;
  std::vector<double> log_mass_;
  std::vector<double> cum_;
};

/// One exact draw from the density proportional to exp(target).
inline double ars_sample(const LogDensity& target, std::pair<double, double> init, Rng& rng) {
  AdaptiveRejectionSampler sampler(target, init);
  return sampler.draw(rng);
}

inline double ars_sample(const LogDensity& target, std::pair<double, double> init, std::uint64_t seed) {
  Rng rng(seed);
  return ars_sample(target, init, rng);
}

}  // namespace mmm
