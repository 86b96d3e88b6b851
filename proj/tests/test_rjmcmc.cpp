#include <array>
#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mmm/rjmcmc.hpp"
#include "support.hpp"

using namespace mmm;
using namespace mmm::test;

namespace {

RunConfig small_config(double radius, long iterations, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.prior = PriorConfig::with_radius(radius);
  cfg.iterations = iterations;
  cfg.burnin = 0;
  cfg.stride = 1;
  cfg.seed = seed;
  return cfg;
}

Pbf constant(double t) { return Pbf(InteractionSet(), {{Interaction{}, t}}); }

/// Dense least squares over Omega(tau0): fit y(w) = f(w) with functions
/// supported on `support`; returns (beta, sse).
std::pair<InteractionMap, double> least_squares(const Pbf& f, const InteractionSet& support, const Template& tau0) {
  const auto omega = power_set(tau0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(omega.size()), static_cast<Eigen::Index>(support.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(omega.size()));
  for (std::size_t r = 0; r < omega.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = evaluate(f, omega[r]);
    Eigen::Index c = 0;
    for (const Interaction& l : support) x(static_cast<Eigen::Index>(r), c++) = l.is_subset_of(omega[r]) ? 1.0 : 0.0;
  }
  const Eigen::VectorXd b = x.colPivHouseholderQr().solve(y);
  InteractionMap beta;
  Eigen::Index c = 0;
  for (const Interaction& l : support) beta.emplace(l, b(c++));
  return {beta, (x * b - y).squaredNorm()};
}

double sse(const Pbf& f, const Pbf& g, const Template& tau0) {
  double s = 0.0;
  for (const Interaction& w : power_set(tau0)) {
    const double e = evaluate(f, w) - evaluate(g, w);
    s += e * e;
  }
  return s;
}

}  // namespace

TEST(RemovalWeights, UniformWhenNuIsZero) {
  const InteractionSet s({Interaction{}, Interaction{kW}, Interaction{kN}, Interaction{kNW}});
  Rng rng(1);
  const InteractionMap w = removal_weights(Pbf(s, random_values(rng, s)), 0.0);
  ASSERT_EQ(w.size(), 3u);
  for (const auto& [l, p] : w) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
}

TEST(RemovalWeights, SingleCandidateHasWeightOne) {
  const InteractionSet s({Interaction{}, Interaction{kW}});
  for (double nu : {0.0, 0.5, 50.0}) {
    const InteractionMap w = removal_weights(Pbf(s, {{Interaction{}, 1.0}, {Interaction{kW}, 9.0}}), nu);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w.at(Interaction{kW}), 1.0);
  }
}

TEST(RemovalWeights, ExponentialInDistance) {
  const InteractionSet s({Interaction{}, Interaction{kW}, Interaction{kN}});
  // d = beta^2 / 2 for a singleton: 0.16 and 0.04.
  const Pbf f = Pbf::from_beta(s, {{Interaction{}, 0.3}, {Interaction{kW}, std::sqrt(0.32)}, {Interaction{kN}, -std::sqrt(0.08)}});
  EXPECT_NEAR(removal_distance(f.beta_at(Interaction{kW}), Interaction{kW}), 0.16, 1e-12);
  const InteractionMap w = removal_weights(f, 0.5);
  const double a = std::exp(-0.08), b = std::exp(-0.02);
  EXPECT_NEAR(w.at(Interaction{kW}), a / (a + b), 1e-12);
  EXPECT_NEAR(w.at(Interaction{kN}), b / (a + b), 1e-12);
  EXPECT_TRUE(removal_weights(constant(1.0), 0.5).empty());
}

TEST(ProjectRemove, PairExample) {
  const InteractionSet s = full_support({kW, kN});
  const Pbf f = Pbf::from_beta(s, {{Interaction{}, 1.0}, {Interaction{kW}, 2.0}, {Interaction{kN}, 3.0},
                                   {Interaction{kW, kN}, 0.8}});
  const RemoveProjection p = project_remove(f, Interaction{kW, kN});
  EXPECT_DOUBLE_EQ(p.discarded, 0.8);
  EXPECT_EQ(p.beta.size(), 3u);
  EXPECT_NEAR(p.beta.at(Interaction{kW}), 2.4, 1e-15);
  EXPECT_NEAR(p.beta.at(Interaction{kN}), 3.4, 1e-15);
  EXPECT_NEAR(p.beta.at(Interaction{}), 0.8, 1e-15);
}

TEST(ProjectRemove, ZeroCoefficientKeepsOthers) {
  const InteractionSet s = full_support({kW, kN});
  const Pbf f = Pbf::from_beta(s, {{Interaction{}, 1.0}, {Interaction{kW}, 2.0}, {Interaction{kN}, 3.0},
                                   {Interaction{kW, kN}, 0.0}});
  const RemoveProjection p = project_remove(f, Interaction{kW, kN});
  for (const auto& [l, b] : p.beta) EXPECT_EQ(b, f.beta_at(l));
}

TEST(ProjectRemove, RejectsNonRemovable) {
  const Pbf f(full_support({kW, kN}), {{Interaction{}, 0}, {Interaction{kN}, 0}, {Interaction{kW}, 0}, {Interaction{kW, kN}, 0}});
  EXPECT_THROW(project_remove(f, Interaction{kW}), std::domain_error);
  EXPECT_THROW(project_remove(f, Interaction{}), std::domain_error);
  EXPECT_THROW(project_remove(f, Interaction{kNW}), std::domain_error);
}

TEST(ProjectRemove, MatchesDenseLeastSquares) {
  Rng rng(2);
  const Template tau0{kW, kN, kNW, kNE};
  for (int rep = 0; rep < 200; ++rep) {
    const Pbf f = random_pbf(rng, random_template(rng, tau0, 1 + rep % 4), -3, 3, 0.6);
    const auto cand = removable(f.support());
    const Interaction removed = cand[static_cast<std::size_t>(rep) % cand.size()];
    const Pbf g = remove_interaction(f, removed);
    const auto [beta, min_sse] = least_squares(f, g.support(), tau0);
    for (const auto& [l, b] : beta) EXPECT_NEAR(g.beta_at(l), b, 1e-8);
    const double achieved = sse(f, g, tau0);
    EXPECT_NEAR(achieved, min_sse, 1e-8);
    const double b2 = f.beta_at(removed) * f.beta_at(removed);
    const int k = static_cast<int>(removed.size());
    EXPECT_NEAR(achieved, b2 * std::ldexp(1.0, static_cast<int>(tau0.size()) - 2 * k), 1e-8);
    // Over the subsets of the removed interaction alone the minimum is the removal distance.
    const Template own(removed.begin(), removed.end());
    EXPECT_NEAR(sse(f, g, own), removal_distance(f.beta_at(removed), removed), 1e-8);
  }
}

TEST(AddInteraction, InvertsRemoval) {
  Rng rng(3);
  const Template tau0 = disk_template(2.5);
  for (int rep = 0; rep < 200; ++rep) {
    const Pbf f = random_pbf(rng, random_template(rng, tau0, 1 + rep % 5), -3, 3, 0.6);
    for (const Interaction& l : removable(f.support())) {
      const RemoveProjection p = project_remove(f, l);
      const Pbf back = add_interaction(remove_interaction(f, l), l, p.discarded);
      ASSERT_EQ(back.support(), f.support());
      for (const auto& [m, t] : f.theta()) EXPECT_NEAR(back.theta_at(m), t, 1e-12);
    }
  }
}

TEST(AddInteraction, RejectsActiveInteraction) {
  EXPECT_THROW(add_interaction(constant(0), Interaction{}, 1.0), std::domain_error);
  EXPECT_THROW(add_interaction(constant(0), Interaction{kW, kN}, 1.0), std::domain_error);
}

TEST(AddDirection, IsLinearInTheNewCoefficient) {
  Rng rng(4);
  const Template tau0 = disk_template(2.5);
  for (int rep = 0; rep < 100; ++rep) {
    const Pbf f = random_pbf(rng, random_template(rng, tau0, rep % 4), -3, 3, 0.5);
    const AddCandidates c = addable(f.support(), tau0);
    std::vector<Interaction> all(c.higher_order);
    for (Offset t : c.first_order) all.push_back(Interaction{t});
    const Interaction added = all[static_cast<std::size_t>(rep) % all.size()];
    const AddDirection d = add_direction(f, added);
    for (double a : {-2.0, 0.0, 1.3}) {
      const Pbf g = add_interaction(f, added, a);
      for (const auto& [l, t] : g.theta()) EXPECT_NEAR(t, d.theta.at(l) + a * d.delta.at(l), 1e-12);
    }
  }
}

TEST(TransformMatrix, TwoByTwo) {
  const Eigen::MatrixXd a = transform_matrix(InteractionSet({Interaction{}, Interaction{kW}}), Interaction{kW});
  Eigen::Matrix2d expected;
  expected << 0.5, 0.5, -1.0, 1.0;
  EXPECT_LT((a - expected).norm(), 1e-15);
  EXPECT_NEAR(std::abs(a.determinant()), 1.0, 1e-15);
}

TEST(TransformMatrix, UnitDeterminantAndInverse) {
  Rng rng(5);
  const Template tau0 = disk_template(2.5);
  int cases = 0;
  while (cases < 100) {
    const Pbf f = random_pbf(rng, random_template(rng, tau0, 1 + cases % 4), -1, 1, 0.5);
    if (f.support().size() > 8) continue;
    const auto cand = removable(f.support());
    const Interaction removed = cand[static_cast<std::size_t>(cases) % cand.size()];
    const Eigen::MatrixXd a = transform_matrix(f.support(), removed);
    EXPECT_NEAR(std::abs(a.determinant()), 1.0, 1e-9);
    const auto n = a.rows();
    EXPECT_LT((a * a.inverse() - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-10);
    ++cases;
  }
}

TEST(TransformMatrix, MoebiusFactorIsUnitLowerTriangular) {
  Rng rng(6);
  const Template tau0 = disk_template(2.5);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd m = moebius_matrix(random_support(rng, random_template(rng, tau0, 1 + rep % 4), 0.6));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      EXPECT_EQ(m(i, i), 1.0);
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) EXPECT_EQ(m(i, j), 0.0);
    }
  }
}

TEST(StructureUpdate, NothingRemovableFromConstantModel) {
  RunConfig cfg = small_config(2.0, 0);
  Rng rng(7);
  const ModelState s{constant(0.4), Scene({4, 4})};
  int removals = 0;
  for (int k = 0; k < 200; ++k) {
    auto [next, out] = structure_update(s, cfg, rng);
    if (out.kind == MoveKind::null) {
      EXPECT_TRUE(out.accepted);
      EXPECT_EQ(next.pbf, s.pbf);
      ++removals;
    }
    EXPECT_NE(out.kind, MoveKind::remove);
  }
  EXPECT_GT(removals, 50);
}

TEST(StructureUpdate, FullModelHasNothingToAdd) {
  RunConfig cfg = small_config(1.2, 0);
  ASSERT_EQ(cfg.prior.tau0, (Template{kW, kN}));
  Rng rng(8);
  const ModelState s{Pbf(full_support({kW, kN}), {{Interaction{}, 0}, {Interaction{kN}, 0}, {Interaction{kW}, 0},
                                                  {Interaction{kW, kN}, 0}}),
                     random_scene(rng, {5, 5})};
  for (int k = 0; k < 100; ++k) {
    auto [next, out] = structure_update(s, cfg, rng);
    EXPECT_NE(out.kind, MoveKind::add);
  }
}

TEST(GibbsUpdate, ZeroDirectionLeavesStateUnchanged) {
  Rng rng(9);
  const RunConfig cfg = small_config(2.5, 0);
  const ModelState s{random_pbf(rng, {kW, kN}), random_scene(rng, {6, 6})};
  Chain chain(s, cfg);
  InteractionMap zero;
  for (const Interaction& l : s.pbf.support()) zero.emplace(l, 0.0);
  const MoveOutcome out = chain.update_parameters_along(zero, rng);
  EXPECT_EQ(out.kind, MoveKind::param);
  EXPECT_TRUE(out.accepted);
  EXPECT_EQ(chain.state().pbf, s.pbf);
}

TEST(GibbsUpdate, StationaryLawIsThePriorWithoutData) {
  RunConfig cfg = small_config(2.0, 0);
  cfg.prior.sigma = 3.0;
  Chain chain({constant(0.0), Scene({1, 1}, false)}, cfg);
  Rng rng(10);
  std::vector<double> xs;
  for (int k = 0; k < 10'000; ++k) {
    chain.sweep(rng);
    chain.update_parameters(rng);
    xs.push_back(chain.state().pbf.theta_at(Interaction{}));
  }
  const GridCdf cdf(LogDensity{[&](double t) {
    return std::pair{log_theta_density(t, cfg.prior.sigma), 1.0 - 2.0 * logistic(t) - t / (cfg.prior.sigma * cfg.prior.sigma)};
  }});
  EXPECT_LT(ks_statistic(xs, cdf), ks_critical_1pct(xs.size()));
}

TEST(Sweep, NoUnobservedCellsIsIdentity) {
  Rng rng(11);
  const Scene scene = random_scene(rng, {5, 5});
  const ModelState s{constant(2.0), scene};
  EXPECT_EQ(single_site_sweep(s, small_config(2.0, 0), rng).scene, scene);
}

TEST(Sweep, FairCoinFraction) {
  Chain chain({constant(0.0), Scene({10, 10}, false)}, small_config(2.0, 0));
  Rng rng(12);
  double ones = 0.0;
  const int sweeps = 10'000;
  for (int k = 0; k < sweeps; ++k) {
    chain.sweep(rng);
    ones += static_cast<double>(chain.state().scene.size() - [&] {
      std::size_t zeros = 0;
      for (std::size_t i = 0; i < chain.state().scene.size(); ++i) zeros += !chain.state().scene.value_at(i);
      return zeros;
    }());
  }
  EXPECT_NEAR(ones / (sweeps * 100.0), 0.5, 0.02);
}

TEST(Sweep, SaturatedModelFillsOnes) {
  Rng rng(13);
  ModelState s{constant(50.0), Scene({3, 3}, false)};
  for (int k = 0; k < 10; ++k) s = single_site_sweep(std::move(s), small_config(2.0, 0), rng);
  for (std::size_t i = 0; i < s.scene.size(); ++i) EXPECT_TRUE(s.scene.value_at(i));
}

TEST(Sweep, MatchesExactConditionalsWithInteractions) {
  // Two unobserved cells with everything else observed: the sweep chain must
  // reproduce the exact joint conditional of the pair.
  Rng rng(14);
  const Pbf f = random_pbf(rng, {kW, kN, kNW}, -1.5, 1.5, 1.0);
  Scene scene = random_scene(rng, {4, 4});
  const std::size_t a = 5, b = 6;
  scene.set_observed(scene.node(a), false);
  scene.set_observed(scene.node(b), false);
  double weights[4];
  double total = 0.0;
  for (int c = 0; c < 4; ++c) {
    Scene s = scene;
    s.set_value_at(a, c & 1);
    s.set_value_at(b, c & 2);
    weights[c] = std::exp(log_likelihood(Mmm(f), s));
    total += weights[c];
  }
  Chain chain({f, scene}, small_config(2.0, 0));
  std::array<double, 4> freq{};
  const int n = 40'000;
  for (int k = 0; k < n; ++k) {
    chain.sweep(rng);
    freq[static_cast<std::size_t>(chain.state().scene.value_at(a) + 2 * chain.state().scene.value_at(b))] += 1.0 / n;
  }
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(freq[static_cast<std::size_t>(c)], weights[c] / total, 0.015) << c;
}

TEST(Chain, CachedPosteriorMatchesDirectEvaluation) {
  Rng rng(15);
  RunConfig cfg = small_config(2.5, 0);
  Chain chain(initial_state(random_scene(rng, {10, 9}, 0.4, 0.7), cfg, rng), cfg);
  for (int k = 0; k < 1'000; ++k) {
    const MoveOutcome out = chain.iterate(rng);
    const double direct = log_posterior(chain.state(), cfg.prior);
    EXPECT_NEAR(out.log_posterior, direct, 1e-8 * std::max(1.0, std::abs(direct))) << k;
    EXPECT_NO_THROW(validate_state(chain.state(), cfg.prior));
  }
}

TEST(RunChain, ZeroIterationsKeepsInitialState) {
  const ChainTrace t = run_chain(Scene({3, 3}), small_config(2.0, 0));
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.records[0].iteration, 0);
  EXPECT_EQ(t.records[0].model.support().size(), 1u);
  EXPECT_EQ(t.records[0].move, MoveKind::null);
}

TEST(RunChain, BookkeepingAndObservedCells) {
  Rng rng(16);
  const Scene scene = random_scene(rng, {8, 8}, 0.5, 0.6);
  RunConfig cfg = small_config(2.5, 300, 3);
  long prev = -1;
  std::size_t n = 0;
  const ModelState last = run_chain(scene, cfg, [&](const TraceRecord& r) {
    EXPECT_GT(r.iteration, prev);
    prev = r.iteration;
    ++n;
    EXPECT_TRUE(is_dense(r.model.support().members()));
  });
  EXPECT_EQ(n, 301u);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!scene.observed_at(i)) continue;
    EXPECT_EQ(last.scene.value_at(i), scene.value_at(i));
    EXPECT_TRUE(last.scene.observed_at(i));
  }
}

TEST(RunChain, DeterministicGivenSeed) {
  Rng rng(17);
  const Scene scene = random_scene(rng, {8, 8}, 0.5, 0.8);
  const RunConfig cfg = small_config(2.5, 300, 11);
  const ChainTrace a = run_chain(scene, cfg), b = run_chain(scene, cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].model, b.records[k].model);
    EXPECT_EQ(a.records[k].log_posterior, b.records[k].log_posterior);
    EXPECT_EQ(a.records[k].move, b.records[k].move);
  }
}

TEST(RunChain, RecoversPriorOnUnobservedScene) {
  // tau0 = {W, N}: n_tau is uniform on {0,1,2} and the pair is active with probability p*.
  RunConfig cfg = small_config(1.2, 30'000, 5);
  const double p = cfg.prior.p_star;
  const std::map<std::size_t, double> by_size{{1, 1.0 / 3}, {2, 1.0 / 3}, {3, 1.0 / 3 * (1 - p)}, {4, 1.0 / 3 * p}};
  std::map<std::size_t, double> freq;
  std::size_t n = 0;
  run_chain(Scene({6, 6}, false), cfg, [&](const TraceRecord& r) {
    if (r.iteration < 1'000) return;
    freq[r.model.support().size()] += 1.0;
    ++n;
  });
  for (const auto& [size, mass] : by_size) {
    EXPECT_NEAR(freq[size] / static_cast<double>(n), mass, 0.04) << "|Lambda| = " << size;
  }
}
