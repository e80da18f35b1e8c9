#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "omnisynth/selection.hpp"
#include "support/planted.hpp"

using namespace omnisynth;
using namespace omnisynth::selection;

namespace {

// Full joint q(t_c) by enumeration: map from position tuple to mass.
std::map<std::vector<std::size_t>, double> joint_q(const FactorizedQ& q, const PositionPrior& prior) {
  std::map<std::vector<std::size_t>, double> joint{{{}, 1.0}};
  for (std::size_t i = 0; i < q.factors(); ++i) {
    // Factor mass written out from the definition, independent of support().
    std::map<std::size_t, double> f;
    const auto& nb = prior.neighbors[q.mu[i]];
    f[q.mu[i]] += 1.0 - q.epsilon * nb.size();
    for (std::size_t j : nb) f[j] += q.epsilon;
    std::map<std::vector<std::size_t>, double> next;
    for (const auto& [tuple, w] : joint)
      for (const auto& [pos, p] : f) {
        auto t = tuple;
        t.push_back(pos);
        next[t] += w * p;
      }
    joint = std::move(next);
  }
  return joint;
}

// KL of the joint against the uniform joint prior N^-M.
double brute_force_kl(const FactorizedQ& q, const PositionPrior& prior) {
  const double pm = std::pow(static_cast<double>(prior.size()), -static_cast<double>(q.factors()));
  double kl = 0.0;
  for (const auto& [t, w] : joint_q(q, prior))
    if (w > 0.0) kl += w * std::log(w / pm);
  return kl;
}

PositionPrior ring_free_grid(std::size_t per_line) {
  DepthBounds b{-2.0, 2.0, -1.5, 1.5};
  return PositionPrior::from_grid(geometry::reprojection_grid(b, static_cast<int>(per_line)));
}

}  // namespace

TEST(Prior, ValidationAndGrid) {
  const auto p = ring_free_grid(5);
  EXPECT_EQ(p.size(), 10u);
  EXPECT_EQ(p.max_degree(), 2u);
  PositionPrior bad;
  bad.neighbors = {{1}, {}};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.neighbors = {{1, 2, 3}, {0}, {0}, {0}};
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(FactorizedQ, FactorsSumToOneExactly) {
  const auto prior = PositionPrior::line(6);
  FactorizedQ q{{0, 2, 5}, 0.25};
  for (std::size_t i = 0; i < q.factors(); ++i) {
    double s = 0.0;
    for (const auto& [pos, p] : q.support(i, prior)) s += p;
    EXPECT_EQ(s, 1.0);
  }
  q.epsilon = 0.6;
  EXPECT_THROW(q.validate(prior), InvalidArgument);
}

TEST(Kl, ClosedForms) {
  const auto prior = PositionPrior::line(50);
  FactorizedQ delta{{3, 10, 20, 40}, 0.0};
  EXPECT_NEAR(kl_q_p(delta, prior), 4.0 * std::log(50.0), 1e-9);
  EXPECT_NEAR(kl_q_p(delta, prior), 15.648, 1e-3);
  FactorizedQ one{{10}, 0.25};
  const double expected = 0.5 * std::log(25.0) + 0.5 * std::log(12.5);
  EXPECT_NEAR(kl_q_p(one, prior), expected, 1e-9);
  EXPECT_NEAR(expected, 2.872, 1e-3);
}

TEST(Kl, MatchesBruteForceAndIsNonNegative) {
  Rng rng(3);
  for (std::size_t n = 2; n <= 10; ++n) {
    const auto prior = PositionPrior::line(n);
    for (int trial = 0; trial < 10; ++trial) {
      FactorizedQ q;
      q.epsilon = rng.uniform(0.0, 0.5);
      const std::size_t M = 1 + rng.uniform_int(3);
      for (std::size_t i = 0; i < M; ++i) q.mu.push_back(rng.uniform_int(n));
      const double kl = kl_q_p(q, prior);
      EXPECT_NEAR(kl, brute_force_kl(q, prior), 1e-9);
      EXPECT_GT(kl, 0.0);
    }
  }
  // q equals the prior: three candidates, centre base, eps = 1/3.
  const auto three = PositionPrior::line(3);
  EXPECT_NEAR(kl_q_p(FactorizedQ{{1}, 1.0 / 3.0}, three), 0.0, 1e-15);
}

TEST(Elbo, ClosedForms) {
  const auto prior = PositionPrior::line(50);
  const FactorizedQ q{{5, 15, 25, 35}, 0.25};
  EXPECT_NEAR(elbo({1, 1, 1, 1}, {1, 1, 1, 1}, q, prior), -4.0 * (0.5 * std::log(25.0) + 0.5 * std::log(12.5)), 1e-9);
  EXPECT_NEAR(elbo({1, 1, 1, 1}, {1, 1, 1, 1}, q, prior), -11.489, 1e-3);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(elbo({e, e, e, e}, {e, e, e, e}, q, prior), -16.489, 1e-3);
  EXPECT_NEAR(elbo({e, e, e, e}, {e, e, e, e}, q, prior),
              -4.0 * (0.5 * std::log(25.0) + 0.5 * std::log(12.5)) - 5.0, 1e-9);
}

TEST(Elbo, MonotoneInScoresAndClamped) {
  const auto prior = PositionPrior::line(10);
  const FactorizedQ q{{2, 7}, 0.25};
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> ev{rng.uniform(), rng.uniform()}, cp{rng.uniform(), rng.uniform()};
    const double base = elbo(ev, cp, q, prior);
    auto ev2 = ev;
    ev2[rng.uniform_int(2)] += 0.01;
    EXPECT_GT(elbo(ev2, cp, q, prior), base);
    auto cp2 = cp;
    cp2[rng.uniform_int(2)] += 0.01;
    EXPECT_GT(elbo(ev, cp2, q, prior), base);
  }
  EXPECT_EQ(elbo({0.0}, {0.0, 0.0}, q, prior), elbo({1e-6}, {1e-6, 1e-6}, q, prior));
  EXPECT_TRUE(std::isfinite(elbo({0.0}, {0.0, 0.0}, q, prior)));
  EXPECT_THROW(elbo({NAN}, {1.0, 1.0}, q, prior), InvalidArgument);
}

// Lower bound with q(I_c | t_c) a delta at the completion, expectation over
// q(t_c) enumerated on the joint.
TEST(Elbo, ExactEnumerationMatchesBruteForce) {
  Rng rng(9);
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto prior = PositionPrior::line(n);
    std::vector<double> comp_score(n), eval_weight(n);
    for (std::size_t i = 0; i < n; ++i) {
      comp_score[i] = rng.uniform(0.05, 1.0);
      eval_weight[i] = rng.uniform(0.1, 2.0);
    }
    const ScoreFn score = [&](const std::vector<std::size_t>& t) {
      Scores s;
      double load = 0.0;
      for (std::size_t i : t) {
        s.comp.push_back(comp_score[i]);
        load += eval_weight[i];
      }
      s.eval = {std::exp(-load), std::exp(-0.5 * load)};
      return s;
    };
    for (int trial = 0; trial < 5; ++trial) {
      FactorizedQ q;
      q.epsilon = rng.uniform(0.0, 0.5);
      const std::size_t M = 1 + rng.uniform_int(3);
      for (std::size_t i = 0; i < M; ++i) q.mu.push_back(rng.uniform_int(n));
      double expectation = 0.0;
      for (const auto& [t, w] : joint_q(q, prior)) {
        const Scores s = score(t);
        double term = 0.5 * (std::log(s.eval[0]) + std::log(s.eval[1]));
        for (double d : s.comp) term += std::log(d);
        expectation += w * term;
      }
      EXPECT_NEAR(elbo_exact(q, prior, score), -brute_force_kl(q, prior) + expectation, 1e-9);
    }
  }
  // A delta q makes the exact and sample-point bounds coincide.
  const auto prior = PositionPrior::line(4);
  const FactorizedQ delta{{1, 3}, 0.0};
  const ScoreFn s = [](const std::vector<std::size_t>& t) { return Scores{{0.5}, {0.2 + 0.1 * t[0], 0.3}}; };
  const Scores at = s(delta.mu);
  EXPECT_NEAR(elbo_exact(delta, prior, s), elbo(at.eval, at.comp, delta, prior), 1e-12);
}

TEST(Sampling, StayFrequencyAndSupport) {
  const auto prior = PositionPrior::line(20);
  FactorizedQ q{{7, 0}, 0.25};
  Rng rng(4);
  int stay = 0, end_stay = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const auto t = sample_positions(q, prior, rng);
    EXPECT_TRUE(t[0] == 6 || t[0] == 7 || t[0] == 8);
    EXPECT_TRUE(t[1] == 0 || t[1] == 1);
    stay += t[0] == 7;
    end_stay += t[1] == 0;
  }
  EXPECT_NEAR(stay / static_cast<double>(n), 0.5, 0.02);
  EXPECT_NEAR(end_stay / static_cast<double>(n), 0.75, 0.02);
  q.epsilon = 0.0;
  for (int k = 0; k < 100; ++k) EXPECT_EQ(sample_positions(q, prior, rng), q.mu);
}

TEST(Step, FirstCallAcceptsAndBestIsMonotone) {
  const auto prior = PositionPrior::line(12);
  Rng rng(2);
  auto state = initialize_selection(prior, 3, 0.25, 500, InitMode::Spread, rng);
  EXPECT_EQ(state.q.mu, (std::vector<std::size_t>{2, 6, 10}));
  EXPECT_EQ(state.t_c, state.q.mu);
  Rng noise(5);
  const ScoreFn score = [&](const std::vector<std::size_t>& t) {
    Scores s{{noise.uniform()}, {}};
    for (std::size_t i : t) s.comp.push_back(0.1 + 0.07 * static_cast<double>(i));
    return s;
  };
  const auto first = selection_step(state, prior, score, rng);
  EXPECT_TRUE(first.accepted);
  EXPECT_EQ(first.iteration, 500u);
  double best = first.best_elbo;
  for (int k = 0; k < 200; ++k) {
    const auto r = selection_step(state, prior, score, rng);
    EXPECT_GE(r.best_elbo, best);
    EXPECT_EQ(r.accepted, r.elbo > best);
    if (r.accepted) EXPECT_EQ(r.mu, r.evaluated);
    best = r.best_elbo;
  }
}

TEST(Step, ScorerFailurePropagates) {
  const auto prior = PositionPrior::line(5);
  Rng rng(1);
  auto state = initialize_selection(prior, 2, 0.25, 10, InitMode::Random, rng);
  const ScoreFn bad = [](const std::vector<std::size_t>&) -> Scores { throw Error("render failed"); };
  EXPECT_THROW(selection_step(state, prior, bad, rng), Error);
  EXPECT_THROW(initialize_selection(prior, 6, 0.25, 10, InitMode::Spread, rng), InvalidArgument);
}

TEST(Trace, CsvColumns) {
  const auto path = std::filesystem::temp_directory_path() / "omnisynth_selection_trace.csv";
  SelectionRecord r;
  r.iteration = 500;
  r.elbo = -3.5;
  r.best_elbo = -3.5;
  r.mu = {1, 2};
  r.evaluated = {1, 2};
  r.t_c = {0, 2};
  write_selection_trace(path, {r});
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "iteration,elbo,best_elbo,mu,t_c");
  EXPECT_EQ(row, "500,-3.5,-3.5,1;2,1;2");
  std::filesystem::remove(path);
}

// One factor: each step moves toward the target with probability eps and
// is accepted exactly then, so 200 steps cover the line.
TEST(Step, PlantedOptimumSingleFactor) {
  const int converged = omnisynth::testing::planted_converged(20, 200, 1);
  ASSERT_GE(converged, 0) << "best-so-far decreased";
  EXPECT_GE(converged, 18) << converged << " of 20 runs converged";
}

// Four factors converge more slowly (a move of any factor already on the
// target is rejected), but the hill-climb still gets there.
TEST(Step, PlantedOptimumFourFactorsEventually) {
  const int converged = omnisynth::testing::planted_converged(20, 1000, 4);
  ASSERT_GE(converged, 0) << "best-so-far decreased";
  EXPECT_GE(converged, 18) << converged << " of 20 runs converged";
}
