#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "omnisynth/core/error.hpp"
#include "omnisynth/core/rng.hpp"
#include "omnisynth/geometry/camera_grid.hpp"

namespace omnisynth::selection {

/// Uniform prior over candidate completion positions with their adjacency.
struct PositionPrior {
  std::vector<std::vector<std::size_t>> neighbors;

  std::size_t size() const { return neighbors.size(); }

  std::size_t max_degree() const {
    std::size_t L = 0;
    for (const auto& n : neighbors) L = std::max(L, n.size());
    return L;
  }

  void validate() const {
    OMNISYNTH_REQUIRE(!neighbors.empty(), "prior needs at least one candidate");
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      OMNISYNTH_REQUIRE(neighbors[i].size() <= 2, "a candidate has at most two neighbours");
      for (std::size_t j : neighbors[i]) {
        OMNISYNTH_REQUIRE(j < neighbors.size() && j != i, "neighbour index out of range");
        const auto& back = neighbors[j];
        OMNISYNTH_REQUIRE(std::find(back.begin(), back.end(), i) != back.end(), "adjacency must be symmetric");
      }
    }
  }

  static PositionPrior from_grid(const std::vector<geometry::GridPosition>& grid) {
    PositionPrior p;
    for (const auto& g : grid) p.neighbors.push_back(g.neighbors);
    p.validate();
    return p;
  }

  /// n candidates on a single line.
  static PositionPrior line(std::size_t n) {
    PositionPrior p;
    p.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) p.neighbors[i].push_back(i - 1);
      if (i + 1 < n) p.neighbors[i].push_back(i + 1);
    }
    p.validate();
    return p;
  }
};

/// q(t_c) = prod_i q_i, each factor keeping its base position with
/// probability 1 - eps L and moving to each of its L neighbours with eps.
struct FactorizedQ {
  std::vector<std::size_t> mu;
  double epsilon = 0.25;

  void validate(const PositionPrior& prior) const {
    OMNISYNTH_REQUIRE(!mu.empty(), "q needs at least one factor");
    for (std::size_t m : mu) OMNISYNTH_REQUIRE(m < prior.size(), "base position out of range");
    const std::size_t L = prior.max_degree();
    OMNISYNTH_REQUIRE(epsilon >= 0.0 && (L == 0 ? epsilon <= 1.0 : epsilon * static_cast<double>(L) <= 1.0),
                      "transition probability must lie in [0, 1/L_max]");
  }

  std::size_t factors() const { return mu.size(); }

  /// (position, probability) pairs with non-zero mass for factor i; base first.
  std::vector<std::pair<std::size_t, double>> support(std::size_t i, const PositionPrior& prior) const {
    const auto& nb = prior.neighbors[mu[i]];
    std::vector<std::pair<std::size_t, double>> s;
    const double stay = 1.0 - epsilon * static_cast<double>(nb.size());
    if (stay > 0.0) s.emplace_back(mu[i], stay);
    if (epsilon > 0.0)
      for (std::size_t j : nb) s.emplace_back(j, epsilon);
    return s;
  }
};

inline double xlogx_ratio(double q, double n) { return q > 0.0 ? q * std::log(q * n) : 0.0; }

/// KL[q || p] with p uniform over the N candidates, summed over factors.
inline double kl_q_p(const FactorizedQ& q, const PositionPrior& prior) {
  q.validate(prior);
  const double N = static_cast<double>(prior.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < q.factors(); ++i)
    for (const auto& [pos, prob] : q.support(i, prior)) kl += xlogx_ratio(prob, N);
  return kl;
}

inline constexpr double kScoreFloor = 1e-6;

inline double log_score(double d) {
  OMNISYNTH_REQUIRE(!std::isnan(d), "discriminator score is NaN");
  return std::log(std::clamp(d, kScoreFloor, 1.0));
}

/// Scores returned for one choice of t_c: discriminator outputs on the
/// evaluation-view renders and on the M completed images.
struct Scores {
  std::vector<double> eval;
  std::vector<double> comp;
};

/// Lower bound at the current sample: -KL + mean_t log d(eval) + sum_i log d(comp).
inline double elbo(const std::vector<double>& eval_scores, const std::vector<double>& comp_scores,
                   const FactorizedQ& q, const PositionPrior& prior) {
  OMNISYNTH_REQUIRE(!eval_scores.empty(), "need at least one evaluation score");
  double mean_eval = 0.0;
  for (double d : eval_scores) mean_eval += log_score(d);
  mean_eval /= static_cast<double>(eval_scores.size());
  double comp = 0.0;
  for (double d : comp_scores) comp += log_score(d);
  return -kl_q_p(q, prior) + mean_eval + comp;
}

using ScoreFn = std::function<Scores(const std::vector<std::size_t>& t_c)>;

/// Lower bound with the expectation over q enumerated exactly.
inline double elbo_exact(const FactorizedQ& q, const PositionPrior& prior, const ScoreFn& score) {
  q.validate(prior);
  std::vector<std::vector<std::pair<std::size_t, double>>> supports;
  for (std::size_t i = 0; i < q.factors(); ++i) supports.push_back(q.support(i, prior));
  std::vector<std::size_t> idx(q.factors(), 0), t_c(q.factors());
  double expectation = 0.0;
  for (;;) {
    double w = 1.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      t_c[i] = supports[i][idx[i]].first;
      w *= supports[i][idx[i]].second;
    }
    const Scores s = score(t_c);
    expectation += w * (elbo(s.eval, s.comp, q, prior) + kl_q_p(q, prior));
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == supports[k].size()) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return -kl_q_p(q, prior) + expectation;
}

/// Independent draw per factor.
inline std::vector<std::size_t> sample_positions(const FactorizedQ& q, const PositionPrior& prior, Rng& rng) {
  q.validate(prior);
  std::vector<std::size_t> t(q.factors());
  for (std::size_t i = 0; i < q.factors(); ++i) {
    const auto& nb = prior.neighbors[q.mu[i]];
    const double u = rng.uniform();
    const double moved = q.epsilon * static_cast<double>(nb.size());
    if (u >= moved) {
      t[i] = q.mu[i];
    } else {
      const std::size_t k = std::min(static_cast<std::size_t>(u / q.epsilon), nb.size() - 1);
      t[i] = nb[k];
    }
  }
  return t;
}

/// M base positions spread evenly over the candidate list.
inline std::vector<std::size_t> spread_positions(std::size_t candidates, std::size_t M) {
  OMNISYNTH_REQUIRE(M >= 1 && M <= candidates, "need 1 <= M <= candidate count");
  std::vector<std::size_t> mu(M);
  for (std::size_t i = 0; i < M; ++i) mu[i] = (2 * i + 1) * candidates / (2 * M);
  return mu;
}

}  // namespace omnisynth::selection
