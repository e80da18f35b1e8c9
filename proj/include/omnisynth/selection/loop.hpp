#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "omnisynth/selection/variational.hpp"

namespace omnisynth::selection {

/// Hill-climbing state of the simultaneous train-and-select loop.
struct SelectionState {
  FactorizedQ q;
  std::vector<std::size_t> t_c;
  double best = -std::numeric_limits<double>::infinity();
  std::uint64_t iteration = 0;
  std::uint64_t period = 500;  // K: NeRF iterations between updates
};

struct SelectionRecord {
  std::uint64_t iteration = 0;
  double elbo = 0.0;
  double best_elbo = 0.0;
  bool accepted = false;
  std::vector<std::size_t> mu;         // after the update
  std::vector<std::size_t> evaluated;  // t_c that was scored
  std::vector<std::size_t> t_c;        // freshly sampled t_c
};

enum class InitMode { Spread, Random };

/// Initial base positions, with t_c = mu.
inline SelectionState initialize_selection(const PositionPrior& prior, std::size_t M, double epsilon,
                                           std::uint64_t period, InitMode mode, Rng& rng) {
  prior.validate();
  OMNISYNTH_REQUIRE(period >= 1, "update period must be positive");
  SelectionState s;
  s.period = period;
  s.q.epsilon = epsilon;
  if (mode == InitMode::Spread) {
    s.q.mu = spread_positions(prior.size(), M);
  } else {
    OMNISYNTH_REQUIRE(M >= 1 && M <= prior.size(), "need 1 <= M <= candidate count");
    for (std::size_t i = 0; i < M; ++i) s.q.mu.push_back(rng.uniform_int(prior.size()));
  }
  s.q.validate(prior);
  s.t_c = s.q.mu;
  return s;
}

/// Scores the current t_c; accepts it as the new base when the bound beats
/// every earlier value, then resamples t_c from q.
inline SelectionRecord selection_step(SelectionState& state, const PositionPrior& prior, const ScoreFn& score,
                                      Rng& rng) {
  const Scores s = score(state.t_c);
  OMNISYNTH_REQUIRE(s.comp.size() == state.t_c.size(), "one completion score per selected position");
  SelectionRecord rec;
  state.iteration += state.period;
  rec.iteration = state.iteration;
  rec.elbo = elbo(s.eval, s.comp, state.q, prior);
  rec.evaluated = state.t_c;
  if (rec.elbo > state.best) {
    state.best = rec.elbo;
    state.q.mu = state.t_c;
    rec.accepted = true;
  }
  rec.best_elbo = state.best;
  rec.mu = state.q.mu;
  state.t_c = sample_positions(state.q, prior, rng);
  rec.t_c = state.t_c;
  return rec;
}

inline std::string join_indices(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + std::to_string(v[i]);
  return out;
}

inline void write_selection_trace(const std::filesystem::path& path, const std::vector<SelectionRecord>& trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "iteration,elbo,best_elbo,mu,t_c\n";
  os.precision(12);
  for (const auto& r : trace)
    os << r.iteration << ',' << r.elbo << ',' << r.best_elbo << ',' << join_indices(r.mu) << ','
       << join_indices(r.evaluated) << '\n';
}

}  // namespace omnisynth::selection
