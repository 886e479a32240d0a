// Copyright 2026 The spikefirst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differential evolution (DE/rand/1/bin) over per-layer thresholds or scales.

#ifndef SPIKEFIRST_TUNER_HPP_
#define SPIKEFIRST_TUNER_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spikefirst/architecture.hpp"
#include "spikefirst/datasets.hpp"
#include "spikefirst/errors.hpp"
#include "spikefirst/metrics.hpp"
#include "spikefirst/network.hpp"
#include "spikefirst/rng.hpp"

namespace spikefirst {

struct Bounds {
  double low = 0.0;
  double high = 0.0;
};

struct DeConfig {
  std::size_t pop_size = 0;  // 0: 15 per dimension, capped at 60
  std::size_t max_generations = 30;
  double mutation_factor = 0.5;
  double crossover_rate = 0.7;
  std::vector<Bounds> bounds;
  double latency_weight = 0.1;
  std::uint64_t seed = 0;

  std::size_t resolved_pop() const {
    if (pop_size) return pop_size;
    return std::max<std::size_t>(4, std::min<std::size_t>(60, 15 * bounds.size()));
  }

  void validate() const {
    if (bounds.empty()) throw ParameterError("DE needs at least one dimension");
    for (const auto& b : bounds) {
      if (!(b.low <= b.high)) throw ParameterError("DE bounds must satisfy low <= high");
    }
    if (resolved_pop() < 4) throw ParameterError("DE population must be >= 4");
    if (!(mutation_factor >= 0.0 && mutation_factor < 2.0)) {
      throw ParameterError("DE mutation factor must lie in [0, 2)");
    }
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
      throw ParameterError("DE crossover rate must lie in [0, 1]");
    }
    if (!(latency_weight >= 0.0)) throw ParameterError("latency weight must be >= 0");
  }
};

struct GenerationRecord {
  std::size_t generation = 0;
  double best_objective = 0.0;
  std::vector<double> best_vector;
};

struct DeResult {
  std::vector<double> best_vector;
  double best_objective = 0.0;
  std::vector<GenerationRecord> history;
  std::size_t evaluations = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;

// Minimizes `objective` within cfg.bounds. The vectors in `seeds` replace the
// first members of the random initial population.
inline DeResult de_optimize(const Objective& objective, const DeConfig& cfg,
                            const std::vector<std::vector<double>>& seeds = {}) {
  cfg.validate();
  const std::size_t dims = cfg.bounds.size();
  auto clip = [&](std::vector<double>& x) {
    for (std::size_t j = 0; j < dims; ++j) x[j] = std::clamp(x[j], cfg.bounds[j].low, cfg.bounds[j].high);
  };

  DeResult res;
  const bool degenerate = std::all_of(cfg.bounds.begin(), cfg.bounds.end(),
                                      [](const Bounds& b) { return b.low == b.high; });
  if (degenerate) {
    std::vector<double> x(dims);
    for (std::size_t j = 0; j < dims; ++j) x[j] = cfg.bounds[j].low;
    res.best_vector = x;
    res.best_objective = objective(x);
    res.evaluations = 1;
    res.history.push_back({0, res.best_objective, x});
    return res;
  }

  const std::size_t np = cfg.resolved_pop();
  RngStream rng{cfg.seed, stream_key(0xDEull), 0};
  std::vector<std::vector<double>> pop(np, std::vector<double>(dims));
  for (auto& x : pop) {
    for (std::size_t j = 0; j < dims; ++j) {
      x[j] = cfg.bounds[j].low + rng.uniform() * (cfg.bounds[j].high - cfg.bounds[j].low);
    }
  }
  if (seeds.size() > np) throw DimensionError("DE: more seed vectors than population members");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i].size() != dims) throw DimensionError("DE seed vector has the wrong length");
    pop[i] = seeds[i];
    clip(pop[i]);
  }
  std::vector<double> fit(np);
  for (std::size_t i = 0; i < np; ++i) fit[i] = objective(pop[i]);
  res.evaluations = np;

  auto record = [&](std::size_t gen) {
    const std::size_t b = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
    res.history.push_back({gen, fit[b], pop[b]});
  };
  record(0);

  std::vector<std::vector<double>> trials(np, std::vector<double>(dims));
  for (std::size_t gen = 1; gen <= cfg.max_generations; ++gen) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do a = rng.below(np); while (a == i);
      do b = rng.below(np); while (b == i || b == a);
      do c = rng.below(np); while (c == i || c == a || c == b);
      const std::size_t jrand = rng.below(dims);
      for (std::size_t j = 0; j < dims; ++j) {
        const bool take = rng.uniform() < cfg.crossover_rate || j == jrand;
        trials[i][j] = take ? pop[a][j] + cfg.mutation_factor * (pop[b][j] - pop[c][j]) : pop[i][j];
      }
      clip(trials[i]);
    }
    // Synchronous generation: score every trial, then select.
    std::vector<double> tfit(np);
    for (std::size_t i = 0; i < np; ++i) tfit[i] = objective(trials[i]);
    res.evaluations += np;
    for (std::size_t i = 0; i < np; ++i) {
      if (tfit[i] <= fit[i]) {
        pop[i] = trials[i];
        fit[i] = tfit[i];
      }
    }
    record(gen);
  }
  res.best_vector = res.history.back().best_vector;
  res.best_objective = res.history.back().best_objective;
  return res;
}

// (1 - accuracy) + beta * latency / T
inline double tradeoff_value(double accuracy, double mean_latency, std::size_t timesteps, double beta) {
  return (1.0 - accuracy) + beta * mean_latency / static_cast<double>(timesteps);
}

// Objective of `candidate` (one v_th or k per spiking layer) on `subset`.
inline double tradeoff_objective(const Network& net, const std::vector<double>& candidate,
                                 const Dataset& subset, double beta, EvalOptions opts) {
  Network trial = net;
  trial.spec.set_neuron_scales(candidate);
  opts.coding = trial.spec.coding;
  const MetricsReport r = evaluate(trial, subset, opts);
  return tradeoff_value(r.accuracy, r.mean_latency, trial.spec.timesteps, beta);
}

struct TuneResult {
  DeResult de;
  Network tuned;
};

// Tunes the per-layer values of `net` on `subset`; the returned network
// carries the best vector found.
inline TuneResult tune_network(const Network& net, const Dataset& subset, DeConfig cfg,
                               const EvalOptions& eval, bool seed_incumbent = true) {
  const std::size_t dims = net.spec.spiking_layers().size();
  if (cfg.bounds.size() == 1 && dims > 1) cfg.bounds.assign(dims, cfg.bounds.front());
  if (cfg.bounds.size() != dims) {
    throw DimensionError("tune: " + std::to_string(cfg.bounds.size()) + " bounds for " +
                         std::to_string(dims) + " spiking layers");
  }
  for (const auto& b : cfg.bounds) {
    if (!(b.low > 0.0)) throw ParameterError("tune: thresholds and scales must stay > 0");
  }
  const Objective obj = [&](const std::vector<double>& x) {
    return tradeoff_objective(net, x, subset, cfg.latency_weight, eval);
  };
  std::vector<std::vector<double>> init;
  if (seed_incumbent) init.push_back(net.spec.neuron_scales());
  TuneResult tr{de_optimize(obj, cfg, init), net};
  tr.tuned.spec.set_neuron_scales(tr.de.best_vector);
  return tr;
}

inline void write_de_history_csv(const std::filesystem::path& path, const DeResult& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << "generation,best_objective";
  const std::size_t dims = r.history.empty() ? 0 : r.history.front().best_vector.size();
  for (std::size_t j = 0; j < dims; ++j) out << ",x" << j;
  out << '\n';
  for (const auto& g : r.history) {
    out << g.generation << ',' << detail::fmt_double(g.best_objective);
    for (double x : g.best_vector) out << ',' << detail::fmt_double(x);
    out << '\n';
  }
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_TUNER_HPP_
