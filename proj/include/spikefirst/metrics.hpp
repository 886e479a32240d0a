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

// Accuracy, latency, spiking rates, energy cost and noise robustness.

#ifndef SPIKEFIRST_METRICS_HPP_
#define SPIKEFIRST_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "spikefirst/architecture.hpp"
#include "spikefirst/datasets.hpp"
#include "spikefirst/errors.hpp"
#include "spikefirst/network.hpp"
#include "spikefirst/rng.hpp"

namespace spikefirst {

struct MetricsReport {
  double accuracy = 0.0;
  double mean_latency = 0.0;
  double mean_steps = 0.0;
  // layer_rates[0] is the mean input activation; layer_rates[l + 1] the
  // spiking rate of layer l.
  std::vector<double> layer_rates;
  double energy_cost = 0.0;
  std::size_t n_samples = 0;
  std::size_t timesteps = 0;
  double silent_fraction = 0.0;  // samples with no output spike within T
};

struct EvalOptions {
  Coding coding = Coding::kFirstToSpike;
  bool early_exit = true;
  std::size_t batch_size = 1000;
  std::size_t workers = 1;
  std::uint64_t seed = 0;            // stochastic neurons
  double noise_variance = 0.0;       // additive Gaussian input noise
  std::uint64_t noise_seed = 0;
};

// Synaptic operations of one layer: C_I K_H K_W C_O O_H O_W for conv, I O for
// linear, 0 otherwise.
inline std::uint64_t layer_ops(const LayerSpec& ls) {
  switch (ls.kind) {
    case LayerKind::kLinear:
      return static_cast<std::uint64_t>(ls.in_size()) * ls.out_size();
    case LayerKind::kConv:
      return static_cast<std::uint64_t>(ls.in_shape.at(0)) * ls.kernel * ls.kernel *
             ls.out_shape.at(0) * ls.out_shape.at(1) * ls.out_shape.at(2);
    default:
      return 0;
  }
}

// E = sum_i S_{i-1} T OP_i / sum_j OP_j. `input_rates[i]` is the rate of the
// activity feeding the layer with `ops[i]` operations.
inline double energy_cost(const std::vector<double>& input_rates, double timesteps,
                          const std::vector<std::uint64_t>& ops) {
  if (input_rates.size() != ops.size()) {
    throw DimensionError("energy_cost: " + std::to_string(input_rates.size()) + " rates for " +
                         std::to_string(ops.size()) + " layers");
  }
  double total = 0.0;
  for (std::uint64_t op : ops) total += static_cast<double>(op);
  if (total == 0.0) throw ParameterError("energy_cost: total operation count is zero");
  double e = 0.0;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    e += input_rates[i] * timesteps * (static_cast<double>(ops[i]) / total);
  }
  return e;
}

// Rates of the activity feeding each weighted layer, with their op counts.
struct EnergyInputs {
  std::vector<double> rates;
  std::vector<std::uint64_t> ops;
};

inline EnergyInputs energy_inputs(const NetworkSpec& spec, const std::vector<double>& layer_rates) {
  EnergyInputs in;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    if (!spec.layers[l].has_weights()) continue;
    in.rates.push_back(layer_rates.at(l));
    in.ops.push_back(layer_ops(spec.layers[l]));
  }
  return in;
}

namespace detail {

inline void add_noise(Tensor& px, const std::vector<std::size_t>& ids, double variance,
                      std::uint64_t seed) {
  if (variance == 0.0) return;
  const double sd = std::sqrt(variance);
  const std::size_t f = px.size() / ids.size();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    RngStream rng{seed, stream_key(0x401E5Eull, ids[k]), 0};
    double* p = px.raw() + k * f;
    for (std::size_t j = 0; j < f; ++j) p[j] += sd * rng.normal();
  }
}

}  // namespace detail

// Runs `net` over `ds` and returns per-sample outcomes in dataset order.
inline std::vector<SampleOutcome> run_samples(const Network& net, const Dataset& ds,
                                              const EvalOptions& opts) {
  if (ds.size() == 0) throw ParameterError("evaluate: empty dataset");
  if (!(opts.noise_variance >= 0.0)) throw ParameterError("noise variance must be >= 0");
  const std::size_t n = ds.size();
  const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);
  const std::size_t num_batches = (n + bs - 1) / bs;
  std::vector<SampleOutcome> out(n);
  const InferenceOptions io{opts.early_exit, opts.coding};

  auto run_batch = [&](std::size_t bi) {
    const std::size_t lo = bi * bs, hi = std::min(n, lo + bs);
    std::vector<std::size_t> ids(hi - lo);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = lo + i;
    EncodedBatch batch = make_batch(ds, ids, net.spec.timesteps);
    detail::add_noise(batch.frames, ids, opts.noise_variance, opts.noise_seed);
    SampleStreams streams{opts.seed, {ids.begin(), ids.end()}};
    auto res = infer(net, batch, streams, io);
    for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = std::move(res[i]);
  };

  const std::size_t workers = std::min(std::max<std::size_t>(1, opts.workers), num_batches);
  if (workers == 1) {
    for (std::size_t bi = 0; bi < num_batches; ++bi) run_batch(bi);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t bi = w; bi < num_batches; bi += workers) run_batch(bi);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

// Reduces per-sample outcomes in dataset order.
inline MetricsReport summarize(const NetworkSpec& spec, const Dataset& ds,
                               const std::vector<SampleOutcome>& outcomes) {
  MetricsReport r;
  r.n_samples = outcomes.size();
  r.timesteps = spec.timesteps;
  const std::size_t num_layers = spec.layers.size();
  r.layer_rates.assign(num_layers + 1, 0.0);
  const double in_w = static_cast<double>(shape_numel(spec.input_shape));
  std::size_t correct = 0, silent = 0;
  double lat = 0.0, steps = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const SampleOutcome& o = outcomes[i];
    if (o.prediction == ds.labels[i]) ++correct;
    if (!o.fired) ++silent;
    lat += static_cast<double>(o.latency);
    steps += static_cast<double>(o.steps);
    const double st = static_cast<double>(o.steps);
    r.layer_rates[0] += o.input_activation / (in_w * st);
    for (std::size_t l = 0; l < num_layers; ++l) {
      r.layer_rates[l + 1] +=
          o.layer_activation[l] / (static_cast<double>(spec.layers[l].out_size()) * st);
    }
  }
  const double n = static_cast<double>(outcomes.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.mean_latency = lat / n;
  r.mean_steps = steps / n;
  r.silent_fraction = static_cast<double>(silent) / n;
  for (double& x : r.layer_rates) x /= n;
  const EnergyInputs ei = energy_inputs(spec, r.layer_rates);
  r.energy_cost = energy_cost(ei.rates, r.mean_latency, ei.ops);
  return r;
}

inline MetricsReport evaluate(const Network& net, const Dataset& ds, const EvalOptions& opts = {}) {
  return summarize(net.spec, ds, run_samples(net, ds, opts));
}

struct NoisePoint {
  double variance = 0.0;
  double accuracy = 0.0;
};

// Accuracy under additive N(0, variance) input noise. The same standard-normal
// draws (keyed by sample) are scaled for every variance.
inline std::vector<NoisePoint> noise_sweep(const Network& net, const Dataset& ds,
                                           const std::vector<double>& variances,
                                           EvalOptions opts = {}) {
  for (double v : variances) {
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("noise variance outside [0, 1]");
  }
  std::vector<NoisePoint> out;
  for (double v : variances) {
    opts.noise_variance = v;
    out.push_back({v, evaluate(net, ds, opts).accuracy});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  return out;
}

}  // namespace detail

inline void write_metrics_csv(const std::filesystem::path& path, const std::string& model,
                              const MetricsReport& r) {
  auto out = detail::open_csv(path);
  out << "model,accuracy,mean_latency,energy_cost,n_samples,timesteps,silent_fraction\n";
  out << model << ',' << detail::fmt_double(r.accuracy) << ',' << detail::fmt_double(r.mean_latency) << ','
      << detail::fmt_double(r.energy_cost) << ',' << r.n_samples << ',' << r.timesteps << ','
      << detail::fmt_double(r.silent_fraction) << '\n';
}

inline void write_rates_csv(const std::filesystem::path& path, const MetricsReport& r) {
  auto out = detail::open_csv(path);
  out << "layer_index,rate\n";
  for (std::size_t i = 0; i < r.layer_rates.size(); ++i) {
    out << i << ',' << detail::fmt_double(r.layer_rates[i]) << '\n';
  }
}

inline void write_noise_csv(const std::filesystem::path& path, const std::vector<NoisePoint>& pts) {
  auto out = detail::open_csv(path);
  out << "variance,accuracy\n";
  for (const auto& p : pts) out << detail::fmt_double(p.variance) << ',' << detail::fmt_double(p.accuracy) << '\n';
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_METRICS_HPP_
