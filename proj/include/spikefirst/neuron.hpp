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

// Leaky integrate-and-fire dynamics.
//
// Deterministic:  V[t] = lambda * V[t-1] + drive[t] - [V[t-1] >= v_th] * v_th
//                 o[t] = [V[t] >= v_th]
// The reset uses the previous step's comparison, so a neuron that crossed at
// t-1 loses exactly v_th at t and keeps the residual.
//
// Stochastic:     V[t] = (lambda * V[t-1] + drive[t]) / k
//                 p[t] = sigmoid(V[t]),  o[t] ~ Bernoulli(p[t])
// No reset term.

#ifndef SPIKEFIRST_NEURON_HPP_
#define SPIKEFIRST_NEURON_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spikefirst/errors.hpp"
#include "spikefirst/rng.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

struct DetLifParams {
  double v_th = 1.0;
  double lambda = 0.9;

  void validate() const {
    if (!(v_th > 0.0)) throw ParameterError("v_th must be > 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw ParameterError("lambda must lie in [0, 1]");
    }
  }
};

struct StochLifParams {
  double k = 1.0;
  double lambda = 0.7;

  void validate() const {
    if (!(k > 0.0)) throw ParameterError("k must be > 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw ParameterError("lambda must lie in [0, 1]");
    }
  }
};

struct LayerState {
  Tensor v;
  Tensor fired_prev;

  static LayerState zeros(const Shape& shape) { return {Tensor(shape), Tensor(shape)}; }
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace kernels {

// In-place deterministic step over flat arrays. `fired` holds [V[t-1] >= v_th]
// on entry and the new spikes on exit; `spikes` may alias `fired`.
inline void det_lif(std::span<double> v, std::span<double> fired,
                    std::span<const double> drive, std::span<double> spikes,
                    const DetLifParams& p) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double nv = p.lambda * v[i] + drive[i] - fired[i] * p.v_th;
    v[i] = nv;
    const double s = nv >= p.v_th ? 1.0 : 0.0;
    fired[i] = s;
    spikes[i] = s;
  }
}

// In-place stochastic step. Draws one uniform per element, in index order,
// from `stream`.
inline void stoch_lif(std::span<double> v, std::span<const double> drive,
                      std::span<double> probs, std::span<double> spikes,
                      const StochLifParams& p, RngStream& stream) {
  const double inv_k = 1.0 / p.k;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double nv = (p.lambda * v[i] + drive[i]) * inv_k;
    v[i] = nv;
    const double pr = sigmoid(nv);
    probs[i] = pr;
    spikes[i] = stream.uniform() < pr ? 1.0 : 0.0;
  }
}

}  // namespace kernels

struct DetStepResult {
  LayerState state;
  Tensor spikes;
};

inline DetStepResult det_lif_step(const LayerState& state, const DetLifParams& params,
                                  const Tensor& drive) {
  params.validate();
  if (state.v.shape() != drive.shape() || state.fired_prev.shape() != drive.shape()) {
    throw DimensionError("det_lif_step: state " + shape_str(state.v.shape()) +
                         " vs drive " + shape_str(drive.shape()));
  }
  DetStepResult r{state, Tensor(drive.shape())};
  kernels::det_lif(r.state.v.data(), r.state.fired_prev.data(), drive.data(),
                   r.spikes.data(), params);
  return r;
}

struct StochStepResult {
  LayerState state;
  Tensor spikes;
  Tensor probs;
};

inline StochStepResult stoch_lif_step(const LayerState& state,
                                      const StochLifParams& params,
                                      const Tensor& drive, RngStream& stream) {
  params.validate();
  if (state.v.shape() != drive.shape()) {
    throw DimensionError("stoch_lif_step: state " + shape_str(state.v.shape()) +
                         " vs drive " + shape_str(drive.shape()));
  }
  StochStepResult r{state, Tensor(drive.shape()), Tensor(drive.shape())};
  kernels::stoch_lif(r.state.v.data(), drive.data(), r.probs.data(),
                     r.spikes.data(), params, stream);
  // The stochastic model has no reset, but keep fired_prev meaningful.
  r.state.fired_prev = r.spikes;
  return r;
}

// Spike trains of one layer: spikes is [T x layer_size].
struct SpikeRecord {
  Tensor spikes;

  std::size_t horizon() const { return spikes.rank() ? spikes.dim(0) : 0; }
  std::size_t width() const { return spikes.rank() > 1 ? spikes.size() / spikes.dim(0) : 0; }
};

// First spike time per neuron, 1-indexed; silent neurons get horizon + 1.
inline Tensor first_spike_times(const SpikeRecord& record, std::size_t horizon) {
  if (record.spikes.rank() != 2 || record.horizon() != horizon) {
    throw DimensionError("first_spike_times: record " +
                         shape_str(record.spikes.shape()) +
                         " does not have " + std::to_string(horizon) + " rows");
  }
  const std::size_t n = record.width();
  Tensor times({n}, static_cast<double>(horizon + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < horizon; ++t) {
      if (record.spikes[t * n + i] != 0.0) {
        times[i] = static_cast<double>(t + 1);
        break;
      }
    }
  }
  return times;
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_NEURON_HPP_
