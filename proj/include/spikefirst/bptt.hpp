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

// Backpropagation through time over a recorded tape.
//
// Three stand-ins make the spiking graph differentiable:
//  * arctan surrogate for d(spike)/dV of a deterministic neuron, evaluated at
//    V - v_th (the forward pass keeps the hard threshold);
//  * sign estimator for d(first spike time)/d(spike): -1 at the first spike,
//    0 elsewhere, with silent neurons routed to the last step;
//  * straight-through estimator through the Bernoulli draw of a stochastic
//    neuron, composed with the ordinary sigmoid derivative.
//
// The soft-reset term of the deterministic neuron is treated as a constant in
// the backward pass.

#ifndef SPIKEFIRST_BPTT_HPP_
#define SPIKEFIRST_BPTT_HPP_

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "spikefirst/architecture.hpp"
#include "spikefirst/coding.hpp"
#include "spikefirst/errors.hpp"
#include "spikefirst/network.hpp"
#include "spikefirst/neuron.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

struct SurrogateConfig {
  double alpha = 2.0;

  void validate() const {
    if (!(alpha > 0.0)) throw ParameterError("surrogate alpha must be > 0");
  }
};

inline double arctan_surrogate(double v, double alpha) {
  const double x = std::numbers::pi * v * alpha / 2.0;
  return (1.0 / std::numbers::pi) / (1.0 + x * x);
}

// (1/pi) / (1 + (pi v alpha / 2)^2), elementwise.
inline Tensor arctan_surrogate_grad(const Tensor& v, double alpha) {
  SurrogateConfig{alpha}.validate();
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = arctan_surrogate(v[i], alpha);
  return out;
}

// Routes dL/dt_i onto the spike train: -dL/dt_i at the first spike of neuron
// i (at step T for a neuron that never fired), zero elsewhere. Output is
// [T x n].
inline Tensor sign_estimator_backward(const Tensor& first_times, const SpikeRecord& record,
                                      const Tensor& grad_times) {
  const std::size_t horizon = record.horizon();
  const std::size_t n = record.width();
  if (first_times.size() != n || grad_times.size() != n) {
    throw DimensionError("sign_estimator_backward: " + std::to_string(n) +
                         " neurons but " + std::to_string(first_times.size()) + " times");
  }
  Tensor grad({horizon, n});
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(first_times[i]);
    const std::size_t step = (t >= 1 && t <= horizon) ? t : horizon;
    grad[(step - 1) * n + i] = -grad_times[i];
  }
  return grad;
}

// Identity: the gradient w.r.t. the Bernoulli sample is passed to the firing
// probability unchanged.
inline Tensor straight_through_backward(const Tensor& grad_out) { return grad_out; }

// ---------------------------------------------------------------------------
// Batch losses

// Gradients entering the output layer, both [T x B x n]. `spikes` reaches
// the membrane through the surrogate (deterministic) or straight-through
// (stochastic); `probs` enters a stochastic output's probabilities directly.
struct OutputGrad {
  Tensor spikes;
  Tensor probs;
};

struct BatchLoss {
  double mean = 0.0;
  std::vector<double> per_sample;
  OutputGrad grad;
};

// Mean loss over the batch for the network's coding and neuron model:
// first-to-spike CE (deterministic), first-spike ML (stochastic) or rate CE.
inline BatchLoss output_loss(const NetworkSpec& spec, const Tape& tape,
                             const std::vector<std::size_t>& targets) {
  if (!tape.complete) throw StateError("output_loss: incomplete tape");
  const std::size_t horizon = tape.horizon, batch = tape.batch;
  if (targets.size() != batch) {
    throw DimensionError("output_loss: " + std::to_string(targets.size()) +
                         " targets for a batch of " + std::to_string(batch));
  }
  const std::size_t n = spec.num_outputs();
  const Tensor& out = tape.values.back();
  const TapeNode& node = tape.nodes.back();
  const double inv_b = 1.0 / static_cast<double>(batch);

  BatchLoss bl;
  bl.per_sample.resize(batch);
  bl.grad.spikes = Tensor({horizon, batch, n});
  const bool stochastic = node.neuron == NeuronKind::kStochLif;
  if (stochastic) bl.grad.probs = Tensor({horizon, batch, n});

  Tensor row({horizon, n});
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor& src = (spec.coding == Coding::kFirstToSpike && stochastic) ? node.probs : out;
    for (std::size_t t = 0; t < horizon; ++t) {
      std::copy_n(src.raw() + (t * batch + b) * n, n, row.raw() + t * n);
    }
    Tensor g;
    Tensor* dst = &bl.grad.spikes;
    if (spec.coding == Coding::kRate) {
      const LossValue lv = rate_ce_loss(SpikeRecord{row}, targets[b]);
      bl.per_sample[b] = lv.value;
      g = Tensor({horizon, n});
      for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t i = 0; i < n; ++i) g[t * n + i] = lv.grad[i];
      }
    } else if (stochastic) {
      const LossValue lv = ml_loss(row, targets[b]);
      bl.per_sample[b] = lv.value;
      g = lv.grad;
      dst = &bl.grad.probs;
    } else {
      const SpikeRecord rec{row};
      const Tensor times = first_spike_times(rec, horizon);
      const LossValue lv = fts_ce_loss(times, targets[b]);
      bl.per_sample[b] = lv.value;
      g = sign_estimator_backward(times, rec, lv.grad);
    }
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        (*dst)[(t * batch + b) * n + i] = g[t * n + i] * inv_b;
      }
    }
  }
  for (double v : bl.per_sample) bl.mean += v;
  bl.mean *= inv_b;
  return bl;
}

// ---------------------------------------------------------------------------
// backward

// Reverse sweep over the tape. Returns one gradient per layer (empty for
// pool layers), summed over timesteps and over the batch.
inline std::vector<Tensor> backward(const Network& net, const Tape& tape, const OutputGrad& grad) {
  const NetworkSpec& spec = net.spec;
  if (!tape.complete || tape.nodes.size() != spec.layers.size() ||
      tape.values.size() != spec.layers.size() + 1) {
    throw StateError("backward: tape does not hold a complete forward pass");
  }
  const std::size_t horizon = tape.horizon, batch = tape.batch;
  const std::size_t num_layers = spec.layers.size();
  if (grad.spikes.size() != horizon * batch * spec.num_outputs()) {
    throw DimensionError("backward: output gradient does not match the tape");
  }

  std::vector<Tensor> grads(num_layers);
  // dL/d(output of layer l) over the horizon, [T x B x width].
  Tensor g_out = grad.spikes;

  for (std::size_t l = num_layers; l-- > 0;) {
    const LayerSpec& ls = spec.layers[l];
    const TapeNode& node = tape.nodes[l];
    const std::size_t width = ls.out_size();
    const std::size_t in_w = ls.in_size();
    const bool static_in = l == 0 && tape.input_constant;
    const Tensor& in = tape.values[node.input_slot];
    const std::size_t step = batch * width;
    const std::size_t in_step = batch * in_w;

    if (ls.kind == LayerKind::kPool) {
      if (l == 0) break;  // nothing upstream to differentiate
      Tensor g_in({horizon, batch, in_w});
      const Shape in_shape = detail::batched(batch, ls.in_shape);
      for (std::size_t t = 0; t < horizon; ++t) {
        const Tensor go = detail::copy_block(g_out.raw() + t * step,
                                             detail::batched(batch, ls.out_shape));
        std::span<const std::size_t> am;
        if (ls.pool_mode == PoolMode::kMax) am = {node.argmax.data() + t * step, step};
        const Tensor gi = pool2d_backward(go, in_shape, ls.kernel, ls.pool_mode, am);
        std::copy_n(gi.raw(), gi.size(), g_in.raw() + t * in_step);
      }
      g_out = std::move(g_in);
      continue;
    }

    // dL/d(drive) for every step, walking time backwards.
    Tensor d_drive({horizon, batch, width});
    std::vector<double> carry(step, 0.0);
    if (ls.neuron == NeuronKind::kDetLif) {
      for (std::size_t t = horizon; t-- > 0;) {
        const double* go = g_out.raw() + t * step;
        const double* vt = node.v.raw() + t * step;
        double* dd = d_drive.raw() + t * step;
        for (std::size_t i = 0; i < step; ++i) {
          const double dv = go[i] * arctan_surrogate(vt[i] - ls.v_th, spec.alpha) + carry[i];
          dd[i] = dv;
          carry[i] = ls.lambda * dv;
        }
      }
    } else {
      const bool has_direct = l + 1 == num_layers && !grad.probs.empty();
      const double inv_k = 1.0 / ls.k;
      for (std::size_t t = horizon; t-- > 0;) {
        const double* go = g_out.raw() + t * step;
        const double* pt = node.probs.raw() + t * step;
        const double* gp = has_direct ? grad.probs.raw() + t * step : nullptr;
        double* dd = d_drive.raw() + t * step;
        for (std::size_t i = 0; i < step; ++i) {
          // straight-through: d(sample)/d(p) = 1
          const double dp = go[i] + (gp ? gp[i] : 0.0);
          const double dv = dp * pt[i] * (1.0 - pt[i]) + carry[i];
          dd[i] = dv * inv_k;
          carry[i] = dv * ls.lambda * inv_k;
        }
      }
    }

    const Tensor& w = net.weights.at(l);
    Tensor gw(w.shape());
    const bool need_input_grad = l > 0;
    Tensor g_in;
    if (need_input_grad) g_in = Tensor({horizon, batch, in_w});

    if (static_in) {
      // The input is the same at every step: sum the drive gradient first.
      std::vector<double> d_sum(step, 0.0);
      for (std::size_t t = 0; t < horizon; ++t) {
        const double* dd = d_drive.raw() + t * step;
        for (std::size_t i = 0; i < step; ++i) d_sum[i] += dd[i];
      }
      if (ls.kind == LayerKind::kLinear) {
        gemm(true, false, width, in_w, batch, d_sum.data(), in.raw(), gw.raw(), false);
      } else {
        const Tensor x = detail::copy_block(in.raw(), detail::batched(batch, ls.in_shape));
        const Tensor go = detail::copy_block(d_sum.data(), detail::batched(batch, ls.out_shape));
        gw = conv2d_backward(go, x, w, ls.stride, ls.pad, false).grad_kernel;
      }
    } else if (ls.kind == LayerKind::kLinear) {
      const std::size_t rows = horizon * batch;
      gemm(true, false, width, in_w, rows, d_drive.raw(), in.raw(), gw.raw(), false);
      if (need_input_grad) {
        gemm(false, false, rows, in_w, width, d_drive.raw(), w.raw(), g_in.raw(), false);
      }
    } else {
      for (std::size_t t = 0; t < horizon; ++t) {
        const Tensor x = detail::copy_block(in.raw() + t * in_step, detail::batched(batch, ls.in_shape));
        const Tensor go = detail::copy_block(d_drive.raw() + t * step, detail::batched(batch, ls.out_shape));
        ConvGrads cg = conv2d_backward(go, x, w, ls.stride, ls.pad, need_input_grad);
        gw += cg.grad_kernel;
        if (need_input_grad) std::copy_n(cg.grad_input.raw(), cg.grad_input.size(), g_in.raw() + t * in_step);
      }
    }
    grads[l] = std::move(gw);
    if (need_input_grad) g_out = std::move(g_in);
  }
  return grads;
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_BPTT_HPP_
