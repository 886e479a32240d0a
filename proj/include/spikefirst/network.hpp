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

// Runnable networks: parameters bound to a NetworkSpec, the full-horizon
// forward pass that records a tape for BPTT, and the time-major inference
// pass that stops each sample at its first output spike.

#ifndef SPIKEFIRST_NETWORK_HPP_
#define SPIKEFIRST_NETWORK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spikefirst/architecture.hpp"
#include "spikefirst/errors.hpp"
#include "spikefirst/neuron.hpp"
#include "spikefirst/rng.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

struct Network {
  NetworkSpec spec;
  std::vector<Tensor> weights;  // one per layer; empty for pool layers

  friend bool operator==(const Network&, const Network&) = default;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) scaled by `gain`. No biases.
inline Network init_network(const NetworkSpec& spec, std::uint64_t seed, double gain = 1.0) {
  spec.validate();
  Network net{spec, {}};
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    if (!ls.has_weights()) {
      net.weights.emplace_back();
      continue;
    }
    const Shape ws = ls.weight_shape();
    const std::size_t fan_in = shape_numel(ws) / ws[0];
    const double bound = gain / std::sqrt(static_cast<double>(fan_in));
    RngStream rng{seed, stream_key(0x1A17ull, l), 0};
    Tensor w(ws);
    for (double& x : w.data()) x = bound * (2.0 * rng.uniform() - 1.0);
    net.weights.push_back(std::move(w));
  }
  return net;
}

// Inputs for a batch: either one frame per sample reused at every timestep
// (direct encoding) or a distinct frame per timestep.
struct EncodedBatch {
  Tensor frames;  // [B x F] if constant, [T x B x F] otherwise
  std::size_t batch = 0;
  std::size_t timesteps = 0;
  bool constant = true;

  std::size_t features() const { return batch ? frames.size() / (batch * (constant ? 1 : timesteps)) : 0; }

  const double* frame(std::size_t t) const {
    return constant ? frames.raw() : frames.raw() + t * batch * features();
  }

  static EncodedBatch direct(Tensor pixels, std::size_t timesteps) {
    if (pixels.rank() < 1) throw DimensionError("encoded batch needs a batch dimension");
    EncodedBatch e;
    e.batch = pixels.dim(0);
    e.timesteps = timesteps;
    e.constant = true;
    e.frames = pixels.reshaped({e.batch, e.batch ? pixels.size() / e.batch : 0});
    return e;
  }
};

// Per-sample random streams for stochastic layers. The draw for (sample,
// layer, step, neuron) always comes from the same counter, whatever the batch
// composition or the order of evaluation.
struct SampleStreams {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> keys;

  RngStream at(std::size_t sample, std::size_t layer, std::size_t t, std::size_t width) const {
    return RngStream{seed, stream_key(keys.at(sample), layer),
                     static_cast<std::uint64_t>(t) * width};
  }

  static SampleStreams sequential(std::uint64_t seed, std::size_t batch, std::uint64_t base = 0) {
    SampleStreams s{seed, {}};
    s.keys.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) s.keys[i] = base + i;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Tape

// One recorded layer over the whole horizon.
struct TapeNode {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::kLinear;
  NeuronKind neuron = NeuronKind::kNone;
  std::size_t input_slot = 0;
  std::size_t output_slot = 0;
  Tensor v;      // [T x B x out] membrane potentials (spiking layers)
  Tensor probs;  // [T x B x out] firing probabilities (stochastic layers)
  std::vector<std::size_t> argmax;  // max pool: per step, indices into that step's input
};

struct Tape {
  std::size_t horizon = 0;
  std::size_t batch = 0;
  bool input_constant = true;
  // values[0] is the input; values[l + 1] the [T x B x out] output of layer l.
  std::vector<Tensor> values;
  std::vector<TapeNode> nodes;
  bool complete = false;
};

struct ForwardResult {
  Tape tape;

  // Spike train of `layer` for one sample, [T x layer_size].
  SpikeRecord record(std::size_t layer, std::size_t sample) const {
    const Tensor& out = tape.values.at(layer + 1);
    const std::size_t width = out.size() / (tape.horizon * tape.batch);
    Tensor r({tape.horizon, width});
    for (std::size_t t = 0; t < tape.horizon; ++t) {
      std::copy_n(out.raw() + (t * tape.batch + sample) * width, width, r.raw() + t * width);
    }
    return {std::move(r)};
  }
};

namespace detail {

inline Tensor copy_block(const double* src, Shape shape) {
  Tensor t(std::move(shape));
  std::copy_n(src, t.size(), t.raw());
  return t;
}

inline Shape batched(std::size_t batch, const Shape& per_sample) {
  Shape s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

// drive[rows x out] = op(input[rows x in]) for a weighted layer.
inline void layer_drive(const LayerSpec& ls, const Tensor& w, const double* input,
                        std::size_t rows, double* drive) {
  if (ls.kind == LayerKind::kLinear) {
    gemm(false, true, rows, ls.out_size(), ls.in_size(), input, w.raw(), drive, false);
    return;
  }
  const Tensor in = copy_block(input, batched(rows, ls.in_shape));
  const Tensor out = conv2d(in, w, ls.stride, ls.pad);
  std::copy_n(out.raw(), out.size(), drive);
}

inline void layer_pool(const LayerSpec& ls, const double* input, std::size_t rows,
                       double* output, std::size_t* argmax) {
  const Tensor in = copy_block(input, batched(rows, ls.in_shape));
  PoolResult r = pool2d(in, ls.kernel, ls.pool_mode);
  std::copy_n(r.output.raw(), r.output.size(), output);
  if (argmax) std::copy(r.argmax.begin(), r.argmax.end(), argmax);
}

inline void check_input(const NetworkSpec& spec, const EncodedBatch& input) {
  if (input.batch == 0) throw DimensionError("empty batch");
  if (input.features() != shape_numel(spec.input_shape)) {
    throw DimensionError("input has " + std::to_string(input.features()) +
                         " features, network expects " + shape_str(spec.input_shape));
  }
  if (!input.constant && input.timesteps != spec.timesteps) {
    throw DimensionError("input has " + std::to_string(input.timesteps) +
                         " timesteps, network horizon is " + std::to_string(spec.timesteps));
  }
}

}  // namespace detail

// Full-horizon forward pass, layer by layer over all T steps, recording the
// tape needed by backward().
inline ForwardResult forward(const Network& net, const EncodedBatch& input,
                             const SampleStreams& streams) {
  const NetworkSpec& spec = net.spec;
  detail::check_input(spec, input);
  const std::size_t horizon = spec.timesteps;
  const std::size_t batch = input.batch;
  const bool stochastic = std::any_of(spec.layers.begin(), spec.layers.end(), [](const LayerSpec& ls) {
    return ls.neuron == NeuronKind::kStochLif;
  });
  if (stochastic && streams.keys.size() < batch) {
    throw DimensionError("forward: one stream key per sample is required");
  }

  ForwardResult res;
  Tape& tape = res.tape;
  tape.horizon = horizon;
  tape.batch = batch;
  tape.input_constant = input.constant;
  tape.values.reserve(spec.layers.size() + 1);
  tape.values.push_back(input.frames);

  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const std::size_t width = ls.out_size();
    const std::size_t in_w = ls.in_size();
    const bool static_in = l == 0 && input.constant;
    const Tensor& in = tape.values[l];
    Tensor out({horizon, batch, width});

    TapeNode node;
    node.layer = l;
    node.kind = ls.kind;
    node.neuron = ls.neuron;
    node.input_slot = l;
    node.output_slot = l + 1;

    auto in_step = [&](std::size_t t) {
      return static_in ? in.raw() : in.raw() + t * batch * in_w;
    };

    if (ls.kind == LayerKind::kPool) {
      if (ls.pool_mode == PoolMode::kMax) node.argmax.resize(horizon * batch * width);
      if (static_in) {
        detail::layer_pool(ls, in_step(0), batch, out.raw(),
                           node.argmax.empty() ? nullptr : node.argmax.data());
        for (std::size_t t = 1; t < horizon; ++t) {
          std::copy_n(out.raw(), batch * width, out.raw() + t * batch * width);
          if (!node.argmax.empty()) {
            std::copy_n(node.argmax.data(), batch * width, node.argmax.data() + t * batch * width);
          }
        }
      } else {
        for (std::size_t t = 0; t < horizon; ++t) {
          detail::layer_pool(ls, in_step(t), batch, out.raw() + t * batch * width,
                             node.argmax.empty() ? nullptr : node.argmax.data() + t * batch * width);
        }
      }
      tape.values.push_back(std::move(out));
      tape.nodes.push_back(std::move(node));
      continue;
    }

    // Synaptic drive for every step.
    const Tensor& w = net.weights.at(l);
    std::vector<double> drive(static_in ? batch * width : horizon * batch * width);
    if (static_in) {
      detail::layer_drive(ls, w, in_step(0), batch, drive.data());
    } else if (ls.kind == LayerKind::kLinear) {
      detail::layer_drive(ls, w, in.raw(), horizon * batch, drive.data());
    } else {
      for (std::size_t t = 0; t < horizon; ++t) {
        detail::layer_drive(ls, w, in_step(t), batch, drive.data() + t * batch * width);
      }
    }
    auto drive_step = [&](std::size_t t) {
      return static_in ? drive.data() : drive.data() + t * batch * width;
    };

    node.v = Tensor({horizon, batch, width});
    std::vector<double> v(batch * width, 0.0);
    if (ls.neuron == NeuronKind::kDetLif) {
      const DetLifParams p{ls.v_th, ls.lambda};
      std::vector<double> fired(batch * width, 0.0);
      for (std::size_t t = 0; t < horizon; ++t) {
        kernels::det_lif(v, fired, {drive_step(t), batch * width},
                         {out.raw() + t * batch * width, batch * width}, p);
        std::copy(v.begin(), v.end(), node.v.raw() + t * batch * width);
      }
    } else {
      const StochLifParams p{ls.k, ls.lambda};
      node.probs = Tensor({horizon, batch, width});
      for (std::size_t t = 0; t < horizon; ++t) {
        const std::size_t off = t * batch * width;
        for (std::size_t b = 0; b < batch; ++b) {
          RngStream rng = streams.at(b, l, t, width);
          kernels::stoch_lif({v.data() + b * width, width},
                             {drive_step(t) + b * width, width},
                             {node.probs.raw() + off + b * width, width},
                             {out.raw() + off + b * width, width}, p, rng);
        }
        std::copy(v.begin(), v.end(), node.v.raw() + off);
      }
    }
    tape.values.push_back(std::move(out));
    tape.nodes.push_back(std::move(node));
  }
  tape.complete = true;
  return res;
}

// ---------------------------------------------------------------------------
// Inference

struct InferenceOptions {
  bool early_exit = true;  // first-to-spike: stop a sample at its first output spike
  Coding coding = Coding::kFirstToSpike;
};

struct SampleOutcome {
  std::size_t prediction = 0;
  std::size_t latency = 0;   // first output spike step, or T on timeout / rate coding
  std::size_t steps = 0;     // timesteps actually simulated
  bool fired = false;        // an output neuron spiked within the horizon
  double input_activation = 0.0;            // summed input over features and steps
  std::vector<double> layer_activation;     // per layer: summed output over neurons and steps
};

namespace detail {

// Keeps rows whose flag is set, in order, in a row-major [rows x width] buffer.
inline void compact_rows(std::vector<double>& buf, std::size_t width,
                         const std::vector<char>& keep) {
  std::size_t dst = 0;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (!keep[r]) continue;
    if (dst != r) std::copy_n(buf.data() + r * width, width, buf.data() + dst * width);
    ++dst;
  }
  buf.resize(dst * width);
}

// Highest key wins, lowest index breaks ties.
inline std::size_t argmax_row(const double* key, std::size_t n, const double* mask = nullptr) {
  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask && mask[i] == 0.0) continue;
    if (best == n || key[i] > key[best]) best = i;
  }
  return best == n ? 0 : best;
}

}  // namespace detail

// Time-major simulation. In first-to-spike coding the prediction is the first
// output neuron to spike (ties: higher membrane potential for deterministic
// outputs, higher firing probability for stochastic ones, then lower index);
// with no output spike by T the prediction is the argmax of the membrane
// potential accumulated over the horizon. In rate coding the prediction is
// the argmax of the accumulated output spikes (ties by accumulated potential).
inline std::vector<SampleOutcome> infer(const Network& net, const EncodedBatch& input,
                                        const SampleStreams& streams,
                                        const InferenceOptions& opts = {}) {
  const NetworkSpec& spec = net.spec;
  detail::check_input(spec, input);
  const std::size_t horizon = spec.timesteps;
  const std::size_t batch = input.batch;
  const std::size_t num_layers = spec.layers.size();
  const std::size_t n_out = spec.num_outputs();
  const bool fts = opts.coding == Coding::kFirstToSpike;
  const LayerSpec& out_layer = spec.layers.back();

  std::vector<SampleOutcome> outcomes(batch);
  for (auto& o : outcomes) o.layer_activation.assign(num_layers, 0.0);

  std::vector<std::size_t> ids(batch);
  for (std::size_t b = 0; b < batch; ++b) ids[b] = b;

  // Compacted per-row state.
  std::vector<std::vector<double>> v(num_layers), fired(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (spec.layers[l].spiking()) {
      v[l].assign(batch * spec.layers[l].out_size(), 0.0);
      fired[l].assign(batch * spec.layers[l].out_size(), 0.0);
    }
  }
  const std::size_t in_w = shape_numel(spec.input_shape);
  std::vector<double> x_static;
  std::vector<double> drive0;
  const bool static0 = input.constant && spec.layers[0].has_weights();
  if (input.constant) {
    x_static.assign(input.frames.raw(), input.frames.raw() + batch * in_w);
    if (static0) {
      drive0.resize(batch * spec.layers[0].out_size());
      detail::layer_drive(spec.layers[0], net.weights[0], x_static.data(), batch, drive0.data());
    }
  }
  std::vector<double> acc_v(batch * n_out, 0.0), acc_s(batch * n_out, 0.0);
  std::vector<double> x_step, act_prev, act, drive, probs;
  std::vector<char> first_mask;

  for (std::size_t t = 0; t < horizon && !ids.empty(); ++t) {
    const std::size_t rows = ids.size();
    const double* cur;
    if (input.constant) {
      cur = x_static.data();
    } else {
      x_step.resize(rows * in_w);
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(input.frame(t) + ids[r] * in_w, in_w, x_step.data() + r * in_w);
      }
      cur = x_step.data();
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < in_w; ++j) s += cur[r * in_w + j];
      outcomes[ids[r]].input_activation += s;
    }

    act_prev.assign(cur, cur + rows * in_w);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const LayerSpec& ls = spec.layers[l];
      const std::size_t width = ls.out_size();
      act.assign(rows * width, 0.0);
      if (ls.kind == LayerKind::kPool) {
        detail::layer_pool(ls, act_prev.data(), rows, act.data(), nullptr);
      } else {
        const double* d;
        if (l == 0 && static0) {
          d = drive0.data();
        } else {
          drive.resize(rows * width);
          detail::layer_drive(ls, net.weights[l], act_prev.data(), rows, drive.data());
          d = drive.data();
        }
        if (ls.neuron == NeuronKind::kDetLif) {
          kernels::det_lif(v[l], fired[l], {d, rows * width}, act, {ls.v_th, ls.lambda});
        } else {
          probs.resize(rows * width);
          const StochLifParams p{ls.k, ls.lambda};
          for (std::size_t r = 0; r < rows; ++r) {
            RngStream rng = streams.at(ids[r], l, t, width);
            kernels::stoch_lif({v[l].data() + r * width, width}, {d + r * width, width},
                               {probs.data() + r * width, width},
                               {act.data() + r * width, width}, p, rng);
          }
        }
      }
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < width; ++j) s += act[r * width + j];
        outcomes[ids[r]].layer_activation[l] += s;
      }
      std::swap(act_prev, act);
    }
    // act_prev now holds the output spikes [rows x n_out].
    const std::vector<double>& v_out = v[num_layers - 1];
    std::vector<char> keep(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
      SampleOutcome& o = outcomes[ids[r]];
      o.steps = t + 1;
      const double* s_row = act_prev.data() + r * n_out;
      const double* v_row = v_out.data() + r * n_out;
      for (std::size_t i = 0; i < n_out; ++i) {
        acc_v[r * n_out + i] += v_row[i];
        acc_s[r * n_out + i] += s_row[i];
      }
      const bool any = std::any_of(s_row, s_row + n_out, [](double s) { return s != 0.0; });
      if (any && !o.fired) {
        o.fired = true;
        if (fts) {
          o.latency = t + 1;
          const double* key = out_layer.neuron == NeuronKind::kStochLif ? probs.data() + r * n_out : v_row;
          o.prediction = detail::argmax_row(key, n_out, s_row);
          if (opts.early_exit) keep[r] = 0;
        }
      }
      if (t + 1 == horizon) {
        if (!fts) {
          // Rate code: spike counts, ties by accumulated potential.
          std::size_t best = 0;
          for (std::size_t i = 1; i < n_out; ++i) {
            const double si = acc_s[r * n_out + i], sb = acc_s[r * n_out + best];
            if (si > sb || (si == sb && acc_v[r * n_out + i] > acc_v[r * n_out + best])) best = i;
          }
          o.prediction = best;
          o.latency = horizon;
        } else if (!o.fired) {
          o.prediction = detail::argmax_row(acc_v.data() + r * n_out, n_out);
          o.latency = horizon;
        }
      }
    }
    if (std::all_of(keep.begin(), keep.end(), [](char k) { return k != 0; })) continue;
    std::vector<std::size_t> next_ids;
    for (std::size_t r = 0; r < rows; ++r) {
      if (keep[r]) next_ids.push_back(ids[r]);
    }
    ids = std::move(next_ids);
    for (std::size_t l = 0; l < num_layers; ++l) {
      if (!spec.layers[l].spiking()) continue;
      detail::compact_rows(v[l], spec.layers[l].out_size(), keep);
      detail::compact_rows(fired[l], spec.layers[l].out_size(), keep);
    }
    if (input.constant) detail::compact_rows(x_static, in_w, keep);
    if (static0) detail::compact_rows(drive0, spec.layers[0].out_size(), keep);
    detail::compact_rows(acc_v, n_out, keep);
    detail::compact_rows(acc_s, n_out, keep);
  }
  return outcomes;
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_NETWORK_HPP_
