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

// Output codes and their losses.
//
//  * first-to-spike, deterministic: softmax over negated first-spike times,
//    trained with the negative log-likelihood of the target;
//  * first-to-spike, stochastic: probability that the target is the first
//    (and only) neuron to fire at step t, summed over the horizon, trained by
//    minimizing -log of that sum;
//  * rate: softmax cross-entropy on outputs accumulated over the horizon.

#ifndef SPIKEFIRST_CODING_HPP_
#define SPIKEFIRST_CODING_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "spikefirst/errors.hpp"
#include "spikefirst/neuron.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;

// Loss value plus its gradient with respect to the loss inputs (first-spike
// times, probability table or accumulated outputs, depending on the loss).
struct LossValue {
  double value = 0.0;
  Tensor grad;
};

namespace detail {

inline void check_target(std::size_t target, std::size_t n) {
  if (target >= n) {
    throw IndexError("target class " + std::to_string(target) +
                     " out of range for " + std::to_string(n) + " outputs");
  }
}

// Softmax of `logits` with max shift.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

inline LossValue softmax_ce(std::span<const double> logits, std::size_t target,
                            double grad_sign) {
  check_target(target, logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);
  LossValue out;
  out.value = log_z - logits[target];
  out.grad = Tensor({logits.size()});
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = std::exp(logits[i] - log_z);
    out.grad[i] = grad_sign * (p - (i == target ? 1.0 : 0.0));
  }
  return out;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClampLo, kProbClampHi); }

}  // namespace detail

// p_i = exp(-t_i) / sum_k exp(-t_k)
inline Tensor fts_softmax(const Tensor& first_times) {
  std::vector<double> neg(first_times.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -first_times[i];
  return Tensor({neg.size()}, detail::softmax(neg));
}

// -log p_target; grad is dL/dt_i = y_i - p_i.
inline LossValue fts_ce_loss(const Tensor& first_times, std::size_t target) {
  std::vector<double> neg(first_times.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -first_times[i];
  return detail::softmax_ce(neg, target, -1.0);
}

namespace detail {

inline void check_prob_table(const Tensor& probs, std::size_t correct) {
  if (probs.rank() != 2) {
    throw DimensionError("probability table must be [T x n], got " +
                         shape_str(probs.shape()));
  }
  check_target(correct, probs.dim(1));
}

}  // namespace detail

// P_t = p_c^t * prod_{i != c} prod_{t' <= t} (1 - p_i^t') * prod_{t' < t} (1 - p_c^t')
// t is 1-indexed. No clamping.
inline double first_spike_event_prob(const Tensor& probs, std::size_t correct,
                                     std::size_t t) {
  detail::check_prob_table(probs, correct);
  const std::size_t horizon = probs.dim(0), n = probs.dim(1);
  if (t < 1 || t > horizon) {
    throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(horizon) + "]");
  }
  double prob = probs[(t - 1) * n + correct];
  for (std::size_t tp = 0; tp < t; ++tp) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i != correct) prob *= 1.0 - probs[tp * n + i];
    }
  }
  for (std::size_t tp = 0; tp + 1 < t; ++tp) prob *= 1.0 - probs[tp * n + correct];
  return prob;
}

// L = -log(sum_t P_t) on the clamped table. The gradient is the exact
// gradient w.r.t. the clamped entries, passed through the clamp unchanged so
// that saturated probabilities still receive a learning signal.
inline LossValue ml_loss(const Tensor& probs, std::size_t correct) {
  detail::check_prob_table(probs, correct);
  const std::size_t horizon = probs.dim(0), n = probs.dim(1);
  if (horizon == 0) throw ParameterError("ml_loss: empty horizon");

  std::vector<double> q(probs.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = detail::clamp_prob(probs[i]);

  // wrong[t]: prod over wrong neurons of (1 - q) at step t.
  // survive[t]: prod_{t' < t} (1 - q_c^t') * prod_{t' <= t} wrong[t'] ... built
  // incrementally as the prefix of the event "nothing fired before".
  std::vector<double> big_p(horizon);
  std::vector<double> wrong(horizon);
  double prefix = 1.0;  // prod_{t' < t} (1 - q_c^t') wrong[t']
  for (std::size_t t = 0; t < horizon; ++t) {
    double w = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != correct) w *= 1.0 - q[t * n + i];
    }
    wrong[t] = w;
    big_p[t] = q[t * n + correct] * prefix * w;
    prefix *= w * (1.0 - q[t * n + correct]);
  }
  double total = 0.0;
  for (double p : big_p) total += p;
  if (!(total > 0.0) || !std::isfinite(total) || !std::isnormal(total)) {
    throw NumericalError("ml_loss: sum of first-spike event probabilities "
                         "underflowed");
  }

  LossValue out;
  out.value = -std::log(total);
  out.grad = Tensor(probs.shape());

  // tail[t] = sum_{t' >= t} P_t'
  std::vector<double> tail(horizon + 1, 0.0);
  for (std::size_t t = horizon; t-- > 0;) tail[t] = tail[t + 1] + big_p[t];

  const double scale = -1.0 / total;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = t * n + i;
      double ds;
      if (i == correct) {
        // P_t depends on q_c^t linearly; every later P_t' carries (1 - q_c^t).
        const double qc = q[idx];
        ds = big_p[t] / qc - tail[t + 1] / (1.0 - qc);
      } else {
        ds = -tail[t] / (1.0 - q[idx]);
      }
      out.grad[idx] = scale * ds;
    }
  }
  return out;
}

// Softmax cross-entropy on accumulated outputs [n].
inline LossValue rate_ce_loss(const Tensor& accumulated, std::size_t target) {
  if (accumulated.rank() != 1) {
    throw DimensionError("rate_ce_loss expects a [n] accumulation, got " +
                         shape_str(accumulated.shape()));
  }
  return detail::softmax_ce(accumulated.data(), target, 1.0);
}

// Same loss on a [T x n] output record (summed over T). grad is w.r.t. the
// accumulation, which is also the gradient w.r.t. every row of the record.
inline LossValue rate_ce_loss(const SpikeRecord& record, std::size_t target) {
  if (record.spikes.rank() != 2 || record.horizon() < 1) {
    throw DimensionError("rate_ce_loss: record must be [T x n] with T >= 1");
  }
  const std::size_t n = record.width();
  Tensor acc({n});
  for (std::size_t t = 0; t < record.horizon(); ++t) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += record.spikes[t * n + i];
  }
  return rate_ce_loss(acc, target);
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_CODING_HPP_
