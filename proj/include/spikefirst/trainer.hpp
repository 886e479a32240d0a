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

// Training loop, Adam, learning-rate schedule and checkpoints.

#ifndef SPIKEFIRST_TRAINER_HPP_
#define SPIKEFIRST_TRAINER_HPP_

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <zlib.h>

#include "spikefirst/architecture.hpp"
#include "spikefirst/bptt.hpp"
#include "spikefirst/datasets.hpp"
#include "spikefirst/errors.hpp"
#include "spikefirst/metrics.hpp"
#include "spikefirst/network.hpp"
#include "spikefirst/rng.hpp"

namespace spikefirst {

struct TrainConfig {
  ModelKind model = ModelKind::kDFBptt;
  std::string arch = "mlp2";
  std::string dataset = "mnist";
  std::size_t epochs = 150;
  std::size_t batch_size = 512;
  std::size_t micro_batch = 0;  // 0: whole batch in one pass
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t scheduler_step = 50;
  double scheduler_gamma = 0.5;
  double lambda = 0.9;
  std::size_t timesteps = 20;
  std::size_t hidden = 800;
  double alpha = 2.0;
  double init_gain = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t eval_seed = 12345;
  std::size_t train_limit = 0;  // 0: full split
  std::size_t test_limit = 0;
  bool augment = false;

  void validate() const {
    if (batch_size == 0) throw ParameterError("batch_size must be > 0");
    if (!(lr > 0.0)) throw ParameterError("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be >= 0");
    if (scheduler_step == 0) throw ParameterError("scheduler_step must be > 0");
    if (!(scheduler_gamma > 0.0 && scheduler_gamma <= 1.0)) {
      throw ParameterError("scheduler_gamma must lie in (0, 1]");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
    if (timesteps == 0) throw ParameterError("timesteps must be > 0");
    if (hidden == 0) throw ParameterError("hidden must be > 0");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be > 0");
    if (!(init_gain > 0.0)) throw ParameterError("init_gain must be > 0");
    if (dataset != "mnist" && dataset != "cifar10") throw ParameterError("unknown dataset " + dataset);
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline std::string to_text(const TrainConfig& c) {
  using detail::fmt_double;
  std::ostringstream os;
  os << "model = " << to_string(c.model) << '\n'
     << "arch = " << c.arch << '\n'
     << "dataset = " << c.dataset << '\n'
     << "epochs = " << c.epochs << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "micro_batch = " << c.micro_batch << '\n'
     << "lr = " << fmt_double(c.lr) << '\n'
     << "weight_decay = " << fmt_double(c.weight_decay) << '\n'
     << "scheduler_step = " << c.scheduler_step << '\n'
     << "scheduler_gamma = " << fmt_double(c.scheduler_gamma) << '\n'
     << "lambda = " << fmt_double(c.lambda) << '\n'
     << "timesteps = " << c.timesteps << '\n'
     << "hidden = " << c.hidden << '\n'
     << "alpha = " << fmt_double(c.alpha) << '\n'
     << "init_gain = " << fmt_double(c.init_gain) << '\n'
     << "seed = " << c.seed << '\n'
     << "eval_seed = " << c.eval_seed << '\n'
     << "train_limit = " << c.train_limit << '\n'
     << "test_limit = " << c.test_limit << '\n'
     << "augment = " << (c.augment ? "true" : "false") << '\n';
  return os.str();
}

// Thrown for a key that TrainConfig does not know.
class UnknownKeyError : public ParameterError {
 public:
  explicit UnknownKeyError(const std::string& key)
      : ParameterError("unknown config key: " + key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParameterError("config key " + key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !is.eof() || (std::is_unsigned_v<T> && v.find('-') != std::string::npos)) {
    throw ParameterError("config key " + key + ": cannot parse '" + v + "'");
  }
  return out;
}

}  // namespace detail

// Applies one key = value setting.
inline void set_key(TrainConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "model") {
    try {
      c.model = parse_model_kind(value);
    } catch (const std::invalid_argument& e) {
      throw ParameterError("config key model: " + std::string(e.what()));
    }
  } else if (key == "arch") {
    c.arch = value;
  } else if (key == "dataset") {
    c.dataset = value;
  } else if (key == "epochs") {
    c.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "micro_batch") {
    c.micro_batch = parse_number<std::size_t>(key, value);
  } else if (key == "lr") {
    c.lr = parse_number<double>(key, value);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_number<double>(key, value);
  } else if (key == "scheduler_step") {
    c.scheduler_step = parse_number<std::size_t>(key, value);
  } else if (key == "scheduler_gamma") {
    c.scheduler_gamma = parse_number<double>(key, value);
  } else if (key == "lambda") {
    c.lambda = parse_number<double>(key, value);
  } else if (key == "timesteps") {
    c.timesteps = parse_number<std::size_t>(key, value);
  } else if (key == "hidden") {
    c.hidden = parse_number<std::size_t>(key, value);
  } else if (key == "alpha") {
    c.alpha = parse_number<double>(key, value);
  } else if (key == "init_gain") {
    c.init_gain = parse_number<double>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "eval_seed") {
    c.eval_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "train_limit") {
    c.train_limit = parse_number<std::size_t>(key, value);
  } else if (key == "test_limit") {
    c.test_limit = parse_number<std::size_t>(key, value);
  } else if (key == "augment") {
    c.augment = detail::parse_bool(key, value);
  } else {
    throw UnknownKeyError(key);
  }
}

// Flat "key = value" lines; '#' starts a comment.
inline void apply_text(TrainConfig& c, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline TrainConfig parse_config(const std::string& text, TrainConfig base = {}) {
  apply_text(base, text);
  return base;
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() {
  return {"mnist-d-f-bptt", "mnist-s-f-bptt", "mnist-d-r-bptt",
          "cifar10-d-f-bptt", "cifar10-s-f-bptt", "cifar10-d-r-bptt"};
}

// Named configurations. Dashes are optional between the model letters, so
// "mnist-sf-bptt" names the same preset as "mnist-s-f-bptt".
inline TrainConfig preset(const std::string& name) {
  const auto dash = name.find('-');
  if (dash == std::string::npos) throw ParameterError("unknown preset: " + name);
  const std::string ds = name.substr(0, dash);
  ModelKind model;
  try {
    model = parse_model_kind(name.substr(dash + 1));
  } catch (const std::invalid_argument&) {
    throw ParameterError("unknown preset: " + name);
  }
  TrainConfig c;
  c.model = model;
  const bool stoch = model == ModelKind::kSFBptt;
  if (ds == "mnist") {
    c.dataset = "mnist";
    c.arch = "mlp2";
    c.epochs = 150;
    c.batch_size = 512;
    c.lr = stoch ? 5e-2 : 1e-3;
    c.weight_decay = stoch ? 1e-6 : 1e-4;
    c.scheduler_step = 50;
    c.scheduler_gamma = stoch ? 0.8 : 0.5;
  } else if (ds == "cifar10" || ds == "cifar") {
    c.dataset = "cifar10";
    c.arch = "vgg15";
    c.epochs = 1000;
    c.batch_size = 64;
    c.lr = stoch ? 1e-2 : 5e-5;
    c.weight_decay = stoch ? 1e-6 : 1e-2;
    c.scheduler_step = stoch ? 200 : 120;
    c.scheduler_gamma = 0.5;
    c.augment = true;
  } else {
    throw ParameterError("unknown preset: " + name);
  }
  c.lambda = stoch ? 0.7 : 0.9;
  c.timesteps = default_timesteps(c.arch, model);
  return c;
}

inline NetworkSpec spec_for(const TrainConfig& c) {
  BuildOverrides o;
  o.hidden = c.hidden;
  o.lambda = c.lambda;
  o.timesteps = c.timesteps;
  o.alpha = c.alpha;
  NetworkSpec spec = build(c.arch, c.model, o);
  if (c.dataset == "cifar10" && spec.input_shape != Shape{3, 32, 32}) {
    throw ParameterError("architecture " + c.arch + " does not take CIFAR-10 input");
  }
  if (c.dataset == "mnist" && spec.input_shape != Shape{1, 28, 28}) {
    throw ParameterError("architecture " + c.arch + " does not take MNIST input");
  }
  return spec;
}

inline double lr_at(std::size_t epoch, const TrainConfig& c) {
  return c.lr * std::pow(c.scheduler_gamma, static_cast<double>(epoch / c.scheduler_step));
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const std::vector<Tensor>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.shape());
      s.v.emplace_back(p.shape());
    }
    return s;
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline std::string param_name(std::size_t i) { return "layer" + std::to_string(i) + ".weight"; }

// Bias-corrected Adam with L2 decay added to the gradient. Empty tensors
// (parameterless layers) are skipped.
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                      AdamState& state, double lr, double weight_decay) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != state.m[i].shape() ||
        params[i].shape() != state.v[i].shape()) {
      throw ShapeError("adam_step: shape mismatch for " + param_name(i));
    }
    for (double g : grads[i].data()) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + param_name(i));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].raw();
    const double* g = grads[i].raw();
    double* m = state.m[i].raw();
    double* v = state.v[i].raw();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double gj = g[j] + weight_decay * p[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mh = m[j] / bc1, vh = v[j] / bc2;
      p[j] -= lr * mh / (std::sqrt(vh) + state.eps);
      // Subnormals stall the GEMMs by orders of magnitude.
      constexpr double kTiny = std::numeric_limits<double>::min();
      if (std::abs(p[j]) < kTiny) p[j] = 0.0;
      if (std::abs(m[j]) < kTiny) m[j] = 0.0;
      if (v[j] < kTiny) v[j] = 0.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'K', 'F', 'C', 'K', 'P', 'T'};

struct EpochLog {
  std::uint64_t epoch = 0;  // 1-based count of completed epochs
  double lr = 0.0;
  double train_loss = 0.0;
  double test_acc = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  TrainConfig config;
  Network net;
  AdamState adam;
  std::uint64_t rng_seed = 0;
  std::uint64_t epoch = 0;  // completed epochs; training resumes at this index
  double best_acc = -1.0;
  std::uint64_t best_epoch = 0;
  std::vector<EpochLog> log;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    put_bytes(s.data(), s.size());
  }
  void put_tensor(const Tensor& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(d);
    put_bytes(t.raw(), t.size() * sizeof(double));
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  Tensor get_tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw CorruptionError("checkpoint: implausible tensor rank");
    Shape s(rank);
    for (auto& d : s) d = get<std::uint64_t>();
    const std::size_t n = shape_numel(s);
    if (n > (size_ - pos_) / sizeof(double)) throw CorruptionError("checkpoint: tensor overruns section");
    std::vector<double> vals(n);
    std::memcpy(vals.data(), data_ + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    Tensor t(s);
    std::copy(vals.begin(), vals.end(), t.raw());
    return t;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) throw CorruptionError("checkpoint: section truncated");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> checkpoint_bytes(const Checkpoint& ck) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> sections;
  auto text_section = [&](const char* tag, const std::string& text) {
    sections.emplace_back(tag, std::vector<std::uint8_t>(text.begin(), text.end()));
  };
  text_section("CONF", to_text(ck.config));
  text_section("SPEC", serialize(ck.net.spec));
  {
    detail::ByteWriter w;
    w.put<std::uint64_t>(ck.net.weights.size());
    for (const auto& t : ck.net.weights) w.put_tensor(t);
    sections.emplace_back("WGTS", std::move(w.bytes()));
  }
  {
    detail::ByteWriter w;
    w.put<std::uint64_t>(ck.adam.step);
    w.put<double>(ck.adam.beta1);
    w.put<double>(ck.adam.beta2);
    w.put<double>(ck.adam.eps);
    w.put<std::uint64_t>(ck.adam.m.size());
    for (const auto& t : ck.adam.m) w.put_tensor(t);
    for (const auto& t : ck.adam.v) w.put_tensor(t);
    sections.emplace_back("ADAM", std::move(w.bytes()));
  }
  {
    detail::ByteWriter w;
    w.put<std::uint64_t>(ck.rng_seed);
    w.put<std::uint64_t>(ck.epoch);
    w.put<double>(ck.best_acc);
    w.put<std::uint64_t>(ck.best_epoch);
    sections.emplace_back("STAT", std::move(w.bytes()));
  }
  {
    detail::ByteWriter w;
    w.put<std::uint64_t>(ck.log.size());
    for (const auto& e : ck.log) {
      w.put<std::uint64_t>(e.epoch);
      w.put<double>(e.lr);
      w.put<double>(e.train_loss);
      w.put<double>(e.test_acc);
    }
    sections.emplace_back("LOGS", std::move(w.bytes()));
  }

  detail::ByteWriter out;
  out.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.put<std::uint32_t>(ck.format_version);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [tag, body] : sections) {
    out.put_bytes(tag.data(), 4);
    out.put<std::uint64_t>(body.size());
    out.put_bytes(body.data(), body.size());
  }
  const std::uint32_t crc = detail::crc32_of(out.bytes().data(), out.bytes().size());
  out.put<std::uint32_t>(crc);
  return std::move(out.bytes());
}

inline Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + 8;
  if (bytes.size() < kHeader + 4) throw CorruptionError("checkpoint: file too short");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CorruptionError("checkpoint: bad magic");
  }
  detail::ByteReader head(bytes.data() + sizeof(kCheckpointMagic), 8);
  const auto version = head.get<std::uint32_t>();
  const auto count = head.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  const std::size_t body_end = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body_end, 4);
  if (detail::crc32_of(bytes.data(), body_end) != stored) {
    throw CorruptionError("checkpoint: checksum mismatch");
  }

  std::map<std::string, std::pair<const std::uint8_t*, std::size_t>> sec;
  std::size_t pos = kHeader;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (body_end - pos < 12) throw CorruptionError("checkpoint: section header truncated");
    std::string tag(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    std::uint64_t len;
    std::memcpy(&len, bytes.data() + pos + 4, 8);
    pos += 12;
    if (len > body_end - pos) throw CorruptionError("checkpoint: section " + tag + " overruns file");
    sec[tag] = {bytes.data() + pos, static_cast<std::size_t>(len)};
    pos += len;
  }
  if (pos != body_end) throw CorruptionError("checkpoint: trailing bytes");
  auto section = [&](const std::string& tag) {
    const auto it = sec.find(tag);
    if (it == sec.end()) throw CorruptionError("checkpoint: missing section " + tag);
    return detail::ByteReader(it->second.first, it->second.second);
  };
  auto text = [&](const std::string& tag) {
    const auto& [p, n] = sec.at(tag);
    return std::string(reinterpret_cast<const char*>(p), n);
  };

  Checkpoint ck;
  ck.format_version = version;
  section("CONF");
  section("SPEC");
  try {
    ck.config = parse_config(text("CONF"));
    ck.net.spec = parse_spec(text("SPEC"));
  } catch (const std::exception& e) {
    throw CorruptionError(std::string("checkpoint: ") + e.what());
  }
  {
    auto r = section("WGTS");
    const auto n = r.get<std::uint64_t>();
    if (n != ck.net.spec.layers.size()) throw CorruptionError("checkpoint: weight count mismatch");
    for (std::uint64_t i = 0; i < n; ++i) {
      Tensor t = r.get_tensor();
      const LayerSpec& ls = ck.net.spec.layers[i];
      const Shape want = ls.has_weights() ? ls.weight_shape() : Shape{};
      if (ls.has_weights() ? t.shape() != want : t.size() != 0) {
        throw CorruptionError("checkpoint: weight shape mismatch in " + param_name(i));
      }
      ck.net.weights.push_back(std::move(t));
    }
    if (!r.done()) throw CorruptionError("checkpoint: WGTS length mismatch");
  }
  {
    auto r = section("ADAM");
    ck.adam.step = r.get<std::uint64_t>();
    ck.adam.beta1 = r.get<double>();
    ck.adam.beta2 = r.get<double>();
    ck.adam.eps = r.get<double>();
    const auto n = r.get<std::uint64_t>();
    if (n != ck.net.weights.size()) throw CorruptionError("checkpoint: optimizer state count mismatch");
    for (std::uint64_t i = 0; i < n; ++i) ck.adam.m.push_back(r.get_tensor());
    for (std::uint64_t i = 0; i < n; ++i) ck.adam.v.push_back(r.get_tensor());
    if (!r.done()) throw CorruptionError("checkpoint: ADAM length mismatch");
  }
  {
    auto r = section("STAT");
    ck.rng_seed = r.get<std::uint64_t>();
    ck.epoch = r.get<std::uint64_t>();
    ck.best_acc = r.get<double>();
    ck.best_epoch = r.get<std::uint64_t>();
    if (!r.done()) throw CorruptionError("checkpoint: STAT length mismatch");
  }
  {
    auto r = section("LOGS");
    const auto n = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      EpochLog e;
      e.epoch = r.get<std::uint64_t>();
      e.lr = r.get<double>();
      e.train_loss = r.get<double>();
      e.test_acc = r.get<double>();
      ck.log.push_back(e);
    }
    if (!r.done()) throw CorruptionError("checkpoint: LOGS length mismatch");
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  // Write to a sibling and rename so a crash never leaves a half-written file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  detail::write_file(tmp, checkpoint_bytes(ck));
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Training

inline Checkpoint initial_checkpoint(const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint ck;
  ck.config = cfg;
  ck.net = init_network(spec_for(cfg), cfg.seed, cfg.init_gain);
  ck.adam = AdamState::for_params(ck.net.weights);
  ck.rng_seed = cfg.seed;
  return ck;
}

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // best.ckpt, last.ckpt, epochs.csv
  std::size_t workers = 1;
  std::function<void(const EpochLog&, double wall_time_s)> on_epoch;
};

struct TrainResult {
  Checkpoint last;
  Checkpoint best;
};

struct BatchGrad {
  double loss_sum = 0.0;
  std::vector<Tensor> grads;
};

namespace detail {

inline std::vector<std::size_t> batch_indices(const std::vector<std::size_t>& perm, std::size_t lo,
                                              std::size_t hi) {
  return {perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi)};
}

inline EncodedBatch train_batch(const TrainConfig& cfg, const Dataset& ds,
                                const std::vector<std::size_t>& ids, std::size_t epoch) {
  if (!cfg.augment) return make_batch(ds, ids, cfg.timesteps);
  const std::size_t sz = ds.image_size();
  Tensor px({ids.size(), sz});
  const AugmentConfig ac;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    RngStream rng{cfg.seed, stream_key(0xA06ull, epoch, ids[k]), 0};
    const LabeledImage img = augment(ds.at(ids[k]), ac, rng);
    std::copy_n(img.pixels.raw(), sz, px.raw() + k * sz);
  }
  return EncodedBatch::direct(std::move(px), cfg.timesteps);
}

inline void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log,
                            const std::vector<std::string>& wall) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << "epoch,lr,train_loss,test_acc,wall_time_s\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    out << log[i].epoch << ',' << fmt_double(log[i].lr) << ',' << fmt_double(log[i].train_loss) << ','
        << fmt_double(log[i].test_acc) << ',' << (i < wall.size() ? wall[i] : "nan") << '\n';
  }
}

// wall_time_s column of an existing epoch log.
inline std::vector<std::string> read_wall_times(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return out;
  while (std::getline(in, line)) {
    const auto c = line.rfind(',');
    out.push_back(c == std::string::npos ? "nan" : line.substr(c + 1));
  }
  return out;
}

}  // namespace detail

// Loss and summed-over-batch gradient for the samples `ids`, split into
// micro-batches that are reduced in a fixed order.
inline BatchGrad batch_gradient(const Network& net, const TrainConfig& cfg, const Dataset& ds,
                                const std::vector<std::size_t>& ids, std::size_t epoch,
                                std::size_t workers = 1) {
  const std::size_t n = ids.size();
  const std::size_t mb = cfg.micro_batch ? std::min(cfg.micro_batch, n) : n;
  const std::size_t chunks = (n + mb - 1) / mb;
  std::vector<BatchGrad> parts(chunks);

  auto run = [&](std::size_t c) {
    const std::size_t lo = c * mb, hi = std::min(n, lo + mb);
    const auto sub = detail::batch_indices(ids, lo, hi);
    const EncodedBatch input = detail::train_batch(cfg, ds, sub, epoch);
    SampleStreams streams{cfg.seed, {}};
    for (std::size_t i : sub) streams.keys.push_back(stream_key(0x7EA1ull, epoch, i));
    const ForwardResult fr = forward(net, input, streams);
    std::vector<std::size_t> targets;
    for (std::size_t i : sub) targets.push_back(ds.labels[i]);
    BatchLoss bl = output_loss(net.spec, fr.tape, targets);
    // output_loss averages over the micro-batch; rescale to the batch.
    const double scale = static_cast<double>(sub.size()) / static_cast<double>(n);
    BatchGrad& bg = parts[c];
    bg.grads = backward(net, fr.tape, bl.grad);
    if (scale != 1.0) {
      for (auto& g : bg.grads) g *= scale;
    }
    for (double v : bl.per_sample) bg.loss_sum += v;
  };

  const std::size_t w = std::min(std::max<std::size_t>(1, workers), chunks);
  if (w == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < w; ++k) {
      pool.emplace_back([&, k] {
        for (std::size_t c = k; c < chunks; c += w) run(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  BatchGrad total = std::move(parts[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    total.loss_sum += parts[c].loss_sum;
    for (std::size_t l = 0; l < total.grads.size(); ++l) total.grads[l] += parts[c].grads[l];
  }
  return total;
}

inline double test_accuracy(const Network& net, const TrainConfig& cfg, const Dataset& test,
                            std::size_t workers = 1) {
  EvalOptions eo;
  eo.coding = net.spec.coding;
  eo.seed = cfg.eval_seed;
  eo.workers = workers;
  return evaluate(net, test, eo).accuracy;
}

// Runs epochs [start.epoch, config.epochs). `start` is either a fresh
// initial_checkpoint() or a checkpoint saved by an earlier call.
inline TrainResult train(Checkpoint start, const Dataset& train_ds, const Dataset& test_ds,
                         const TrainOptions& opts = {}) {
  const TrainConfig& cfg = start.config;
  cfg.validate();
  if (train_ds.size() == 0) throw ParameterError("train: empty training set");
  if (train_ds.image_size() != shape_numel(start.net.spec.input_shape)) {
    throw DimensionError("train: dataset images do not match the network input");
  }
  TrainResult res{std::move(start), {}};
  Checkpoint& ck = res.last;
  if (opts.out_dir && std::filesystem::exists(*opts.out_dir / "best.ckpt") && ck.epoch > 0) {
    res.best = load_checkpoint(*opts.out_dir / "best.ckpt");
  } else {
    res.best = ck;
  }

  std::vector<std::string> wall;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    wall = detail::read_wall_times(*opts.out_dir / "epochs.csv");
    wall.resize(std::min<std::size_t>(wall.size(), ck.log.size()));
    if (ck.epoch == 0) {
      save_checkpoint(ck, *opts.out_dir / "last.ckpt");
      save_checkpoint(ck, *opts.out_dir / "best.ckpt");
      detail::write_epoch_csv(*opts.out_dir / "epochs.csv", ck.log, wall);
    }
  }

  const std::size_t n = train_ds.size();
  for (std::size_t epoch = ck.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    RngStream shuffle{ck.rng_seed, stream_key(0x5EEDull, epoch), 0};
    const std::vector<std::size_t> perm = permutation(n, shuffle);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const auto ids = detail::batch_indices(perm, lo, std::min(n, lo + cfg.batch_size));
      BatchGrad bg = batch_gradient(ck.net, cfg, train_ds, ids, epoch, opts.workers);
      if (!std::isfinite(bg.loss_sum)) {
        throw NumericalError("training diverged in epoch " + std::to_string(epoch + 1) +
                             " (non-finite loss); last good checkpoint kept");
      }
      loss_sum += bg.loss_sum;
      adam_step(ck.net.weights, bg.grads, ck.adam, lr, cfg.weight_decay);
    }
    const double acc = test_ds.size() ? test_accuracy(ck.net, cfg, test_ds, opts.workers) : 0.0;
    ck.epoch = epoch + 1;
    const EpochLog row{ck.epoch, lr, loss_sum / static_cast<double>(n), acc};
    ck.log.push_back(row);
    if (acc > ck.best_acc) {
      ck.best_acc = acc;
      ck.best_epoch = ck.epoch;
      res.best = ck;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    wall.push_back(detail::fmt_double(secs));
    if (opts.out_dir) {
      if (res.best.epoch == ck.epoch) save_checkpoint(res.best, *opts.out_dir / "best.ckpt");
      save_checkpoint(ck, *opts.out_dir / "last.ckpt");
      detail::write_epoch_csv(*opts.out_dir / "epochs.csv", ck.log, wall);
    }
    if (opts.on_epoch) opts.on_epoch(row, secs);
  }
  return res;
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_TRAINER_HPP_
