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

// Declarative network descriptions: the layer stack, neuron model, output
// code and horizon. A NetworkSpec is immutable once built and round-trips
// through a human-readable key=value block.

#ifndef SPIKEFIRST_ARCHITECTURE_HPP_
#define SPIKEFIRST_ARCHITECTURE_HPP_

#include <cctype>
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spikefirst/errors.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

enum class LayerKind { kLinear, kConv, kPool };
enum class NeuronKind { kNone, kDetLif, kStochLif };
enum class Coding { kFirstToSpike, kRate };
enum class ModelKind { kDFBptt, kSFBptt, kDRBptt };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
  }
  return "?";
}
inline std::string to_string(NeuronKind k) {
  switch (k) {
    case NeuronKind::kNone: return "none";
    case NeuronKind::kDetLif: return "det-lif";
    case NeuronKind::kStochLif: return "stoch-lif";
  }
  return "?";
}
inline std::string to_string(Coding c) {
  return c == Coding::kFirstToSpike ? "first-to-spike" : "rate";
}
inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::kDFBptt: return "D-F-BPTT";
    case ModelKind::kSFBptt: return "S-F-BPTT";
    case ModelKind::kDRBptt: return "D-R-BPTT";
  }
  return "?";
}
inline std::string to_string(PoolMode m) {
  return m == PoolMode::kAverage ? "avg" : "max";
}

inline ModelKind parse_model_kind(std::string_view s) {
  std::string u;
  for (char c : s) {
    if (c != '-' && c != '_') u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  if (u == "DFBPTT") return ModelKind::kDFBptt;
  if (u == "SFBPTT") return ModelKind::kSFBptt;
  if (u == "DRBPTT") return ModelKind::kDRBptt;
  throw ParameterError("unknown model kind '" + std::string(s) + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  Shape in_shape;   // per-sample input shape
  Shape out_shape;  // per-sample output shape

  // conv: kernel x kernel, stride, pad. pool: kernel is the window.
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  PoolMode pool_mode = PoolMode::kAverage;

  NeuronKind neuron = NeuronKind::kNone;
  double v_th = 1.0;
  double k = 1.0;
  double lambda = 0.9;

  std::size_t in_size() const { return shape_numel(in_shape); }
  std::size_t out_size() const { return shape_numel(out_shape); }
  bool has_weights() const { return kind != LayerKind::kPool; }
  bool spiking() const { return neuron != NeuronKind::kNone; }

  Shape weight_shape() const {
    if (kind == LayerKind::kLinear) return {out_size(), in_size()};
    if (kind == LayerKind::kConv) return {out_shape[0], in_shape[0], kernel, kernel};
    return {};
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::string arch;
  ModelKind model = ModelKind::kDFBptt;
  Coding coding = Coding::kFirstToSpike;
  std::size_t timesteps = 20;
  double alpha = 2.0;  // arctan surrogate width
  Shape input_shape;
  std::vector<LayerSpec> layers;

  std::size_t num_outputs() const { return layers.empty() ? 0 : layers.back().out_size(); }

  std::vector<std::size_t> spiking_layers() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].spiking()) idx.push_back(i);
    }
    return idx;
  }

  // Per spiking layer: v_th (deterministic) or k (stochastic).
  std::vector<double> neuron_scales() const {
    std::vector<double> out;
    for (const auto& l : layers) {
      if (l.neuron == NeuronKind::kDetLif) out.push_back(l.v_th);
      if (l.neuron == NeuronKind::kStochLif) out.push_back(l.k);
    }
    return out;
  }

  void set_neuron_scales(const std::vector<double>& values) {
    const auto idx = spiking_layers();
    if (values.size() != idx.size()) {
      throw DimensionError("expected " + std::to_string(idx.size()) +
                           " per-layer values, got " + std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      LayerSpec& l = layers[idx[i]];
      if (!(values[i] > 0.0)) throw ParameterError("per-layer v_th/k must be > 0");
      if (l.neuron == NeuronKind::kDetLif) l.v_th = values[i];
      else l.k = values[i];
    }
  }

  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline void NetworkSpec::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  if (timesteps < 1) throw ParameterError("timesteps must be >= 1");
  if (!(alpha > 0.0)) throw ParameterError("alpha must be > 0");
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (shape_numel(l.in_shape) != shape_numel(cur) ||
        (l.kind != LayerKind::kLinear && l.in_shape != cur)) {
      throw DimensionError("layer " + std::to_string(i) + " expects input " +
                           shape_str(l.in_shape) + " but receives " + shape_str(cur));
    }
    switch (l.kind) {
      case LayerKind::kLinear:
        if (l.out_shape.size() != 1) throw DimensionError("linear output must be rank 1");
        break;
      case LayerKind::kConv: {
        if (l.in_shape.size() != 3 || l.out_shape.size() != 3) {
          throw DimensionError("conv layers take and produce [C x H x W]");
        }
        const std::size_t oh = conv_out_extent(l.in_shape[1], l.kernel, l.stride, l.pad);
        const std::size_t ow = conv_out_extent(l.in_shape[2], l.kernel, l.stride, l.pad);
        if (l.out_shape[1] != oh || l.out_shape[2] != ow) {
          throw DimensionError("conv layer " + std::to_string(i) + " output shape mismatch");
        }
        break;
      }
      case LayerKind::kPool:
        if (l.spiking()) throw ParameterError("pool layers carry no neuron");
        if (l.in_shape.size() != 3 || l.kernel == 0 || l.in_shape[1] % l.kernel ||
            l.in_shape[2] % l.kernel ||
            l.out_shape != Shape{l.in_shape[0], l.in_shape[1] / l.kernel,
                                 l.in_shape[2] / l.kernel}) {
          throw ShapeError("pool layer " + std::to_string(i) + " has inconsistent shape");
        }
        break;
    }
    if (l.has_weights() && !l.spiking()) {
      throw ParameterError("weighted layer " + std::to_string(i) + " needs a neuron");
    }
    if (l.neuron == NeuronKind::kDetLif && !(l.v_th > 0.0)) throw ParameterError("v_th must be > 0");
    if (l.neuron == NeuronKind::kStochLif && !(l.k > 0.0)) throw ParameterError("k must be > 0");
    if (!(l.lambda >= 0.0 && l.lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
    cur = l.out_shape;
  }
  if (!layers.back().spiking()) throw ParameterError("output layer must be spiking");
  if (num_outputs() != 10) {
    throw DimensionError("output layer must have exactly 10 neurons, has " +
                         std::to_string(num_outputs()));
  }
}

// ---------------------------------------------------------------------------
// build

struct BuildOverrides {
  std::optional<std::size_t> hidden;            // mlp2 hidden width
  std::optional<std::vector<double>> scales;    // per spiking layer v_th or k
  std::optional<double> lambda;
  std::optional<std::size_t> timesteps;
  std::optional<double> alpha;
};

inline std::size_t default_timesteps(const std::string& arch, ModelKind model) {
  if (model != ModelKind::kDRBptt) return 20;
  if (arch == "lenet5") return 35;
  if (arch == "vgg15") return 100;
  return 15;
}

namespace detail {

class SpecBuilder {
 public:
  SpecBuilder(Shape input, NeuronKind neuron, double lambda)
      : cur_(std::move(input)), neuron_(neuron), lambda_(lambda) {}

  void linear(std::size_t out) {
    LayerSpec l = base(LayerKind::kLinear);
    l.out_shape = {out};
    push(std::move(l));
  }
  void conv(std::size_t out_channels, std::size_t kernel, std::size_t pad) {
    LayerSpec l = base(LayerKind::kConv);
    l.kernel = kernel;
    l.pad = pad;
    l.out_shape = {out_channels, conv_out_extent(cur_[1], kernel, 1, pad),
                   conv_out_extent(cur_[2], kernel, 1, pad)};
    push(std::move(l));
  }
  void pool(std::size_t window, PoolMode mode) {
    LayerSpec l = base(LayerKind::kPool);
    l.neuron = NeuronKind::kNone;
    l.lambda = LayerSpec{}.lambda;
    l.kernel = window;
    l.pool_mode = mode;
    l.out_shape = {cur_[0], cur_[1] / window, cur_[2] / window};
    push(std::move(l));
  }
  std::vector<LayerSpec> take() { return std::move(layers_); }

 private:
  LayerSpec base(LayerKind kind) const {
    LayerSpec l;
    l.kind = kind;
    l.in_shape = cur_;
    l.neuron = neuron_;
    l.lambda = lambda_;
    return l;
  }
  void push(LayerSpec l) {
    cur_ = l.out_shape;
    layers_.push_back(std::move(l));
  }

  Shape cur_;
  NeuronKind neuron_;
  double lambda_;
  std::vector<LayerSpec> layers_;
};

}  // namespace detail

inline NetworkSpec build(const std::string& arch, ModelKind model,
                         const BuildOverrides& overrides = {}) {
  const NeuronKind neuron =
      model == ModelKind::kSFBptt ? NeuronKind::kStochLif : NeuronKind::kDetLif;
  const double lambda =
      overrides.lambda.value_or(model == ModelKind::kSFBptt ? 0.7 : 0.9);

  NetworkSpec spec;
  spec.arch = arch;
  spec.model = model;
  spec.coding = model == ModelKind::kDRBptt ? Coding::kRate : Coding::kFirstToSpike;
  spec.timesteps = overrides.timesteps.value_or(default_timesteps(arch, model));
  spec.alpha = overrides.alpha.value_or(2.0);

  if (arch == "mlp2") {
    spec.input_shape = {1, 28, 28};
    detail::SpecBuilder b(spec.input_shape, neuron, lambda);
    b.linear(overrides.hidden.value_or(800));
    b.linear(10);
    spec.layers = b.take();
  } else if (arch == "lenet5") {
    spec.input_shape = {1, 28, 28};
    detail::SpecBuilder b(spec.input_shape, neuron, lambda);
    b.conv(6, 5, 0);
    b.pool(2, PoolMode::kAverage);
    b.conv(16, 5, 0);
    b.pool(2, PoolMode::kAverage);
    b.linear(120);
    b.linear(84);
    b.linear(10);
    spec.layers = b.take();
  } else if (arch == "vgg15") {
    spec.input_shape = {3, 32, 32};
    detail::SpecBuilder b(spec.input_shape, neuron, lambda);
    const int plan[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 0,
                        512, 512, 512, 0, 512, 512, 512, 0};
    for (int c : plan) {
      if (c == 0) b.pool(2, PoolMode::kMax);
      else b.conv(static_cast<std::size_t>(c), 3, 1);
    }
    b.linear(512);
    b.linear(10);
    spec.layers = b.take();
  } else {
    throw ParameterError("unknown architecture '" + arch +
                         "' (expected mlp2, lenet5 or vgg15)");
  }
  if (overrides.scales) spec.set_neuron_scales(*overrides.scales);
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Text serialization

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string fmt_shape(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

inline Shape parse_shape(const std::string& s) {
  Shape out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find('x', pos);
    const std::string part = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (part.empty()) throw FormatError("bad shape '" + s + "'");
    out.push_back(std::stoull(part));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace detail

inline constexpr std::string_view kSpecHeader = "spikefirst-network v1";

inline std::string serialize(const NetworkSpec& spec) {
  using detail::fmt_double;
  using detail::fmt_shape;
  std::ostringstream os;
  os << kSpecHeader << '\n';
  os << "arch = " << spec.arch << '\n';
  os << "model = " << to_string(spec.model) << '\n';
  os << "coding = " << to_string(spec.coding) << '\n';
  os << "timesteps = " << spec.timesteps << '\n';
  os << "alpha = " << fmt_double(spec.alpha) << '\n';
  os << "input = " << fmt_shape(spec.input_shape) << '\n';
  os << "layers = " << spec.layers.size() << '\n';
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    os << "layer." << i << " = " << to_string(l.kind) << " in=" << fmt_shape(l.in_shape)
       << " out=" << fmt_shape(l.out_shape);
    if (l.kind == LayerKind::kConv) {
      os << " kernel=" << l.kernel << " stride=" << l.stride << " pad=" << l.pad;
    }
    if (l.kind == LayerKind::kPool) {
      os << " window=" << l.kernel << " mode=" << to_string(l.pool_mode);
    }
    os << " neuron=" << to_string(l.neuron);
    if (l.spiking()) {
      os << " v_th=" << fmt_double(l.v_th) << " k=" << fmt_double(l.k)
         << " lambda=" << fmt_double(l.lambda);
    }
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

inline NetworkSpec parse_spec(const std::string& text) {
  using detail::parse_double;
  using detail::parse_shape;
  using detail::trim;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || trim(line) != kSpecHeader) {
    throw FormatError("network spec: missing header");
  }
  std::map<std::string, std::string> kv;
  bool ended = false;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line == "end") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("network spec: bad line '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!ended) throw FormatError("network spec: missing 'end'");
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("network spec: missing key '" + key + "'");
    return it->second;
  };

  try {
    NetworkSpec spec;
    spec.arch = get("arch");
    spec.model = parse_model_kind(get("model"));
    const std::string coding = get("coding");
    if (coding == "first-to-spike") spec.coding = Coding::kFirstToSpike;
    else if (coding == "rate") spec.coding = Coding::kRate;
    else throw FormatError("network spec: unknown coding '" + coding + "'");
    spec.timesteps = std::stoull(get("timesteps"));
    spec.alpha = parse_double(get("alpha"));
    spec.input_shape = parse_shape(get("input"));
    const std::size_t n = std::stoull(get("layers"));
    for (std::size_t i = 0; i < n; ++i) {
      std::istringstream ls(get("layer." + std::to_string(i)));
      std::string kind;
      ls >> kind;
      LayerSpec l;
      if (kind == "linear") l.kind = LayerKind::kLinear;
      else if (kind == "conv") l.kind = LayerKind::kConv;
      else if (kind == "pool") l.kind = LayerKind::kPool;
      else throw FormatError("network spec: unknown layer kind '" + kind + "'");
      std::string tok;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("network spec: bad token '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "in") l.in_shape = parse_shape(val);
        else if (key == "out") l.out_shape = parse_shape(val);
        else if (key == "kernel" || key == "window") l.kernel = std::stoull(val);
        else if (key == "stride") l.stride = std::stoull(val);
        else if (key == "pad") l.pad = std::stoull(val);
        else if (key == "mode") l.pool_mode = val == "max" ? PoolMode::kMax : PoolMode::kAverage;
        else if (key == "neuron") {
          if (val == "det-lif") l.neuron = NeuronKind::kDetLif;
          else if (val == "stoch-lif") l.neuron = NeuronKind::kStochLif;
          else if (val == "none") l.neuron = NeuronKind::kNone;
          else throw FormatError("network spec: unknown neuron '" + val + "'");
        } else if (key == "v_th") l.v_th = parse_double(val);
        else if (key == "k") l.k = parse_double(val);
        else if (key == "lambda") l.lambda = parse_double(val);
        else throw FormatError("network spec: unknown layer key '" + key + "'");
      }
      spec.layers.push_back(std::move(l));
    }
    spec.validate();
    return spec;
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("network spec: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw FormatError(std::string("network spec: ") + e.what());
  }
}

// One line per layer with shapes and parameter counts.
inline std::string layer_audit(const NetworkSpec& spec) {
  std::ostringstream os;
  os << spec.arch << " " << to_string(spec.model) << " coding=" << to_string(spec.coding)
     << " T=" << spec.timesteps << " input=" << detail::fmt_shape(spec.input_shape) << '\n';
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    os << "  [" << i << "] " << to_string(l.kind) << ' ' << detail::fmt_shape(l.in_shape)
       << " -> " << detail::fmt_shape(l.out_shape);
    if (l.has_weights()) os << " params=" << shape_numel(l.weight_shape());
    os << " neuron=" << to_string(l.neuron) << '\n';
  }
  return os.str();
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_ARCHITECTURE_HPP_
