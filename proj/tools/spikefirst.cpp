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

// spikefirst: train, evaluate, tune and stress-test spiking classifiers.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 data
// error, 4 checkpoint error.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "spikefirst/spikefirst.hpp"

namespace fs = std::filesystem;
namespace sf = spikefirst;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;
constexpr const char* kVersion = "spikefirst 0.1.0";

struct ExitError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw ExitError{code, msg}; }

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(kExitConfig, "cannot read config file " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json config_json(const sf::TrainConfig& c) {
  json j = json::object();
  std::istringstream in(sf::to_text(c));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

// Run manifest, written before work begins and rewritten when it ends.
class Manifest {
 public:
  Manifest(fs::path out, std::string command, int argc, char** argv)
      : path_(std::move(out) / "manifest.json") {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["version"] = kVersion;
    j_["started"] = now_iso();
    j_["artifacts"] = json::object();
  }
  json& operator[](const char* key) { return j_[key]; }
  void artifact(const std::string& name, const fs::path& p) { j_["artifacts"][name] = p.string(); }
  void write() const {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) fail(kExitFailure, "cannot write " + path_.string());
    out << j_.dump(2) << '\n';
  }
  void finish(int status) {
    j_["finished"] = now_iso();
    j_["status"] = status;
    write();
  }

 private:
  fs::path path_;
  json j_;
};

// ---------------------------------------------------------------------------
// Data

fs::path data_root(const std::string& flag, const std::string& dataset) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SPIKEFIRST_DATA")) {
    const fs::path base(env);
    if (fs::is_directory(base / dataset)) return base / dataset;
    return base;
  }
  fail(kExitData, "no dataset location: pass --data or set SPIKEFIRST_DATA");
}

struct Splits {
  sf::Dataset train;
  sf::Dataset test;
};

Splits load_data(const std::string& dataset, const fs::path& root, std::size_t train_limit,
                 std::size_t test_limit) {
  Splits s;
  try {
    if (dataset == "mnist") {
      s.train = sf::load_mnist(root, sf::Split::kTrain);
      s.test = sf::load_mnist(root, sf::Split::kTest);
    } else if (dataset == "cifar10") {
      auto c = sf::load_cifar10(root);
      s.train = std::move(c.train);
      s.test = std::move(c.test);
    } else {
      fail(kExitConfig, "unknown dataset " + dataset);
    }
  } catch (const sf::IoError& e) {
    fail(kExitData, e.what());
  } catch (const sf::FormatError& e) {
    fail(kExitData, e.what());
  } catch (const sf::ConsistencyError& e) {
    fail(kExitData, e.what());
  }
  if (train_limit) s.train = sf::head(s.train, train_limit);
  if (test_limit) s.test = sf::head(s.test, test_limit);
  return s;
}

sf::Checkpoint load_ckpt(const fs::path& p) {
  try {
    return sf::load_checkpoint(p);
  } catch (const sf::IoError& e) {
    fail(kExitCheckpoint, e.what());
  } catch (const sf::CorruptionError& e) {
    fail(kExitCheckpoint, e.what());
  } catch (const sf::VersionError& e) {
    fail(kExitCheckpoint, e.what());
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(kExitConfig, "cannot parse number '" + item + "'");
    }
  }
  if (out.empty()) fail(kExitConfig, "empty list");
  return out;
}

void print_report(const std::string& name, const sf::MetricsReport& r) {
  std::cout << std::setprecision(6) << "model          " << name << '\n'
            << "samples        " << r.n_samples << '\n'
            << "accuracy       " << r.accuracy << '\n'
            << "mean latency   " << r.mean_latency << " (T=" << r.timesteps << ")\n"
            << "silent         " << r.silent_fraction << '\n'
            << "energy cost    " << r.energy_cost << '\n'
            << "layer rates   ";
  for (double x : r.layer_rates) std::cout << ' ' << x;
  std::cout << '\n';
}

// ---------------------------------------------------------------------------
// Options shared by several commands

struct Common {
  std::string out = ".";
  std::string data;
  std::size_t workers = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--data", c.data, "Dataset directory (default: $SPIKEFIRST_DATA)");
  app->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

struct TrainArgs {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::string resume;
  std::map<std::string, std::string> flags;
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large per-batch buffers in the heap instead of returning them to
  // the kernel after every step.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Spiking neural network training with first-to-spike output coding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;

  // train
  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a network");
  add_common(train, common);
  train->add_option("--config", ta.config, "key = value configuration file");
  train->add_option("--preset", ta.preset, "Named preset, e.g. mnist-s-f-bptt");
  train->add_option("--set", ta.sets, "Override key=value (repeatable)");
  train->add_option("--resume", ta.resume, "Resume from a checkpoint");
  for (const char* key : {"model", "arch", "epochs", "batch_size", "micro_batch", "lr", "weight_decay",
                          "scheduler_step", "scheduler_gamma", "lambda", "timesteps", "hidden",
                          "alpha", "seed", "train_limit", "test_limit"}) {
    std::string flag = std::string("--") + key;
    for (char& ch : flag) {
      if (ch == '_') ch = '-';
    }
    train->add_option_function<std::string>(
        flag, [&ta, key](const std::string& v) { ta.flags[key] = v; }, std::string("Set ") + key);
  }

  // eval
  std::string ckpt_path, mode, eval_name;
  std::optional<std::size_t> eval_timesteps;
  std::size_t limit = 0;
  std::uint64_t eval_seed = 12345;
  bool full_horizon = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval, common);
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--mode", mode, "first-to-spike or rate (default: the model's coding)");
  eval->add_option("--timesteps", eval_timesteps, "Override the horizon T");
  eval->add_option("--limit", limit, "Evaluate only the first N test samples");
  eval->add_option("--seed", eval_seed, "Seed for stochastic neurons")->capture_default_str();
  eval->add_option("--name", eval_name, "Row label in metrics.csv");
  eval->add_flag("--full-horizon", full_horizon, "Disable first-spike early exit");

  // tune
  double beta = 0.1, de_f = 0.5, de_cr = 0.7, low = 0.25, high = 2.0;
  std::size_t generations = 30, pop = 0, val_size = 2000;
  std::uint64_t de_seed = 7;
  bool no_incumbent = false;
  auto* tune = app.add_subcommand("tune", "Tune per-layer thresholds or scales by differential evolution");
  add_common(tune, common);
  tune->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  tune->add_option("--beta", beta, "Latency weight")->capture_default_str();
  tune->add_option("--generations", generations, "Generations")->capture_default_str();
  tune->add_option("--pop", pop, "Population size (0: 15 per dimension, max 60)")->capture_default_str();
  tune->add_option("--F", de_f, "Mutation factor")->capture_default_str();
  tune->add_option("--CR", de_cr, "Crossover rate")->capture_default_str();
  tune->add_option("--low", low, "Lower bound per layer")->capture_default_str();
  tune->add_option("--high", high, "Upper bound per layer")->capture_default_str();
  tune->add_option("--val-size", val_size, "Validation subset size")->capture_default_str();
  tune->add_option("--seed", de_seed, "DE seed")->capture_default_str();
  tune->add_option("--eval-seed", eval_seed, "Seed for stochastic neurons")->capture_default_str();
  tune->add_flag("--no-incumbent", no_incumbent, "Do not seed the population with the current values");

  // noise
  std::string variances = "0,0.25,0.5,0.75,1.0";
  std::uint64_t noise_seed = 2024;
  auto* noise = app.add_subcommand("noise", "Accuracy under additive Gaussian input noise");
  add_common(noise, common);
  noise->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  noise->add_option("--variances", variances, "Comma-separated variances in [0, 1]")->capture_default_str();
  noise->add_option("--noise-seed", noise_seed, "Noise seed")->capture_default_str();
  noise->add_option("--seed", eval_seed, "Seed for stochastic neurons")->capture_default_str();
  noise->add_option("--limit", limit, "Use only the first N test samples");

  // report
  auto* report = app.add_subcommand("report", "Print a checkpoint's configuration and architecture");
  report->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  std::optional<Manifest> manifest;
  try {
    if (!report->parsed()) fs::create_directories(common.out);
    const fs::path out(common.out);

    if (train->parsed()) {
      sf::TrainConfig cfg;
      sf::Checkpoint start;
      try {
        if (!ta.preset.empty()) cfg = sf::preset(ta.preset);
        if (!ta.config.empty()) sf::apply_text(cfg, read_text(ta.config));
        for (const auto& s : ta.sets) {
          const auto eq = s.find('=');
          if (eq == std::string::npos) fail(kExitConfig, "--set expects key=value, got " + s);
          sf::set_key(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : ta.flags) sf::set_key(cfg, k, v);
        cfg.validate();
        sf::spec_for(cfg).validate();
      } catch (const sf::UnknownKeyError& e) {
        fail(kExitConfig, "unknown config key '" + e.key() + "'");
      } catch (const std::invalid_argument& e) {
        fail(kExitConfig, e.what());
      }
      if (!ta.resume.empty()) {
        start = load_ckpt(ta.resume);
        if (start.config.epochs != cfg.epochs && ta.flags.count("epochs")) start.config.epochs = cfg.epochs;
        cfg = start.config;
      } else {
        start = sf::initial_checkpoint(cfg);
      }
      manifest.emplace(out, "train", argc, argv);
      (*manifest)["config"] = config_json(cfg);
      (*manifest)["seed"] = cfg.seed;
      manifest->artifact("last_checkpoint", out / "last.ckpt");
      manifest->artifact("best_checkpoint", out / "best.ckpt");
      manifest->artifact("epoch_log", out / "epochs.csv");
      manifest->write();

      const Splits data = load_data(cfg.dataset, data_root(common.data, cfg.dataset), cfg.train_limit,
                                    cfg.test_limit);
      std::cout << sf::layer_audit(start.net.spec);
      sf::TrainOptions topts;
      topts.out_dir = out;
      topts.workers = common.workers;
      topts.on_epoch = [](const sf::EpochLog& e, double secs) {
        std::cout << "epoch " << e.epoch << " lr " << e.lr << " loss " << std::setprecision(6)
                  << e.train_loss << " test_acc " << e.test_acc << " (" << std::setprecision(3) << secs
                  << " s)" << std::endl;
      };
      const sf::TrainResult res = sf::train(std::move(start), data.train, data.test, topts);
      std::cout << "best test accuracy " << res.best.best_acc << " at epoch " << res.best.best_epoch << '\n';
    } else if (eval->parsed()) {
      sf::Checkpoint ck = load_ckpt(ckpt_path);
      sf::EvalOptions eo;
      eo.coding = ck.net.spec.coding;
      if (!mode.empty()) {
        if (mode == "rate") {
          eo.coding = sf::Coding::kRate;
        } else if (mode == "first-to-spike" || mode == "fts") {
          eo.coding = sf::Coding::kFirstToSpike;
        } else {
          fail(kExitConfig, "unknown --mode " + mode);
        }
      }
      if (eval_timesteps) {
        if (*eval_timesteps == 0) fail(kExitConfig, "--timesteps must be > 0");
        ck.net.spec.timesteps = *eval_timesteps;
      }
      eo.early_exit = !full_horizon;
      eo.seed = eval_seed;
      eo.workers = common.workers;
      manifest.emplace(out, "eval", argc, argv);
      (*manifest)["checkpoint"] = ckpt_path;
      (*manifest)["seed"] = eval_seed;
      manifest->artifact("metrics", out / "metrics.csv");
      manifest->artifact("rates", out / "rates.csv");
      manifest->write();
      const Splits data = load_data(ck.config.dataset, data_root(common.data, ck.config.dataset), 1, limit);
      const sf::MetricsReport r = sf::evaluate(ck.net, data.test, eo);
      const std::string name = eval_name.empty() ? sf::to_string(ck.net.spec.model) : eval_name;
      print_report(name, r);
      sf::write_metrics_csv(out / "metrics.csv", name, r);
      sf::write_rates_csv(out / "rates.csv", r);
    } else if (tune->parsed()) {
      if (!(low > 0.0 && low <= high)) fail(kExitConfig, "tune bounds must satisfy 0 < low <= high");
      if (!(de_f >= 0.0 && de_f < 2.0) || !(de_cr >= 0.0 && de_cr <= 1.0)) {
        fail(kExitConfig, "invalid DE parameters");
      }
      const sf::Checkpoint ck = load_ckpt(ckpt_path);
      sf::DeConfig dc;
      dc.max_generations = generations;
      dc.pop_size = pop;
      dc.mutation_factor = de_f;
      dc.crossover_rate = de_cr;
      dc.latency_weight = beta;
      dc.seed = de_seed;
      dc.bounds.assign(ck.net.spec.spiking_layers().size(), {low, high});
      try {
        dc.validate();
      } catch (const std::invalid_argument& e) {
        fail(kExitConfig, e.what());
      }
      manifest.emplace(out, "tune", argc, argv);
      (*manifest)["checkpoint"] = ckpt_path;
      (*manifest)["seed"] = de_seed;
      manifest->artifact("history", out / "de_history.csv");
      manifest->artifact("tuned_checkpoint", out / "tuned.ckpt");
      manifest->write();
      const Splits data = load_data(ck.config.dataset, data_root(common.data, ck.config.dataset), 0, 1);
      const sf::Dataset val = sf::validation_subset(data.train, val_size, ck.config.seed);
      sf::EvalOptions eo;
      eo.seed = eval_seed;
      eo.workers = common.workers;
      const sf::TuneResult tr = sf::tune_network(ck.net, val, dc, eo, !no_incumbent);
      sf::write_de_history_csv(out / "de_history.csv", tr.de);
      sf::Checkpoint tuned = ck;
      tuned.net = tr.tuned;
      sf::save_checkpoint(tuned, out / "tuned.ckpt");
      std::cout << "best objective " << tr.de.best_objective << " values";
      for (double x : tr.de.best_vector) std::cout << ' ' << x;
      std::cout << '\n';
    } else if (noise->parsed()) {
      const std::vector<double> vars = parse_list(variances);
      for (double v : vars) {
        if (!(v >= 0.0 && v <= 1.0)) fail(kExitConfig, "variances must lie in [0, 1]");
      }
      const sf::Checkpoint ck = load_ckpt(ckpt_path);
      manifest.emplace(out, "noise", argc, argv);
      (*manifest)["checkpoint"] = ckpt_path;
      (*manifest)["seed"] = noise_seed;
      manifest->artifact("noise", out / "noise.csv");
      manifest->write();
      const Splits data = load_data(ck.config.dataset, data_root(common.data, ck.config.dataset), 1, limit);
      sf::EvalOptions eo;
      eo.coding = ck.net.spec.coding;
      eo.seed = eval_seed;
      eo.noise_seed = noise_seed;
      eo.workers = common.workers;
      const auto pts = sf::noise_sweep(ck.net, data.test, vars, eo);
      sf::write_noise_csv(out / "noise.csv", pts);
      for (const auto& p : pts) std::cout << "variance " << p.variance << " accuracy " << p.accuracy << '\n';
    } else if (report->parsed()) {
      const sf::Checkpoint ck = load_ckpt(ckpt_path);
      std::cout << "# config\n" << sf::to_text(ck.config) << "\n# network\n" << sf::serialize(ck.net.spec)
                << "\n# layers\n" << sf::layer_audit(ck.net.spec) << "\n# state\n"
                << "epochs completed = " << ck.epoch << '\n'
                << "best test accuracy = " << ck.best_acc << " (epoch " << ck.best_epoch << ")\n";
    }
    if (manifest) manifest->finish(kExitOk);
    return kExitOk;
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.message << '\n';
    if (manifest) manifest->finish(e.code);
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (manifest) manifest->finish(kExitFailure);
    return kExitFailure;
  }
}
