#pragma once

// Declarative run configuration: JSON mapping of every config type, dotted
// command-line overrides, and the manifest written by each CLI run.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lnln/dataset.hpp"
#include "lnln/eval.hpp"
#include "lnln/model.hpp"
#include "lnln/training.hpp"

namespace lnln {

using json = nlohmann::json;

inline constexpr const char* kArtifactVersion = "1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Precision { F64, F32 };

inline const char* precision_name(Precision p) { return p == Precision::F64 ? "f64" : "f32"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "f64") return Precision::F64;
  if (s == "f32") return Precision::F32;
  throw ConfigError("precision must be 'f64' or 'f32', got '" + s + "'");
}

struct RunConfig {
  std::string dataset;
  std::string output_dir = "runs";
  ModelConfig model;
  TrainConfig train;
  /// Named loss-weight preset; "custom" keeps train.weights as given.
  std::string loss_profile = "mosi";
  std::vector<std::uint64_t> seeds = default_seeds();
  std::vector<double> sweep_rates = default_sweep_rates();
  std::size_t eval_batch_size = 64;
  Precision precision = Precision::F64;
  /// Generator settings for gen-data.
  SyntheticSpec synthetic;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// ---------------------------------------------------------------------------
// JSON mapping. Readers start from defaults and only overwrite present keys;
// unknown keys are rejected so typos fail loudly.

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const LossWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"delta", w.delta}};
}

inline LossWeights loss_weights_from_json(const json& j, LossWeights w = {}) {
  detail::reject_unknown(j, {"alpha", "beta", "gamma", "delta"}, "weights");
  detail::read_key(j, "alpha", w.alpha, "weights");
  detail::read_key(j, "beta", w.beta, "weights");
  detail::read_key(j, "gamma", w.gamma, "weights");
  detail::read_key(j, "delta", w.delta, "weights");
  return w;
}

inline json to_json(const ModelConfig& c) {
  return {{"token_len", c.token_len},
          {"width", c.width},
          {"heads", c.heads},
          {"ffn_mult", c.ffn_mult},
          {"fusion_layers", c.fusion_layers},
          {"feature_dims", c.feature_dims},
          {"grl_lambda", c.grl_lambda},
          {"use_dmc", c.use_dmc},
          {"use_reconstructor", c.use_reconstructor},
          {"init_seed", c.init_seed}};
}

inline ModelConfig model_config_from_json(const json& j, ModelConfig c = {}) {
  const std::string w = "model";
  detail::reject_unknown(j,
                         {"token_len", "width", "heads", "ffn_mult", "fusion_layers",
                          "feature_dims", "grl_lambda", "use_dmc", "use_reconstructor",
                          "init_seed"},
                         w);
  detail::read_key(j, "token_len", c.token_len, w);
  detail::read_key(j, "width", c.width, w);
  detail::read_key(j, "heads", c.heads, w);
  detail::read_key(j, "ffn_mult", c.ffn_mult, w);
  detail::read_key(j, "fusion_layers", c.fusion_layers, w);
  detail::read_key(j, "feature_dims", c.feature_dims, w);
  detail::read_key(j, "grl_lambda", c.grl_lambda, w);
  detail::read_key(j, "use_dmc", c.use_dmc, w);
  detail::read_key(j, "use_reconstructor", c.use_reconstructor, w);
  detail::read_key(j, "init_seed", c.init_seed, w);
  if (c.heads == 0 || c.width % c.heads != 0) {
    throw ConfigError("model: width " + std::to_string(c.width) +
                      " must be a positive multiple of heads " + std::to_string(c.heads));
  }
  return c;
}

inline json to_json(const AdamWConfig& c) {
  return {{"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon},
          {"weight_decay", c.weight_decay}};
}

inline json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"warmup", c.warmup},
          {"warmup_fraction", c.warmup_fraction},
          {"cosine", c.cosine},
          {"patience", c.patience},
          {"seed", c.seed},
          {"weights", to_json(c.weights)},
          {"adamw", to_json(c.adamw)},
          {"noisy_training", c.noisy_training},
          {"validation_rates", c.validation_rates},
          {"validation_seed", c.validation_seed}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
  const std::string w = "train";
  detail::reject_unknown(j,
                         {"batch_size", "learning_rate", "epochs", "warmup", "warmup_fraction",
                          "cosine", "patience", "seed", "weights", "adamw", "noisy_training",
                          "validation_rates", "validation_seed"},
                         w);
  detail::read_key(j, "batch_size", c.batch_size, w);
  detail::read_key(j, "learning_rate", c.learning_rate, w);
  detail::read_key(j, "epochs", c.epochs, w);
  detail::read_key(j, "warmup", c.warmup, w);
  detail::read_key(j, "warmup_fraction", c.warmup_fraction, w);
  detail::read_key(j, "cosine", c.cosine, w);
  detail::read_key(j, "patience", c.patience, w);
  detail::read_key(j, "seed", c.seed, w);
  if (j.contains("weights")) c.weights = loss_weights_from_json(j.at("weights"), c.weights);
  if (j.contains("adamw")) {
    const auto& a = j.at("adamw");
    detail::reject_unknown(a, {"beta1", "beta2", "epsilon", "weight_decay"}, "train.adamw");
    detail::read_key(a, "beta1", c.adamw.beta1, "train.adamw");
    detail::read_key(a, "beta2", c.adamw.beta2, "train.adamw");
    detail::read_key(a, "epsilon", c.adamw.epsilon, "train.adamw");
    detail::read_key(a, "weight_decay", c.adamw.weight_decay, "train.adamw");
  }
  detail::read_key(j, "noisy_training", c.noisy_training, w);
  detail::read_key(j, "validation_rates", c.validation_rates, w);
  detail::read_key(j, "validation_seed", c.validation_seed, w);
  if (c.batch_size == 0 || c.epochs == 0 || !(c.learning_rate > 0.0)) {
    throw ConfigError("train: batch_size, epochs and learning_rate must be positive");
  }
  if (c.validation_rates.empty()) throw ConfigError("train: validation_rates is empty");
  for (double r : c.validation_rates)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("train: validation rate outside [0, 1]");
  return c;
}

inline json to_json(const SyntheticSpec& s) {
  return {{"split_sizes", s.split_sizes}, {"dims", s.dims},
          {"lengths", s.lengths},         {"scheme", scheme_name(s.scheme)},
          {"snr", s.snr},                 {"distractor_scale", s.distractor_scale},
          {"seed", s.seed}};
}

inline SyntheticSpec synthetic_spec_from_json(const json& j, SyntheticSpec s = {}) {
  const std::string w = "synthetic";
  detail::reject_unknown(
      j, {"split_sizes", "dims", "lengths", "scheme", "snr", "distractor_scale", "seed"}, w);
  detail::read_key(j, "split_sizes", s.split_sizes, w);
  detail::read_key(j, "dims", s.dims, w);
  detail::read_key(j, "lengths", s.lengths, w);
  if (j.contains("scheme")) s.scheme = parse_scheme(j.at("scheme").get<std::string>());
  detail::read_key(j, "snr", s.snr, w);
  detail::read_key(j, "distractor_scale", s.distractor_scale, w);
  detail::read_key(j, "seed", s.seed, w);
  return s;
}

inline json to_json(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"output_dir", c.output_dir},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"loss_profile", c.loss_profile},
          {"seeds", c.seeds},
          {"sweep_rates", c.sweep_rates},
          {"eval_batch_size", c.eval_batch_size},
          {"precision", precision_name(c.precision)},
          {"synthetic", to_json(c.synthetic)}};
}

/// Resolves the loss profile into train.weights unless it is "custom".
inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  const std::string w = "config";
  detail::reject_unknown(j,
                         {"dataset", "output_dir", "model", "train", "loss_profile", "seeds",
                          "sweep_rates", "eval_batch_size", "precision", "synthetic"},
                         w);
  detail::read_key(j, "dataset", c.dataset, w);
  detail::read_key(j, "output_dir", c.output_dir, w);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  detail::read_key(j, "loss_profile", c.loss_profile, w);
  detail::read_key(j, "seeds", c.seeds, w);
  detail::read_key(j, "sweep_rates", c.sweep_rates, w);
  detail::read_key(j, "eval_batch_size", c.eval_batch_size, w);
  if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
  if (j.contains("synthetic")) c.synthetic = synthetic_spec_from_json(j.at("synthetic"));
  if (c.loss_profile != "custom") {
    try {
      c.train.weights = loss_weight_preset(c.loss_profile);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (c.seeds.empty()) throw ConfigError("config: seeds is empty");
  if (c.sweep_rates.empty()) throw ConfigError("config: sweep_rates is empty");
  for (double r : c.sweep_rates)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("config: sweep rate outside [0, 1]");
  if (c.eval_batch_size == 0) throw ConfigError("config: eval_batch_size must be positive");
  return c;
}

// ---------------------------------------------------------------------------
// Overrides

/// Parses the right-hand side of key=value: JSON if it parses, else a string.
inline json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

/// Applies "a.b.c=value" to `j`, creating intermediate objects.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = parse_override_value(assignment.substr(eq + 1));
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  os << j.dump(2) << '\n';
  if (!os) throw ConfigError("write failed for '" + path + "'");
}

/// Config file (optional) plus overrides, then validation.
inline RunConfig resolve_run_config(const std::string& path,
                                    const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    j = read_json_file(path);
    // A manifest embeds the resolved config under "config".
    if (j.contains("manifest_version") && j.contains("config")) j = j.at("config");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

/// Everything needed to re-run a CLI invocation.
inline json make_manifest(const std::string& command, const json& resolved_config,
                          const json& arguments) {
  return {{"manifest_version", 1},
          {"artifact", "lnln"},
          {"artifact_version", kArtifactVersion},
          {"command", command},
          {"arguments", arguments},
          {"config", resolved_config}};
}

}  // namespace lnln
