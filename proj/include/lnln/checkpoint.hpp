#pragma once

// Checkpoint persistence. Layout (little-endian):
//   magic "LNLNCKPT", u32 version, u32 config length, config JSON,
//   u64 leaf count, per leaf {u32 name length, name, u32 rank, u64 extents,
//   f64 values}, u8 has-optimizer, [u64 step, per leaf f64 m then f64 v],
//   u32 annotation length, annotation JSON.
// Values are stored as f64, so f32 and f64 parameters round-trip exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lnln/config.hpp"
#include "lnln/dataset.hpp"
#include "lnln/model.hpp"
#include "lnln/training.hpp"

namespace lnln {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'L', 'N', 'L', 'N', 'C', 'K', 'P', 'T'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointLeaf {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const CheckpointLeaf&, const CheckpointLeaf&) = default;
};

struct CheckpointOptimizer {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  friend bool operator==(const CheckpointOptimizer&, const CheckpointOptimizer&) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  std::vector<CheckpointLeaf> leaves;
  std::optional<CheckpointOptimizer> optimizer;
  /// Best-metric annotations such as {"selected_by": "mae", "epoch": 12}.
  json annotations = json::object();

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.version == b.version && a.config == b.config && a.leaves == b.leaves &&
           a.optimizer == b.optimizer && a.annotations == b.annotations;
  }
};

namespace detail {

template <typename Scalar>
std::vector<double> to_f64(const Tensor<Scalar>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

template <typename Scalar>
Tensor<Scalar> from_f64(const Shape& shape, const std::vector<double>& v) {
  Tensor<Scalar> t(shape);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<Scalar>(v[i]);
  return t;
}

inline void write_string(Writer& w, const std::string& s) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  w.bytes(s.data(), s.size());
}

inline std::string read_string(Reader& r, std::size_t limit) {
  const std::size_t n = r.get<std::uint32_t>();
  if (n > limit) throw CheckpointError("checkpoint: implausible string length " + std::to_string(n));
  std::string s(n, '\0');
  r.bytes(s.data(), n);
  return s;
}

/// Architecture fields that determine the parameter layout.
inline bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  return a.token_len == b.token_len && a.width == b.width && a.heads == b.heads &&
         a.ffn_mult == b.ffn_mult && a.fusion_layers == b.fusion_layers &&
         a.feature_dims == b.feature_dims && a.use_dmc == b.use_dmc &&
         a.use_reconstructor == b.use_reconstructor;
}

}  // namespace detail

template <typename Scalar>
Checkpoint make_checkpoint(const LnlnModel<Scalar>& model,
                           const AdamWState<Scalar>* optimizer = nullptr,
                           json annotations = json::object()) {
  Checkpoint ck;
  ck.config = model.config();
  for (const auto& e : model.params().entries()) {
    ck.leaves.push_back({e.name, e.var.shape(), detail::to_f64(e.var.value())});
  }
  if (optimizer && optimizer->step > 0) {
    CheckpointOptimizer o;
    o.step = optimizer->step;
    for (const auto& m : optimizer->first_moment) o.first_moment.push_back(detail::to_f64(m));
    for (const auto& v : optimizer->second_moment) o.second_moment.push_back(detail::to_f64(v));
    ck.optimizer = std::move(o);
  }
  ck.annotations = std::move(annotations);
  return ck;
}

/// Copies checkpoint parameters into `model`. Rejects a different
/// architecture, or any leaf whose name or shape does not line up.
template <typename Scalar>
void load_parameters(const Checkpoint& ck, LnlnModel<Scalar>& model) {
  if (!detail::same_architecture(ck.config, model.config())) {
    throw CheckpointError("checkpoint: architecture " + to_json(ck.config).dump() +
                          " does not match model " + to_json(model.config()).dump());
  }
  auto& entries = model.params().entries();
  if (entries.size() != ck.leaves.size()) {
    throw CheckpointError("checkpoint: " + std::to_string(ck.leaves.size()) +
                          " leaves, model has " + std::to_string(entries.size()));
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& leaf = ck.leaves[k];
    if (leaf.name != entries[k].name) {
      throw CheckpointError("checkpoint: leaf " + std::to_string(k) + " is '" + leaf.name +
                            "', model expects '" + entries[k].name + "'");
    }
    if (leaf.shape != entries[k].var.shape()) {
      throw CheckpointError("checkpoint: leaf '" + leaf.name + "' has shape " +
                            to_string(leaf.shape) + ", model expects " +
                            to_string(entries[k].var.shape()));
    }
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    entries[k].var.mutable_value() = detail::from_f64<Scalar>(ck.leaves[k].shape, ck.leaves[k].values);
  }
}

template <typename Scalar>
AdamWState<Scalar> load_optimizer(const Checkpoint& ck) {
  AdamWState<Scalar> s;
  if (!ck.optimizer) return s;
  s.step = ck.optimizer->step;
  for (std::size_t k = 0; k < ck.leaves.size(); ++k) {
    s.first_moment.push_back(detail::from_f64<Scalar>(ck.leaves[k].shape, ck.optimizer->first_moment.at(k)));
    s.second_moment.push_back(detail::from_f64<Scalar>(ck.leaves[k].shape, ck.optimizer->second_moment.at(k)));
  }
  return s;
}

template <typename Scalar>
LnlnModel<Scalar> model_from_checkpoint(const Checkpoint& ck) {
  LnlnModel<Scalar> model(ck.config);
  load_parameters(ck, model);
  return model;
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  detail::Writer w(os);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(ck.version);
  detail::write_string(w, to_json(ck.config).dump());
  w.put<std::uint64_t>(ck.leaves.size());
  for (const auto& leaf : ck.leaves) {
    if (leaf.values.size() != shape_size(leaf.shape)) {
      throw CheckpointError("checkpoint: leaf '" + leaf.name + "' value count does not match shape");
    }
    detail::write_string(w, leaf.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(leaf.shape.size()));
    for (auto e : leaf.shape) w.put<std::uint64_t>(e);
    w.bytes(leaf.values.data(), leaf.values.size() * sizeof(double));
  }
  w.put<std::uint8_t>(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    w.put<std::uint64_t>(ck.optimizer->step);
    for (std::size_t k = 0; k < ck.leaves.size(); ++k) {
      const auto& m = ck.optimizer->first_moment.at(k);
      const auto& v = ck.optimizer->second_moment.at(k);
      w.bytes(m.data(), m.size() * sizeof(double));
      w.bytes(v.data(), v.size() * sizeof(double));
    }
  }
  detail::write_string(w, ck.annotations.dump());
  if (!os) throw CheckpointError("checkpoint: stream write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  detail::Reader r(is, "checkpoint");
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint: bad magic, not an LNLN checkpoint file");
  }
  Checkpoint ck;
  ck.version = r.get<std::uint32_t>();
  if (ck.version != kCheckpointVersion) {
    throw VersionError("checkpoint: format version " + std::to_string(ck.version) +
                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  constexpr std::size_t kMaxText = std::size_t{1} << 24;
  try {
    ck.config = model_config_from_json(json::parse(detail::read_string(r, kMaxText)));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad config record: ") + e.what());
  }
  const auto n = r.get<std::uint64_t>();
  if (n > (1u << 20)) throw FormatError("checkpoint: implausible leaf count " + std::to_string(n));
  for (std::uint64_t k = 0; k < n; ++k) {
    CheckpointLeaf leaf;
    leaf.name = detail::read_string(r, 4096);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw FormatError("checkpoint: leaf '" + leaf.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t i = 0; i < rank; ++i) leaf.shape.push_back(r.get<std::uint64_t>());
    leaf.values.resize(shape_size(leaf.shape));
    r.bytes(leaf.values.data(), leaf.values.size() * sizeof(double));
    ck.leaves.push_back(std::move(leaf));
  }
  const auto has_opt = r.get<std::uint8_t>();
  if (has_opt > 1) throw FormatError("checkpoint: bad optimizer flag");
  if (has_opt) {
    CheckpointOptimizer o;
    o.step = r.get<std::uint64_t>();
    for (const auto& leaf : ck.leaves) {
      std::vector<double> m(leaf.values.size()), v(leaf.values.size());
      r.bytes(m.data(), m.size() * sizeof(double));
      r.bytes(v.data(), v.size() * sizeof(double));
      o.first_moment.push_back(std::move(m));
      o.second_moment.push_back(std::move(v));
    }
    ck.optimizer = std::move(o);
  }
  try {
    ck.annotations = json::parse(detail::read_string(r, kMaxText));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad annotation record: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace lnln
