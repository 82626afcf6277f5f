#pragma once

// Dataset container: a versioned binary file plus a JSON-lines text export,
// and a synthetic language-dominant generator.
//
// Binary layout (little-endian):
//   "LNLNDATA"  u32 version  u32 scheme  u32 dims[3]  u32 lengths[3]
//   f32 unknown[d_l]  u64 split_sizes[3]
//   per sample: f32 label, then per modality u32 rows, u32 cols, f32 data[rows*cols]

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lnln/random.hpp"
#include "lnln/types.hpp"

namespace lnln {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FormatError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class VersionError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class TruncatedError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class ExtentError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

enum class Split : std::size_t { Train = 0, Validation = 1, Test = 2 };
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Validation, Split::Test};

constexpr std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "valid" || name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw FormatError("unknown split '" + std::string(name) + "'");
}

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr char kDatasetMagic[8] = {'L', 'N', 'L', 'N', 'D', 'A', 'T', 'A'};

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  LabelScheme scheme = LabelScheme::Mosi;
  std::array<std::size_t, kNumModalities> dims{};     // d_l, d_v, d_a
  std::array<std::size_t, kNumModalities> lengths{};  // T_l, T_v, T_a
  std::vector<float> unknown;                         // language fill, width d_l

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct DatasetContainer {
  DatasetHeader header;
  std::array<std::vector<ModalityBundle>, 3> splits;

  std::vector<ModalityBundle>& split(Split s) { return splits[static_cast<std::size_t>(s)]; }
  const std::vector<ModalityBundle>& split(Split s) const {
    return splits[static_cast<std::size_t>(s)];
  }

  /// Checks every sample against the header; names the first offending sample.
  void validate() const {
    if (!header.unknown.empty() && header.unknown.size() != header.dims[0]) {
      throw ExtentError("dataset header: unknown vector has width " +
                        std::to_string(header.unknown.size()) + ", expected d_l = " +
                        std::to_string(header.dims[0]));
    }
    const double bound = scheme_bound(header.scheme);
    for (Split s : kSplits) {
      const auto& samples = split(s);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        for (Modality m : kModalities) {
          const auto& f = samples[i][m];
          const auto k = index_of(m);
          if (f.rank() != 2 || f.dim(0) != header.lengths[k] || f.dim(1) != header.dims[k]) {
            throw ExtentError("sample " + std::to_string(i) + " of split " +
                              std::string(split_name(s)) + ": modality " +
                              std::string(modality_tag(m)) + " has extent " +
                              to_string(f.shape()) + ", header declares [" +
                              std::to_string(header.lengths[k]) + ", " +
                              std::to_string(header.dims[k]) + "]");
          }
        }
        const double y = samples[i].label;
        if (!(std::abs(y) <= bound)) {
          throw ExtentError("sample " + std::to_string(i) + " of split " +
                            std::string(split_name(s)) + ": label " + std::to_string(y) +
                            " outside [-" + std::to_string(bound) + ", " +
                            std::to_string(bound) + "]");
        }
      }
    }
  }

  friend bool operator==(const DatasetContainer& a, const DatasetContainer& b) {
    if (!(a.header == b.header)) return false;
    for (std::size_t s = 0; s < 3; ++s) {
      if (a.splits[s].size() != b.splits[s].size()) return false;
      for (std::size_t i = 0; i < a.splits[s].size(); ++i) {
        const auto& x = a.splits[s][i];
        const auto& y = b.splits[s][i];
        if (std::memcmp(&x.label, &y.label, sizeof(float)) != 0) return false;
        for (std::size_t m = 0; m < kNumModalities; ++m)
          if (!bit_identical(x.features[m], y.features[m])) return false;
      }
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Binary I/O

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), n); }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}
  template <typename T>
  T get() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw TruncatedError(what_ + ": file is truncated");
    }
  }

 private:
  std::istream& is_;
  std::string what_;
};

}  // namespace detail

inline void write_dataset(std::ostream& os, const DatasetContainer& data) {
  data.validate();
  detail::Writer w(os);
  w.bytes(kDatasetMagic, sizeof(kDatasetMagic));
  w.put<std::uint32_t>(data.header.version);
  w.put<std::uint32_t>(data.header.scheme == LabelScheme::Mosi ? 0u : 1u);
  for (auto d : data.header.dims) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  for (auto t : data.header.lengths) w.put<std::uint32_t>(static_cast<std::uint32_t>(t));
  std::vector<float> unknown = data.header.unknown;
  unknown.resize(data.header.dims[0], 0.0f);
  w.bytes(unknown.data(), unknown.size() * sizeof(float));
  for (Split s : kSplits) w.put<std::uint64_t>(data.split(s).size());
  for (Split s : kSplits) {
    for (const auto& sample : data.split(s)) {
      w.put<float>(sample.label);
      for (const auto& f : sample.features) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(f.dim(0)));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(f.dim(1)));
        w.bytes(f.data().data(), f.size() * sizeof(float));
      }
    }
  }
  if (!os) throw DatasetError("write_dataset: stream write failed");
}

inline DatasetContainer read_dataset(std::istream& is) {
  detail::Reader r(is, "dataset");
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
    throw FormatError("dataset: bad magic, not an LNLN dataset file");
  }
  DatasetContainer data;
  data.header.version = r.get<std::uint32_t>();
  if (data.header.version != kDatasetVersion) {
    throw VersionError("dataset: format version " + std::to_string(data.header.version) +
                       " is not supported (expected " + std::to_string(kDatasetVersion) + ")");
  }
  const auto scheme = r.get<std::uint32_t>();
  if (scheme > 1) throw FormatError("dataset: unknown label scheme code " + std::to_string(scheme));
  data.header.scheme = scheme == 0 ? LabelScheme::Mosi : LabelScheme::Sims;
  for (auto& d : data.header.dims) d = r.get<std::uint32_t>();
  for (auto& t : data.header.lengths) t = r.get<std::uint32_t>();
  data.header.unknown.resize(data.header.dims[0]);
  r.bytes(data.header.unknown.data(), data.header.unknown.size() * sizeof(float));
  std::array<std::uint64_t, 3> sizes{};
  for (auto& n : sizes) n = r.get<std::uint64_t>();
  for (Split s : kSplits) {
    auto& samples = data.split(s);
    const auto n = sizes[static_cast<std::size_t>(s)];
    samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      ModalityBundle b;
      b.label = r.get<float>();
      for (Modality m : kModalities) {
        const std::size_t rows = r.get<std::uint32_t>();
        const std::size_t cols = r.get<std::uint32_t>();
        const auto k = index_of(m);
        if (rows != data.header.lengths[k] || cols != data.header.dims[k]) {
          throw ExtentError("sample " + std::to_string(i) + " of split " +
                            std::string(split_name(s)) + ": modality " +
                            std::string(modality_tag(m)) + " has extent [" +
                            std::to_string(rows) + ", " + std::to_string(cols) +
                            "], header declares [" + std::to_string(data.header.lengths[k]) +
                            ", " + std::to_string(data.header.dims[k]) + "]");
        }
        Tensor<float> f(Shape{rows, cols});
        r.bytes(f.data().data(), f.size() * sizeof(float));
        b.features[k] = std::move(f);
      }
      samples.push_back(std::move(b));
    }
  }
  data.validate();
  return data;
}

inline void save_dataset(const DatasetContainer& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DatasetError("cannot open '" + path + "' for writing");
  write_dataset(os, data);
}

inline DatasetContainer load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("cannot open dataset '" + path + "'");
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// Text export: one JSON header line, then one JSON record per sample with
// nested row arrays under "l", "v", "a".

inline void write_dataset_text(std::ostream& os, const DatasetContainer& data) {
  data.validate();
  nlohmann::json header = {
      {"format", "lnln-dataset-text"},
      {"version", data.header.version},
      {"scheme", std::string(scheme_name(data.header.scheme))},
      {"dims", data.header.dims},
      {"lengths", data.header.lengths},
      {"unknown", data.header.unknown},
  };
  os << header.dump() << '\n';
  for (Split s : kSplits) {
    for (const auto& sample : data.split(s)) {
      nlohmann::json rec = {{"split", std::string(split_name(s))}, {"label", sample.label}};
      for (Modality m : kModalities) {
        const auto& f = sample[m];
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t t = 0; t < f.dim(0); ++t) {
          rows.push_back(std::vector<float>(f.data().begin() + t * f.dim(1),
                                            f.data().begin() + (t + 1) * f.dim(1)));
        }
        rec[std::string(modality_tag(m))] = std::move(rows);
      }
      os << rec.dump() << '\n';
    }
  }
}

inline DatasetContainer read_dataset_text(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw TruncatedError("dataset text: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset text: unreadable header: ") + e.what());
  }
  if (header.value("format", "") != "lnln-dataset-text") {
    throw FormatError("dataset text: header lacks format tag 'lnln-dataset-text'");
  }
  DatasetContainer data;
  data.header.version = header.at("version").get<std::uint32_t>();
  if (data.header.version != kDatasetVersion) {
    throw VersionError("dataset text: version " + std::to_string(data.header.version) +
                       " is not supported");
  }
  data.header.scheme = parse_scheme(header.at("scheme").get<std::string>());
  data.header.dims = header.at("dims").get<std::array<std::size_t, 3>>();
  data.header.lengths = header.at("lengths").get<std::array<std::size_t, 3>>();
  data.header.unknown = header.at("unknown").get<std::vector<float>>();
  std::array<std::size_t, 3> counters{};
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("dataset text: unreadable record: ") + e.what());
    }
    const Split s = parse_split(rec.at("split").get<std::string>());
    const std::size_t index = counters[static_cast<std::size_t>(s)]++;
    ModalityBundle b;
    b.label = rec.at("label").get<float>();
    for (Modality m : kModalities) {
      const auto rows = rec.at(std::string(modality_tag(m))).get<std::vector<std::vector<float>>>();
      const std::size_t cols = rows.empty() ? 0 : rows.front().size();
      std::vector<float> flat;
      for (const auto& row : rows) {
        if (row.size() != cols || cols != data.header.dims[index_of(m)]) {
          throw ExtentError("sample " + std::to_string(index) + " of split " +
                            std::string(split_name(s)) + ": modality " +
                            std::string(modality_tag(m)) + " has a " +
                            std::to_string(row.size()) + "-wide row, header declares width " +
                            std::to_string(data.header.dims[index_of(m)]));
        }
        flat.insert(flat.end(), row.begin(), row.end());
      }
      b.features[index_of(m)] = Tensor<float>(Shape{rows.size(), cols}, std::move(flat));
    }
    data.split(s).push_back(std::move(b));
  }
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  std::array<std::size_t, 3> split_sizes = {2000, 300, 300};
  std::array<std::size_t, kNumModalities> dims = {20, 20, 20};
  std::array<std::size_t, kNumModalities> lengths = {16, 16, 16};
  LabelScheme scheme = LabelScheme::Mosi;
  /// Sequence-level signal-to-noise ratio per modality (l, v, a).
  std::array<double, kNumModalities> snr = {5.0, 1.0, 1.0};
  double distractor_scale = 1.0;
  std::uint64_t seed = 1111;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

namespace detail {

inline std::vector<double> random_unit(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

/// Unit vector orthogonal to `base` (Gram-Schmidt on a random draw).
inline std::vector<double> random_orthogonal_unit(Rng& rng, const std::vector<double>& base) {
  if (base.size() < 2) return random_unit(rng, base.size());
  auto v = random_unit(rng, base.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * base[i];
  double norm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] -= dot * base[i];
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace detail

/// Every row of modality m is  s * dir_m + z_m * distract_m + noise,  where
/// s = y / bound (bound = label range), z_m ~ N(0, 1) is a per-sample
/// nuisance along a direction orthogonal to dir_m, and the noise is
/// isotropic with per-coordinate deviation sigma_m chosen so that the
/// mean-pooled sequence has the requested signal-to-noise ratio along dir_m.
/// Rows are then rescaled to roughly unit per-coordinate variance.
inline DatasetContainer generate_synthetic(const SyntheticSpec& spec) {
  for (std::size_t k = 0; k < kNumModalities; ++k) {
    if (spec.dims[k] == 0 || spec.lengths[k] == 0) {
      throw std::invalid_argument("generate_synthetic: widths and lengths must be positive");
    }
    if (!(spec.snr[k] > 0.0)) throw std::invalid_argument("generate_synthetic: SNR must be positive");
  }
  if (spec.split_sizes[0] == 0 || spec.split_sizes[2] == 0) {
    throw std::invalid_argument("generate_synthetic: train and test splits must be non-empty");
  }
  Rng rng(spec.seed);
  DatasetContainer data;
  data.header.scheme = spec.scheme;
  data.header.dims = spec.dims;
  data.header.lengths = spec.lengths;
  {
    const auto u = detail::random_unit(rng, spec.dims[0]);
    data.header.unknown.assign(u.begin(), u.end());
  }
  const double bound = scheme_bound(spec.scheme);
  const double signal_sd = 1.0 / std::sqrt(3.0);  // sd of U[-1, 1]
  std::array<std::vector<double>, kNumModalities> dir, distract;
  std::array<double, kNumModalities> sigma{}, rescale{};
  for (std::size_t k = 0; k < kNumModalities; ++k) {
    dir[k] = detail::random_unit(rng, spec.dims[k]);
    distract[k] = detail::random_orthogonal_unit(rng, dir[k]);
    sigma[k] = signal_sd * std::sqrt(static_cast<double>(spec.lengths[k])) / spec.snr[k];
    const double total_var = sigma[k] * sigma[k] +
                             (signal_sd * signal_sd +
                              spec.distractor_scale * spec.distractor_scale) /
                                 static_cast<double>(spec.dims[k]);
    rescale[k] = 1.0 / std::sqrt(total_var);
  }
  for (Split s : kSplits) {
    auto& samples = data.split(s);
    const std::size_t n = spec.split_sizes[static_cast<std::size_t>(s)];
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ModalityBundle b;
      const double signal = rng.uniform(-1.0, 1.0);
      b.label = static_cast<float>(signal * bound);
      for (std::size_t k = 0; k < kNumModalities; ++k) {
        const double z = spec.distractor_scale * rng.normal();
        Tensor<float> f(Shape{spec.lengths[k], spec.dims[k]});
        for (std::size_t t = 0; t < spec.lengths[k]; ++t) {
          for (std::size_t j = 0; j < spec.dims[k]; ++j) {
            const double v = signal * dir[k][j] + z * distract[k][j] + sigma[k] * rng.normal();
            f.at(t, j) = static_cast<float>(rescale[k] * v);
          }
        }
        b.features[k] = std::move(f);
      }
      samples.push_back(std::move(b));
    }
  }
  return data;
}

}  // namespace lnln
