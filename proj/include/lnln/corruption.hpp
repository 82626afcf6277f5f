#pragma once

// Random data missing: erase a fixed fraction of sequence positions per
// modality and fill them (zeros for visual/audio, a designated unknown vector
// for language).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lnln/random.hpp"
#include "lnln/types.hpp"

namespace lnln {

/// Upper end of the per-sample missing rate drawn during noisy training.
inline constexpr double kMaxTrainingRate = 0.9;

/// Half-away-from-zero rounding of rate * length. Products that land within
/// 1e-9 of a .5 boundary are treated as exact halves so that decimal rates
/// such as 0.1 * 5 round the same on every platform.
inline std::size_t erased_count(std::size_t length, double rate) {
  const double x = rate * static_cast<double>(length);
  const double base = std::floor(x);
  const double frac = x - base;
  if (std::abs(frac - 0.5) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(base) + 1;
  return static_cast<std::size_t>(std::llround(x));
}

struct MissingMask {
  Modality modality = Modality::Language;
  std::vector<std::uint8_t> erased;  // 1 = erased
  double rate = 0.0;                 // requested rate

  std::size_t length() const noexcept { return erased.size(); }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(erased.begin(), erased.end(), std::uint8_t{1}));
  }
  double realized_rate() const noexcept {
    return erased.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(length());
  }
};

/// Erases exactly erased_count(length, rate) positions, uniformly without replacement.
inline MissingMask make_mask(std::size_t length, double rate, Rng& rng,
                             Modality modality = Modality::Language) {
  if (length == 0) throw std::invalid_argument("make_mask: sequence length must be positive");
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("make_mask: rate " + std::to_string(rate) +
                                " outside [0, 1]");
  }
  MissingMask mask{modality, std::vector<std::uint8_t>(length, 0), rate};
  const std::size_t k = erased_count(length, rate);
  std::vector<std::size_t> order(length);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(length - i));
    std::swap(order[i], order[j]);
    mask.erased[order[i]] = 1;
  }
  return mask;
}

/// What an erased row is replaced with.
struct FillPolicy {
  std::vector<float> fill;  // empty means zeros

  static FillPolicy zeros() { return {}; }
  static FillPolicy constant(std::vector<float> v) { return FillPolicy{std::move(v)}; }
};

inline Tensor<float> apply_missing(const Tensor<float>& clean, const MissingMask& mask,
                                   const FillPolicy& policy) {
  if (clean.rank() != 2 || clean.dim(0) != mask.length()) {
    throw ShapeError("apply_missing: sequence " + to_string(clean.shape()) +
                     " does not match mask length " + std::to_string(mask.length()));
  }
  const std::size_t width = clean.dim(1);
  if (!policy.fill.empty() && policy.fill.size() != width) {
    throw ShapeError("apply_missing: fill vector width " + std::to_string(policy.fill.size()) +
                     " != feature width " + std::to_string(width));
  }
  Tensor<float> out = clean;
  for (std::size_t t = 0; t < mask.length(); ++t) {
    if (!mask.erased[t]) continue;
    float* row = out.data().data() + t * width;
    if (policy.fill.empty()) {
      std::fill(row, row + width, 0.0f);
    } else {
      std::copy(policy.fill.begin(), policy.fill.end(), row);
    }
  }
  return out;
}

/// Fraction of the language sequence that survived.
inline double completeness_label(const MissingMask& language_mask) {
  const double n = static_cast<double>(language_mask.length());
  return 1.0 - static_cast<double>(language_mask.count()) / n;
}

struct CorruptionRecord {
  std::array<MissingMask, kNumModalities> masks;
  ModalityBundle corrupted;
  double completeness = 1.0;
};

using ModalityRates = std::array<double, kNumModalities>;

inline ModalityRates shared_rate(double r) { return {r, r, r}; }

/// Independent masks per modality; `unknown` fills erased language rows
/// (zeros when empty), visual and audio rows are zero-filled.
inline CorruptionRecord corrupt_sample(const ModalityBundle& sample, const ModalityRates& rates,
                                       Rng& rng, const std::vector<float>& unknown) {
  CorruptionRecord rec;
  rec.corrupted.label = sample.label;
  for (Modality m : kModalities) {
    const auto i = index_of(m);
    rec.masks[i] = make_mask(sample.features[i].dim(0), rates[i], rng, m);
    const FillPolicy policy =
        m == Modality::Language ? FillPolicy::constant(unknown) : FillPolicy::zeros();
    rec.corrupted.features[i] = apply_missing(sample.features[i], rec.masks[i], policy);
  }
  rec.completeness = completeness_label(rec.masks[index_of(Modality::Language)]);
  return rec;
}

/// Noisy-training rate: one shared rate per sample, uniform on [0, 0.9].
inline double draw_training_rate(Rng& rng) { return rng.uniform(0.0, kMaxTrainingRate); }

}  // namespace lnln
