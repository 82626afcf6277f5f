#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lnln/tensor.hpp"

namespace lnln {

enum class Modality : std::size_t { Language = 0, Visual = 1, Audio = 2 };

inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kModalities = {
    Modality::Language, Modality::Visual, Modality::Audio};

constexpr std::size_t index_of(Modality m) noexcept { return static_cast<std::size_t>(m); }

constexpr std::string_view modality_tag(Modality m) noexcept {
  switch (m) {
    case Modality::Language: return "l";
    case Modality::Visual: return "v";
    case Modality::Audio: return "a";
  }
  return "?";
}

inline Modality parse_modality(std::string_view tag) {
  if (tag == "l" || tag == "language") return Modality::Language;
  if (tag == "v" || tag == "visual") return Modality::Visual;
  if (tag == "a" || tag == "audio") return Modality::Audio;
  throw std::invalid_argument("unknown modality '" + std::string(tag) + "' (expected l, v or a)");
}

/// Sentiment label range: MOSI/MOSEI-like [-3, 3] or SIMS-like [-1, 1].
enum class LabelScheme { Mosi, Sims };

constexpr double scheme_bound(LabelScheme s) noexcept { return s == LabelScheme::Mosi ? 3.0 : 1.0; }

constexpr std::string_view scheme_name(LabelScheme s) noexcept {
  return s == LabelScheme::Mosi ? "mosi" : "sims";
}

inline LabelScheme parse_scheme(std::string_view name) {
  if (name == "mosi" || name == "MOSI" || name == "mosei") return LabelScheme::Mosi;
  if (name == "sims" || name == "SIMS") return LabelScheme::Sims;
  throw std::invalid_argument("unknown label scheme '" + std::string(name) + "'");
}

/// One sample: a [T_m, d_m] feature sequence per modality and its label.
struct ModalityBundle {
  std::array<Tensor<float>, kNumModalities> features;
  float label = 0.0f;

  const Tensor<float>& operator[](Modality m) const { return features[index_of(m)]; }
  Tensor<float>& operator[](Modality m) { return features[index_of(m)]; }
};

}  // namespace lnln
