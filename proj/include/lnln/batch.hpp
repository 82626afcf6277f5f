#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lnln/autodiff.hpp"
#include "lnln/corruption.hpp"
#include "lnln/random.hpp"
#include "lnln/types.hpp"

namespace lnln {

/// Stacks equally shaped [T, d] float matrices into a [B, T, d] tensor.
template <typename Scalar>
Tensor<Scalar> stack_sequences(const std::vector<const Tensor<float>*>& rows) {
  if (rows.empty()) throw ShapeError("stack_sequences: empty batch");
  const Shape& s = rows.front()->shape();
  Tensor<Scalar> out(Shape{rows.size(), s.at(0), s.at(1)});
  Scalar* dst = out.data().data();
  for (const auto* r : rows) {
    if (r->shape() != s) throw ShapeError(detail::shapes_msg("stack_sequences", s, r->shape()));
    for (float v : r->data()) *dst++ = static_cast<Scalar>(v);
  }
  return out;
}

template <typename Scalar>
struct Batch {
  std::array<Var<Scalar>, kNumModalities> corrupted;  // U^1_m
  std::array<Var<Scalar>, kNumModalities> clean;      // U^0_m
  std::vector<double> labels;
  std::vector<double> completeness;  // w_hat
  std::size_t size() const noexcept { return labels.size(); }
};

template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<const ModalityBundle*>& clean,
                         const std::vector<CorruptionRecord>& records) {
  if (clean.size() != records.size() || clean.empty()) {
    throw std::invalid_argument("make_batch: need one corruption record per sample");
  }
  Batch<Scalar> b;
  for (Modality m : kModalities) {
    std::vector<const Tensor<float>*> c, u;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      c.push_back(&(*clean[i])[m]);
      u.push_back(&records[i].corrupted[m]);
    }
    b.clean[index_of(m)] = Var<Scalar>::constant(stack_sequences<Scalar>(c));
    b.corrupted[index_of(m)] = Var<Scalar>::constant(stack_sequences<Scalar>(u));
  }
  for (std::size_t i = 0; i < clean.size(); ++i) {
    b.labels.push_back(clean[i]->label);
    b.completeness.push_back(records[i].completeness);
  }
  return b;
}

/// Seed for evaluation corruption of one sample, independent of order.
inline std::uint64_t eval_corruption_seed(std::uint64_t base, const ModalityRates& rates,
                                          std::size_t sample_index) {
  std::uint64_t key = 0;
  for (double r : rates) key = mix64(key ^ static_cast<std::uint64_t>(std::llround(r * 1e6)));
  return derive_seed(base, key, sample_index);
}

inline CorruptionRecord corrupt_for_eval(const ModalityBundle& sample, std::size_t index,
                                         const ModalityRates& rates, std::uint64_t seed,
                                         const std::vector<float>& unknown) {
  Rng rng(eval_corruption_seed(seed, rates, index));
  return corrupt_sample(sample, rates, rng, unknown);
}

}  // namespace lnln
