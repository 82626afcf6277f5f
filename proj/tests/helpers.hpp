#pragma once

#include <vector>

#include "lnln/batch.hpp"
#include "lnln/dataset.hpp"
#include "lnln/model.hpp"

namespace lnln::test {

inline ModelConfig tiny_config(std::array<std::size_t, 3> dims = {6, 5, 4}) {
  ModelConfig c;
  c.token_len = 4;
  c.width = 8;
  c.heads = 2;
  c.ffn_mult = 2;
  c.fusion_layers = 2;
  c.feature_dims = dims;
  return c;
}

inline SyntheticSpec tiny_spec() {
  SyntheticSpec s;
  s.split_sizes = {40, 12, 16};
  s.dims = {6, 5, 4};
  s.lengths = {7, 6, 5};
  return s;
}

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor<Scalar> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(scale * rng.normal());
  return t;
}

template <typename Scalar>
Batch<Scalar> batch_of(const std::vector<ModalityBundle>& samples, double rate,
                       const std::vector<float>& unknown, std::uint64_t seed = 5) {
  std::vector<const ModalityBundle*> clean;
  std::vector<CorruptionRecord> recs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    clean.push_back(&samples[i]);
    recs.push_back(corrupt_for_eval(samples[i], i, shared_rate(rate), seed, unknown));
  }
  return make_batch<Scalar>(clean, recs);
}

}  // namespace lnln::test
