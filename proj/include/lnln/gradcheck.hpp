#pragma once

// Finite-difference gradient suite over every primitive, the composite
// blocks and the complete weighted training objective.

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lnln/batch.hpp"
#include "lnln/model.hpp"
#include "lnln/nn.hpp"
#include "lnln/training.hpp"

namespace lnln {

struct GradCheckEntry {
  std::string name;
  double max_error = 0.0;
};

namespace detail {

inline Tensor<double> random_tensor(Rng& rng, const Shape& shape, double scale = 1.0) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

/// Values bounded away from 0 so relu kinks are not straddled by the probe.
inline Tensor<double> kink_free_tensor(Rng& rng, const Shape& shape) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = 0.2 + rng.uniform();
    t[i] = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

/// sum(f(x) * R) for a fixed random R: every output coordinate matters.
inline Var<double> weighted_sum(const Var<double>& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, Var<double>::constant(random_tensor(rng, y.shape()))));
}

}  // namespace detail

/// Max relative error per primitive, each probed at every coordinate.
inline std::vector<GradCheckEntry> primitive_grad_checks(std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<GradCheckEntry> out;
  auto check = [&](const std::string& name, std::vector<Tensor<double>> point,
                   std::function<Var<double>(const std::vector<Var<double>>&)> f) {
    const std::uint64_t wseed = rng.below(1u << 30);
    out.push_back({name, grad_check_at(
                             [&](const std::vector<Var<double>>& v) {
                               return detail::weighted_sum(f(v), wseed);
                             },
                             point)});
  };
  using V = std::vector<Var<double>>;
  auto R = [&](Shape s) { return detail::random_tensor(rng, std::move(s)); };

  check("matmul", {R({3, 4}), R({4, 5})}, [](const V& v) { return matmul(v[0], v[1]); });
  check("matmul(batched lhs)", {R({2, 3, 4}), R({4, 2})},
        [](const V& v) { return matmul(v[0], v[1]); });
  check("matmul(batched)", {R({2, 3, 4}), R({2, 4, 3})},
        [](const V& v) { return matmul(v[0], v[1]); });
  check("transpose", {R({2, 3, 4})}, [](const V& v) { return transpose(v[0]); });
  check("add(broadcast)", {R({2, 3, 4}), R({4})}, [](const V& v) { return add(v[0], v[1]); });
  check("sub(broadcast)", {R({2, 1, 4}), R({3, 1})}, [](const V& v) { return sub(v[0], v[1]); });
  check("mul(broadcast)", {R({2, 3, 4}), R({2, 1, 1})},
        [](const V& v) { return mul(v[0], v[1]); });
  check("broadcast_to", {R({1, 3})}, [](const V& v) { return broadcast_to(v[0], Shape{4, 3}); });
  check("concat", {R({2, 3, 4}), R({2, 1, 4})}, [](const V& v) { return concat(V{v[0], v[1]}, 1); });
  check("slice", {R({2, 5, 3})}, [](const V& v) { return slice(v[0], 1, 1, 4); });
  check("mean", {R({2, 5, 3})}, [](const V& v) { return mean(v[0], 1); });
  check("sum", {R({3, 4})}, [](const V& v) { return sum(v[0]); });
  check("reshape", {R({2, 6})}, [](const V& v) { return reshape(v[0], Shape{3, 4}); });
  check("softmax", {R({2, 3, 5})}, [](const V& v) { return softmax(v[0]); });
  check("layer_norm", {R({2, 3, 6})}, [](const V& v) { return layer_norm(v[0]); });
  check("relu", {detail::kink_free_tensor(rng, {3, 5})}, [](const V& v) { return relu(v[0]); });
  check("sigmoid", {R({3, 5})}, [](const V& v) { return sigmoid(v[0]); });
  check("softplus", {R({3, 5})}, [](const V& v) { return softplus(v[0]); });
  check("square", {R({3, 5})}, [](const V& v) { return square(v[0]); });
  check("scale", {R({3, 5})}, [](const V& v) { return scale(v[0], 0.37); });

  {
    ParamStore<double> store;
    Rng init(seed + 1);
    const BlockDims dims{8, 2, 16};
    auto mha = MhaParams<double>::create(store, "mha", dims, init);
    auto enc = EncoderLayer<double>::create(store, "enc", dims, init);
    auto cross = CrossLayer<double>::create(store, "cross", dims, init);
    const auto q = Var<double>::constant(R({2, 3, 8}));
    const auto kv = Var<double>::constant(R({2, 4, 8}));
    auto block = [&](const std::string& name, std::function<Var<double>()> f) {
      const std::uint64_t wseed = rng.below(1u << 30);
      store.zero_grad();
      out.push_back({name, grad_check(store.leaves(), [&]() { return detail::weighted_sum(f(), wseed); })});
    };
    block("multi_head_attention", [&]() { return multi_head_attention(q, kv, mha); });
    block("encoder_layer", [&]() { return enc(q); });
    block("cross_layer", [&]() { return cross(q, kv); });
  }
  return out;
}

struct ModelGradCheckOptions {
  std::size_t token_len = 4;
  std::size_t width = 16;
  std::size_t heads = 4;
  std::size_t batch = 2;
  std::array<std::size_t, kNumModalities> feature_dims = {12, 6, 4};
  std::array<std::size_t, kNumModalities> lengths = {5, 6, 4};
  /// Coordinates probed per leaf; 0 probes every coordinate.
  std::size_t coords_per_leaf = 16;
  double epsilon = 1e-5;
  double jitter = 0.05;
  std::uint64_t seed = 11;
  LossWeights weights = LossWeights::mosi();
};

/// Relative error of d(total loss)/d(theta) over all model leaves. The
/// gradient reversal and the language-branch detach are replaced by identity so
/// that the analytic gradient is the true derivative of the scalar objective.
inline GradCheckEntry model_grad_check(const ModelGradCheckOptions& o = {}) {
  ModelConfig cfg;
  cfg.token_len = o.token_len;
  cfg.width = o.width;
  cfg.heads = o.heads;
  cfg.feature_dims = o.feature_dims;
  cfg.init_seed = o.seed;
  LnlnModel<double> model(cfg);
  Rng rng(o.seed + 1);
  // Zero biases map erased (all-zero) rows exactly onto relu kinks; probe a
  // generic point instead of the initialization.
  for (auto& e : model.params().entries()) {
    auto& v = e.var.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.jitter * rng.normal();
  }
  std::vector<float> unknown(o.feature_dims[0], 0.5f);
  std::vector<ModalityBundle> samples(o.batch);
  for (auto& s : samples) {
    s.label = static_cast<float>(rng.uniform(-3.0, 3.0));
    for (Modality m : kModalities) {
      Tensor<float> f(Shape{o.lengths[index_of(m)], o.feature_dims[index_of(m)]});
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(rng.normal());
      s.features[index_of(m)] = std::move(f);
    }
  }
  std::vector<const ModalityBundle*> clean;
  std::vector<CorruptionRecord> recs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    clean.push_back(&samples[i]);
    recs.push_back(corrupt_for_eval(samples[i], i, shared_rate(0.4), o.seed, unknown));
  }
  const auto batch = make_batch<double>(clean, recs);
  ForwardOptions fo;
  fo.reverse_gradient = false;
  fo.detach_language = false;
  auto objective = [&]() {
    return total_loss(loss_components(model.forward(batch.corrupted, fo), batch), o.weights);
  };
  return {"full objective",
          grad_check(model.params().leaves(), objective,
                     GradCheckOptions{o.epsilon, o.coords_per_leaf, o.seed})};
}

}  // namespace lnln
