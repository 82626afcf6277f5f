#pragma once

// The language-dominated noise-resistant network: modality embedding,
// dominant modality correction (completeness check, proxy generation,
// adversarial discriminator), adaptive hyper-modality learning, fusion and
// the per-modality reconstructors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lnln/nn.hpp"
#include "lnln/types.hpp"

namespace lnln {

struct ModelConfig {
  std::size_t token_len = 8;  // T
  std::size_t width = 128;    // d
  std::size_t heads = 8;
  std::size_t ffn_mult = 4;
  std::size_t fusion_layers = 4;
  std::array<std::size_t, kNumModalities> feature_dims = {768, 20, 5};  // d_l, d_v, d_a
  double grl_lambda = 1.0;
  bool use_dmc = true;
  bool use_reconstructor = true;
  std::uint64_t init_seed = 1111;

  BlockDims block_dims() const { return BlockDims{width, heads, ffn_mult * width}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct CompletenessEstimator {
  LearnableToken<Scalar> token;  // H_cc
  std::array<EncoderLayer<Scalar>, 2> layers;
  Linear<Scalar> head;
};

template <typename Scalar>
struct ProxyGenerator {
  LearnableToken<Scalar> token;  // H_p^0
  std::array<EncoderLayer<Scalar>, 2> layers;
};

template <typename Scalar>
struct HyperLayer {
  LayerNormAffine<Scalar> query_norm;
  LayerNormAffine<Scalar> audio_norm;
  LayerNormAffine<Scalar> visual_norm;
  MhaParams<Scalar> audio_attn;
  MhaParams<Scalar> visual_attn;
};

template <typename Scalar>
struct Reconstructor {
  Linear<Scalar> input;  // d_m -> d
  std::array<EncoderLayer<Scalar>, 2> layers;
  Linear<Scalar> output;  // d -> d_m
};

template <typename Scalar>
struct ForwardOutputs {
  Var<Scalar> prediction;     // y_hat, [B]
  Var<Scalar> completeness;   // w, [B]
  Var<Scalar> language;       // H_l^1, [B, T, d]
  Var<Scalar> proxy;          // H_p^1
  Var<Scalar> corrected;      // H_d^1
  Var<Scalar> logit_proxy;    // discriminator on H_p^1, [B]
  Var<Scalar> logit_language; // discriminator on H_l^1, [B]
  std::array<Var<Scalar>, kNumModalities> reconstructions;  // [B, T_m, d_m]
};

struct ForwardOptions {
  /// Replaces the predicted completeness with a constant.
  std::optional<double> forced_completeness;
  /// When false the discriminator's proxy branch uses an identity in place of
  /// the gradient reversal (paired sign tests).
  bool reverse_gradient = true;
  /// When false the discriminator's language branch is not detached.
  bool detach_language = true;
};

/// H_d = (1 - w) * H_p + w * H_l with one w per sample.
template <typename Scalar>
Var<Scalar> correct_dominant(const Var<Scalar>& proxy, const Var<Scalar>& language,
                             const Var<Scalar>& w) {
  if (proxy.shape() != language.shape()) {
    throw ShapeError(detail::shapes_msg("correct_dominant", proxy.shape(), language.shape()));
  }
  Shape w_shape(proxy.shape().size(), 1);
  if (proxy.shape().size() == 3) {
    if (w.size() != proxy.shape()[0]) {
      throw ShapeError(detail::shapes_msg("correct_dominant", proxy.shape(), w.shape()));
    }
    w_shape[0] = proxy.shape()[0];
  } else if (w.size() != 1) {
    throw ShapeError(detail::shapes_msg("correct_dominant", proxy.shape(), w.shape()));
  }
  auto wb = reshape(w, w_shape);
  auto keep = sub(Var<Scalar>::constant(Tensor<Scalar>(w_shape, Scalar{1})), wb);
  return add(mul(keep, proxy), mul(wb, language));
}

template <typename Scalar>
class LnlnModel {
 public:
  explicit LnlnModel(ModelConfig config) : config_(std::move(config)) { build(); }

  LnlnModel(const LnlnModel&) = delete;
  LnlnModel& operator=(const LnlnModel&) = delete;
  LnlnModel(LnlnModel&&) = default;
  LnlnModel& operator=(LnlnModel&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  ParamStore<Scalar>& params() noexcept { return store_; }
  const ParamStore<Scalar>& params() const noexcept { return store_; }

  const EmbeddingEncoder<Scalar>& embedding(Modality m) const { return embed_[index_of(m)]; }
  EmbeddingEncoder<Scalar>& embedding(Modality m) { return embed_[index_of(m)]; }
  CompletenessEstimator<Scalar>& completeness_estimator() { return cc_; }
  ProxyGenerator<Scalar>& proxy_generator() { return proxy_; }
  Linear<Scalar>& discriminator_head() { return disc_head_; }
  std::array<EncoderLayer<Scalar>, 2>& ahl_encoders() { return ahl_; }
  std::array<HyperLayer<Scalar>, 3>& hyper_layers() { return hyper_; }
  LearnableToken<Scalar>& hyper_token() { return hyper_token_; }
  std::vector<CrossLayer<Scalar>>& fusion_layers() { return fusion_; }
  Reconstructor<Scalar>& reconstructor(Modality m) { return recon_[index_of(m)]; }

  /// Names of the proxy generator's leaves (theta_DFG), including its token.
  std::vector<std::string> proxy_generator_leaf_names() const {
    std::vector<std::string> names;
    for (const auto& e : store_.entries())
      if (e.name.rfind("dmc.proxy.", 0) == 0) names.push_back(e.name);
    return names;
  }

  Var<Scalar> embed(const Var<Scalar>& sequence, Modality m) const {
    return embed_[index_of(m)](sequence);
  }

  /// w in (0, 1) per sample: encoder over concat(H_cc, H_l), mean over the
  /// H_cc positions, affine head, sigmoid.
  Var<Scalar> completeness_check(const Var<Scalar>& language) const {
    require_dmc("completeness_check");
    check_feature("completeness_check", language);
    auto h = prepend_token(cc_.token, {language});
    for (const auto& layer : cc_.layers) h = layer(h);
    auto pooled = mean(slice(h, 1, 0, config_.token_len), 1);
    return reshape(sigmoid(cc_.head(pooled)), Shape{language.shape()[0]});
  }

  /// First T rows of the encoder over concat(H_p^0, H_a, H_v).
  Var<Scalar> generate_proxy(const Var<Scalar>& audio, const Var<Scalar>& visual) const {
    require_dmc("generate_proxy");
    check_feature("generate_proxy", audio);
    check_feature("generate_proxy", visual);
    auto h = prepend_token(proxy_.token, {audio, visual});
    for (const auto& layer : proxy_.layers) h = layer(h);
    return slice(h, 1, 0, config_.token_len);
  }

  /// Mean over positions, gradient reversal (when requested), affine logit.
  Var<Scalar> discriminate(const Var<Scalar>& feature, bool reverse) const {
    require_dmc("discriminate");
    check_feature("discriminate", feature);
    auto pooled = mean(feature, 1);
    if (reverse) pooled = gradient_reverse(pooled, static_cast<Scalar>(config_.grl_lambda));
    return reshape(disc_head_(pooled), Shape{feature.shape()[0]});
  }

  /// Returns (H_d^3, H_hyper^3). Hyper updates run at levels 1, 2, 3.
  std::pair<Var<Scalar>, Var<Scalar>> ahl_forward(const Var<Scalar>& corrected,
                                                  const Var<Scalar>& audio,
                                                  const Var<Scalar>& visual) const {
    check_feature("ahl_forward", corrected);
    check_feature("ahl_forward", audio);
    check_feature("ahl_forward", visual);
    const std::size_t batch = corrected.shape()[0];
    Var<Scalar> dominant = corrected;
    Var<Scalar> hyper = hyper_token_.expand(batch);
    for (std::size_t level = 0; level < hyper_.size(); ++level) {
      if (level > 0) dominant = ahl_[level - 1](dominant);
      const auto& hl = hyper_[level];
      auto query = hl.query_norm(dominant);
      hyper = add(hyper, multi_head_attention(query, hl.audio_norm(audio), hl.audio_attn));
      hyper = add(hyper, multi_head_attention(query, hl.visual_norm(visual), hl.visual_attn));
    }
    return {dominant, hyper};
  }

  /// Cross-transformer: query stream from H_d^3 attends into H_hyper^3;
  /// position 0 feeds the regression head.
  Var<Scalar> fuse_predict(const Var<Scalar>& dominant, const Var<Scalar>& hyper) const {
    check_feature("fuse_predict", dominant);
    check_feature("fuse_predict", hyper);
    Var<Scalar> q = dominant;
    for (const auto& layer : fusion_) q = layer(q, hyper);
    const std::size_t batch = dominant.shape()[0];
    auto first = reshape(slice(fusion_norm_(q), 1, 0, 1), Shape{batch, config_.width});
    return reshape(fusion_head_(first), Shape{batch});
  }

  Var<Scalar> reconstruct(const Var<Scalar>& corrupted, Modality m) const {
    if (!config_.use_reconstructor) {
      throw std::logic_error("reconstruct: model was built without reconstructors");
    }
    const auto& r = recon_[index_of(m)];
    const Shape& s = corrupted.shape();
    if (s.size() != 3 || s[2] != r.input.in_features()) {
      throw ShapeError("reconstruct(" + std::string(modality_tag(m)) + "): expected [B, T, " +
                       std::to_string(r.input.in_features()) + "], got " + to_string(s));
    }
    auto h = r.input(corrupted);
    for (const auto& layer : r.layers) h = layer(h);
    return r.output(h);
  }

  /// Full pipeline on corrupted inputs [B, T_m, d_m] per modality.
  ForwardOutputs<Scalar> forward(const std::array<Var<Scalar>, kNumModalities>& inputs,
                                 const ForwardOptions& opts = {}) const {
    ForwardOutputs<Scalar> out;
    const std::size_t batch = inputs[0].shape().at(0);
    for (Modality m : kModalities) {
      const auto& s = inputs[index_of(m)].shape();
      if (s.size() != 3 || s[0] != batch || s[2] != config_.feature_dims[index_of(m)]) {
        throw ShapeError("forward(" + std::string(modality_tag(m)) + "): expected [" +
                         std::to_string(batch) + ", T, " +
                         std::to_string(config_.feature_dims[index_of(m)]) + "], got " +
                         to_string(s));
      }
    }
    const auto language = embed(inputs[index_of(Modality::Language)], Modality::Language);
    const auto visual = embed(inputs[index_of(Modality::Visual)], Modality::Visual);
    const auto audio = embed(inputs[index_of(Modality::Audio)], Modality::Audio);
    out.language = language;

    Var<Scalar> corrected = language;
    if (config_.use_dmc) {
      out.completeness = completeness_check(language);
      Var<Scalar> w = out.completeness;
      if (opts.forced_completeness) {
        w = Var<Scalar>::constant(
            Tensor<Scalar>(Shape{batch}, static_cast<Scalar>(*opts.forced_completeness)));
      }
      out.proxy = generate_proxy(audio, visual);
      corrected = correct_dominant(out.proxy, language, w);
      out.logit_proxy = discriminate(out.proxy, opts.reverse_gradient);
      out.logit_language =
          discriminate(opts.detach_language ? detach(language) : language, false);
    }
    out.corrected = corrected;

    auto [dominant, hyper] = ahl_forward(corrected, audio, visual);
    out.prediction = fuse_predict(dominant, hyper);

    if (config_.use_reconstructor) {
      for (Modality m : kModalities) {
        out.reconstructions[index_of(m)] = reconstruct(inputs[index_of(m)], m);
      }
    }
    return out;
  }

 private:
  void require_dmc(const char* op) const {
    if (!config_.use_dmc) {
      throw std::logic_error(std::string(op) + ": model was built without correction module");
    }
  }

  void check_feature(const char* op, const Var<Scalar>& x) const {
    const Shape& s = x.shape();
    if (s.size() != 3 || s[1] != config_.token_len || s[2] != config_.width) {
      throw ShapeError(std::string(op) + ": expected [B, " + std::to_string(config_.token_len) +
                       ", " + std::to_string(config_.width) + "], got " + to_string(s));
    }
  }

  void build() {
    if (config_.token_len == 0 || config_.width == 0 || config_.fusion_layers == 0) {
      throw std::invalid_argument("ModelConfig: token length, width and fusion depth must be positive");
    }
    for (auto dm : config_.feature_dims)
      if (dm == 0) throw std::invalid_argument("ModelConfig: feature widths must be positive");
    Rng rng(config_.init_seed);
    const BlockDims dims = config_.block_dims();
    const std::size_t T = config_.token_len, d = config_.width;
    for (Modality m : kModalities) {
      embed_[index_of(m)] = EmbeddingEncoder<Scalar>::create(
          store_, "embed." + std::string(modality_tag(m)), T,
          config_.feature_dims[index_of(m)], dims, rng);
    }
    if (config_.use_dmc) {
      cc_.token = LearnableToken<Scalar>::create(store_, "dmc.completeness.token", T, d, rng);
      for (std::size_t i = 0; i < 2; ++i)
        cc_.layers[i] = EncoderLayer<Scalar>::create(
            store_, "dmc.completeness.layer" + std::to_string(i), dims, rng);
      cc_.head = Linear<Scalar>::create(store_, "dmc.completeness.head", d, 1, rng);
      proxy_.token = LearnableToken<Scalar>::create(store_, "dmc.proxy.token", T, d, rng);
      for (std::size_t i = 0; i < 2; ++i)
        proxy_.layers[i] = EncoderLayer<Scalar>::create(
            store_, "dmc.proxy.layer" + std::to_string(i), dims, rng);
      disc_head_ = Linear<Scalar>::create(store_, "dmc.discriminator.head", d, 1, rng);
    }
    hyper_token_ = LearnableToken<Scalar>::create(store_, "ahl.hyper_token", T, d, rng);
    for (std::size_t i = 0; i < ahl_.size(); ++i)
      ahl_[i] = EncoderLayer<Scalar>::create(store_, "ahl.encoder" + std::to_string(i + 2),
                                             dims, rng);
    for (std::size_t i = 0; i < hyper_.size(); ++i) {
      const std::string p = "ahl.hyper" + std::to_string(i + 1);
      auto& hl = hyper_[i];
      hl.query_norm = LayerNormAffine<Scalar>::create(store_, p + ".query_norm", d);
      hl.audio_norm = LayerNormAffine<Scalar>::create(store_, p + ".audio_norm", d);
      hl.visual_norm = LayerNormAffine<Scalar>::create(store_, p + ".visual_norm", d);
      hl.audio_attn = MhaParams<Scalar>::create(store_, p + ".audio_attn", dims, rng);
      hl.visual_attn = MhaParams<Scalar>::create(store_, p + ".visual_attn", dims, rng);
    }
    for (std::size_t i = 0; i < config_.fusion_layers; ++i)
      fusion_.push_back(
          CrossLayer<Scalar>::create(store_, "fusion.layer" + std::to_string(i), dims, rng));
    fusion_norm_ = LayerNormAffine<Scalar>::create(store_, "fusion.norm", d);
    fusion_head_ = Linear<Scalar>::create(store_, "fusion.head", d, 1, rng);
    if (config_.use_reconstructor) {
      for (Modality m : kModalities) {
        const std::string p = "recon." + std::string(modality_tag(m));
        const std::size_t dm = config_.feature_dims[index_of(m)];
        auto& r = recon_[index_of(m)];
        r.input = Linear<Scalar>::create(store_, p + ".input", dm, d, rng);
        for (std::size_t i = 0; i < 2; ++i)
          r.layers[i] = EncoderLayer<Scalar>::create(store_, p + ".layer" + std::to_string(i),
                                                     dims, rng);
        r.output = Linear<Scalar>::create(store_, p + ".output", d, dm, rng);
      }
    }
  }

  ModelConfig config_;
  ParamStore<Scalar> store_;
  std::array<EmbeddingEncoder<Scalar>, kNumModalities> embed_;
  CompletenessEstimator<Scalar> cc_;
  ProxyGenerator<Scalar> proxy_;
  Linear<Scalar> disc_head_;
  LearnableToken<Scalar> hyper_token_;
  std::array<EncoderLayer<Scalar>, 2> ahl_;
  std::array<HyperLayer<Scalar>, 3> hyper_;
  std::vector<CrossLayer<Scalar>> fusion_;
  LayerNormAffine<Scalar> fusion_norm_;
  Linear<Scalar> fusion_head_;
  std::array<Reconstructor<Scalar>, kNumModalities> recon_;
};

}  // namespace lnln
