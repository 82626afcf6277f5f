#pragma once

// Attention and transformer building blocks.
//
// Every block accepts either an unbatched [T, d] sequence or a batched
// [B, T, d] stack. No positional encoding is applied anywhere, so attention
// is invariant to the order of key/value rows.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lnln/autodiff.hpp"
#include "lnln/random.hpp"

namespace lnln {

/// Owns every learnable leaf of a model, in registration order.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var<Scalar> var;
  };

  Var<Scalar> add(const std::string& name, Tensor<Scalar> init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, Var<Scalar>::leaf(std::move(init))});
    return entries_.back().var;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  std::size_t leaf_count() const noexcept { return entries_.size(); }

  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.var.size();
    return n;
  }

  const Var<Scalar>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].var;
  }

  std::vector<Var<Scalar>> leaves() const {
    std::vector<Var<Scalar>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.var);
    return out;
  }

  void zero_grad() {
    for (auto& e : entries_) e.var.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

namespace init {

/// Uniform in +-sqrt(6 / (fan_in + fan_out)), laid out [fan_in, fan_out].
template <typename Scalar>
Tensor<Scalar> xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<Scalar> t(Shape{fan_in, fan_out});
  for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(-bound, bound));
  return t;
}

template <typename Scalar>
Tensor<Scalar> token(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor<Scalar> t(Shape{rows, cols});
  for (auto& v : t.data()) v = static_cast<Scalar>(0.02 * rng.normal());
  return t;
}

}  // namespace init

template <typename Scalar>
struct Linear {
  Var<Scalar> weight;  // [in, out]
  Var<Scalar> bias;    // [out]

  static Linear create(ParamStore<Scalar>& store, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng) {
    Linear l;
    l.weight = store.add(name + ".weight", init::xavier_uniform<Scalar>(rng, in, out));
    l.bias = store.add(name + ".bias", Tensor<Scalar>(Shape{out}));
    return l;
  }

  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    return add(matmul(x, weight), bias);
  }
};

template <typename Scalar>
struct LayerNormAffine {
  Var<Scalar> gamma;
  Var<Scalar> beta;

  static LayerNormAffine create(ParamStore<Scalar>& store, const std::string& name,
                                std::size_t width) {
    LayerNormAffine ln;
    ln.gamma = store.add(name + ".gamma", Tensor<Scalar>(Shape{width}, Scalar{1}));
    ln.beta = store.add(name + ".beta", Tensor<Scalar>(Shape{width}));
    return ln;
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    return add(mul(layer_norm(x), gamma), beta);
  }
};

struct BlockDims {
  std::size_t width = 128;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 512;
};

template <typename Scalar>
struct MhaParams {
  Linear<Scalar> query, key, value, output;
  std::size_t heads = 1;

  static MhaParams create(ParamStore<Scalar>& store, const std::string& name,
                          const BlockDims& dims, Rng& rng) {
    if (dims.heads == 0 || dims.width % dims.heads != 0) {
      throw std::invalid_argument(name + ": width " + std::to_string(dims.width) +
                                  " is not divisible by " + std::to_string(dims.heads) +
                                  " heads");
    }
    MhaParams p;
    p.query = Linear<Scalar>::create(store, name + ".query", dims.width, dims.width, rng);
    p.key = Linear<Scalar>::create(store, name + ".key", dims.width, dims.width, rng);
    p.value = Linear<Scalar>::create(store, name + ".value", dims.width, dims.width, rng);
    p.output = Linear<Scalar>::create(store, name + ".output", dims.width, dims.width, rng);
    p.heads = dims.heads;
    return p;
  }

  std::size_t width() const { return query.in_features(); }
};

namespace detail {

template <typename Scalar>
Var<Scalar> as_batched(const Var<Scalar>& x, const char* op, std::size_t width) {
  const Shape& s = x.shape();
  if ((s.size() != 2 && s.size() != 3) || s.back() != width) {
    throw ShapeError(std::string(op) + ": expected [T, " + std::to_string(width) +
                     "] or [B, T, " + std::to_string(width) + "], got " + to_string(s));
  }
  if (s.size() == 3) return x;
  return reshape(x, Shape{1, s[0], s[1]});
}

template <typename Scalar>
Var<Scalar> restore_rank(const Var<Scalar>& y, std::size_t rank) {
  if (rank == 3) return y;
  return reshape(y, Shape{y.shape()[1], y.shape()[2]});
}

}  // namespace detail

/// Scaled dot-product attention per head (scale 1/sqrt(d/h)), heads
/// concatenated and projected. Queries come from `query_source`, keys and
/// values from `kv_source`.
template <typename Scalar>
Var<Scalar> multi_head_attention(const Var<Scalar>& query_source, const Var<Scalar>& kv_source,
                                 const MhaParams<Scalar>& p) {
  const std::size_t width = p.width();
  const std::size_t rank = query_source.shape().size();
  auto q_in = detail::as_batched(query_source, "multi_head_attention(query)", width);
  auto kv_in = detail::as_batched(kv_source, "multi_head_attention(kv)", width);
  if (q_in.shape()[0] != kv_in.shape()[0]) {
    throw ShapeError(detail::shapes_msg("multi_head_attention", query_source.shape(),
                                        kv_source.shape()));
  }
  const std::size_t head_dim = width / p.heads;
  const Scalar inv_scale = Scalar{1} / std::sqrt(static_cast<Scalar>(head_dim));
  auto q = scale(p.query(q_in), inv_scale);
  auto k = p.key(kv_in);
  auto v = p.value(kv_in);
  std::vector<Var<Scalar>> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    auto qh = p.heads == 1 ? q : slice(q, -1, lo, hi);
    auto kh = p.heads == 1 ? k : slice(k, -1, lo, hi);
    auto vh = p.heads == 1 ? v : slice(v, -1, lo, hi);
    auto weights = softmax(matmul(qh, transpose(kh)));
    heads.push_back(matmul(weights, vh));
  }
  auto merged = p.heads == 1 ? heads.front() : concat(heads, -1);
  return detail::restore_rank(p.output(merged), rank);
}

/// Pre-norm transformer encoder layer:
/// x + MHA(LN(x)), followed by + FFN(LN(.)) with a relu between two affine maps.
template <typename Scalar>
struct EncoderLayer {
  LayerNormAffine<Scalar> attn_norm;
  MhaParams<Scalar> attn;
  LayerNormAffine<Scalar> ffn_norm;
  Linear<Scalar> ffn_in;
  Linear<Scalar> ffn_out;

  static EncoderLayer create(ParamStore<Scalar>& store, const std::string& name,
                             const BlockDims& dims, Rng& rng) {
    EncoderLayer l;
    l.attn_norm = LayerNormAffine<Scalar>::create(store, name + ".attn_norm", dims.width);
    l.attn = MhaParams<Scalar>::create(store, name + ".attn", dims, rng);
    l.ffn_norm = LayerNormAffine<Scalar>::create(store, name + ".ffn_norm", dims.width);
    l.ffn_in = Linear<Scalar>::create(store, name + ".ffn_in", dims.width, dims.ffn_hidden, rng);
    l.ffn_out = Linear<Scalar>::create(store, name + ".ffn_out", dims.ffn_hidden, dims.width, rng);
    return l;
  }

  Var<Scalar> operator()(const Var<Scalar>& x) const {
    const std::size_t width = attn.width();
    if (x.shape().empty() || x.shape().back() != width) {
      throw ShapeError("encoder_layer: expected width " + std::to_string(width) + ", got " +
                       to_string(x.shape()));
    }
    auto h = attn_norm(x);
    auto y = add(x, multi_head_attention(h, h, attn));
    return add(y, ffn_out(relu(ffn_in(ffn_norm(y)))));
  }
};

/// Pre-norm cross-attention layer: the query stream attends into a fixed
/// key/value stream, then passes through the feed-forward sublayer.
template <typename Scalar>
struct CrossLayer {
  LayerNormAffine<Scalar> query_norm;
  LayerNormAffine<Scalar> kv_norm;
  MhaParams<Scalar> attn;
  LayerNormAffine<Scalar> ffn_norm;
  Linear<Scalar> ffn_in;
  Linear<Scalar> ffn_out;

  static CrossLayer create(ParamStore<Scalar>& store, const std::string& name,
                           const BlockDims& dims, Rng& rng) {
    CrossLayer l;
    l.query_norm = LayerNormAffine<Scalar>::create(store, name + ".query_norm", dims.width);
    l.kv_norm = LayerNormAffine<Scalar>::create(store, name + ".kv_norm", dims.width);
    l.attn = MhaParams<Scalar>::create(store, name + ".attn", dims, rng);
    l.ffn_norm = LayerNormAffine<Scalar>::create(store, name + ".ffn_norm", dims.width);
    l.ffn_in = Linear<Scalar>::create(store, name + ".ffn_in", dims.width, dims.ffn_hidden, rng);
    l.ffn_out = Linear<Scalar>::create(store, name + ".ffn_out", dims.ffn_hidden, dims.width, rng);
    return l;
  }

  Var<Scalar> operator()(const Var<Scalar>& query, const Var<Scalar>& kv) const {
    auto y = add(query, multi_head_attention(query_norm(query), kv_norm(kv), attn));
    return add(y, ffn_out(relu(ffn_in(ffn_norm(y)))));
  }
};

/// A learnable [T, width] matrix prepended to a sequence.
template <typename Scalar>
struct LearnableToken {
  Var<Scalar> value;

  static LearnableToken create(ParamStore<Scalar>& store, const std::string& name,
                               std::size_t rows, std::size_t cols, Rng& rng) {
    return LearnableToken{store.add(name, init::token<Scalar>(rng, rows, cols))};
  }

  std::size_t rows() const { return value.shape()[0]; }
  std::size_t cols() const { return value.shape()[1]; }

  /// The token repeated over `batch` samples: [batch, T, width].
  Var<Scalar> expand(std::size_t batch) const {
    return broadcast_to(value, Shape{batch, rows(), cols()});
  }
};

/// Prepends token rows to a batched sequence and returns the concatenation.
template <typename Scalar>
Var<Scalar> prepend_token(const LearnableToken<Scalar>& token,
                          const std::vector<Var<Scalar>>& sequences) {
  const std::size_t batch = sequences.front().shape()[0];
  std::vector<Var<Scalar>> parts;
  parts.reserve(sequences.size() + 1);
  parts.push_back(token.expand(batch));
  for (const auto& s : sequences) parts.push_back(s);
  return concat(parts, 1);
}

/// Token-prefixed modality encoder: concat(token, U) -> affine d_m -> d ->
/// two encoder layers -> the first T (token) positions.
template <typename Scalar>
struct EmbeddingEncoder {
  LearnableToken<Scalar> token;  // [T, d_m]
  Linear<Scalar> input;          // d_m -> d
  std::array<EncoderLayer<Scalar>, 2> layers;

  static EmbeddingEncoder create(ParamStore<Scalar>& store, const std::string& name,
                                 std::size_t token_rows, std::size_t feature_width,
                                 const BlockDims& dims, Rng& rng) {
    EmbeddingEncoder e;
    e.token = LearnableToken<Scalar>::create(store, name + ".token", token_rows, feature_width, rng);
    e.input = Linear<Scalar>::create(store, name + ".input", feature_width, dims.width, rng);
    for (std::size_t i = 0; i < e.layers.size(); ++i) {
      e.layers[i] =
          EncoderLayer<Scalar>::create(store, name + ".layer" + std::to_string(i), dims, rng);
    }
    return e;
  }

  Var<Scalar> operator()(const Var<Scalar>& sequence) const {
    const std::size_t width = token.cols();
    const std::size_t rank = sequence.shape().size();
    auto u = detail::as_batched(sequence, "embed_modality", width);
    if (u.shape()[1] == 0) throw ShapeError("embed_modality: empty input sequence");
    auto h = input(prepend_token(token, {u}));
    for (const auto& layer : layers) h = layer(h);
    return detail::restore_rank(slice(h, 1, 0, token.rows()), rank);
  }
};

template <typename Scalar>
Var<Scalar> embed_modality(const Var<Scalar>& sequence, const EmbeddingEncoder<Scalar>& encoder) {
  return encoder(sequence);
}

}  // namespace lnln
