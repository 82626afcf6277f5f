#pragma once

// Objectives and optimization: the four losses and their weighted sum,
// AdamW, warmup + cosine learning-rate schedule, and the epoch loop with
// noisy training, validation-based early stopping and dual best-checkpoint
// tracking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lnln/batch.hpp"
#include "lnln/dataset.hpp"
#include "lnln/eval.hpp"
#include "lnln/model.hpp"

namespace lnln {

struct LossWeights {
  double alpha = 0.9;  // completeness
  double beta = 0.8;   // adversarial
  double gamma = 0.1;  // reconstruction
  double delta = 1.0;  // sentiment

  static LossWeights mosi() { return {0.9, 0.8, 0.1, 1.0}; }
  static LossWeights sims() { return {0.9, 0.6, 0.1, 1.0}; }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Named weight presets: the two dataset profiles plus the sensitivity grid.
inline std::vector<std::pair<std::string, LossWeights>> loss_weight_presets() {
  return {
      {"mosi", LossWeights::mosi()},
      {"mosei", LossWeights::mosi()},
      {"sims", LossWeights::sims()},
      {"mosi-alpha0.5", {0.5, 0.8, 0.1, 1.0}},
      {"mosi-alpha1.0", {1.0, 0.8, 0.1, 1.0}},
      {"sims-gamma0", {0.9, 0.6, 0.0, 1.0}},
      {"sims-gamma0.2", {0.9, 0.6, 0.2, 1.0}},
      {"sims-beta0", {0.9, 0.0, 0.1, 1.0}},
      {"sims-beta0.3", {0.9, 0.3, 0.1, 1.0}},
      {"sims-beta1.0", {0.9, 1.0, 0.1, 1.0}},
      {"sims-alpha0", {0.0, 0.6, 0.1, 1.0}},
      {"sims-alpha1.0", {1.0, 0.6, 0.1, 1.0}},
  };
}

inline LossWeights loss_weight_preset(const std::string& name) {
  for (const auto& [n, w] : loss_weight_presets())
    if (n == name) return w;
  throw std::invalid_argument("unknown loss-weight preset '" + name + "'");
}

template <typename Scalar>
struct LossComponents {
  Var<Scalar> completeness;    // L_cc
  Var<Scalar> adversarial;     // L_adv
  Var<Scalar> reconstruction;  // L_rec
  Var<Scalar> sentiment;       // L_sp
};

struct LossValues {
  double completeness = 0.0;
  double adversarial = 0.0;
  double reconstruction = 0.0;
  double sentiment = 0.0;
};

inline double total_loss(const LossValues& c, const LossWeights& w) {
  return w.alpha * c.completeness + w.beta * c.adversarial + w.gamma * c.reconstruction +
         w.delta * c.sentiment;
}

namespace detail {

template <typename Scalar>
Var<Scalar> mean_all(const Var<Scalar>& x) {
  return scale(sum(x), Scalar{1} / static_cast<Scalar>(x.size()));
}

template <typename Scalar>
Var<Scalar> zero_loss() {
  return Var<Scalar>::constant(Tensor<Scalar>::scalar(Scalar{0}));
}

template <typename Scalar>
Var<Scalar> vector_constant(const std::vector<double>& v) {
  Tensor<Scalar> t(Shape{v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<Scalar>(v[i]);
  return Var<Scalar>::constant(std::move(t));
}

}  // namespace detail

/// L_cc = mean (w - w_hat)^2; L_adv = binary cross-entropy on logits, proxy
/// branch labelled 0 and language branch labelled 1, averaged over both;
/// L_rec = per-modality mean squared error averaged over modalities;
/// L_sp = mean (y_hat - y)^2. Components of disabled modules are zero.
template <typename Scalar>
LossComponents<Scalar> loss_components(const ForwardOutputs<Scalar>& out,
                                       const Batch<Scalar>& batch) {
  if (batch.size() == 0) throw std::invalid_argument("loss_components: empty batch");
  if (out.prediction.size() != batch.size()) {
    throw ShapeError("loss_components: " + std::to_string(out.prediction.size()) +
                     " predictions for " + std::to_string(batch.size()) + " targets");
  }
  LossComponents<Scalar> c;
  const auto y = detail::vector_constant<Scalar>(batch.labels);
  c.sentiment = detail::mean_all(square(sub(out.prediction, y)));
  if (out.completeness.valid()) {
    const auto w_hat = detail::vector_constant<Scalar>(batch.completeness);
    c.completeness = detail::mean_all(square(sub(out.completeness, w_hat)));
    // softplus(z) is BCE for label 0, softplus(-z) for label 1.
    const auto proxy_term = detail::mean_all(softplus(out.logit_proxy));
    const auto lang_term = detail::mean_all(softplus(scale(out.logit_language, Scalar{-1})));
    c.adversarial = scale(add(proxy_term, lang_term), Scalar{0.5});
  } else {
    c.completeness = detail::zero_loss<Scalar>();
    c.adversarial = detail::zero_loss<Scalar>();
  }
  if (out.reconstructions[0].valid()) {
    Var<Scalar> acc;
    for (Modality m : kModalities) {
      const auto err =
          detail::mean_all(square(sub(out.reconstructions[index_of(m)], batch.clean[index_of(m)])));
      acc = acc.valid() ? add(acc, err) : err;
    }
    c.reconstruction = scale(acc, Scalar{1} / static_cast<Scalar>(kNumModalities));
  } else {
    c.reconstruction = detail::zero_loss<Scalar>();
  }
  for (const auto* v : {&c.completeness, &c.adversarial, &c.reconstruction, &c.sentiment}) {
    if (!std::isfinite(static_cast<double>(v->item()))) {
      throw NumericError("loss_components: non-finite loss");
    }
  }
  return c;
}

template <typename Scalar>
Var<Scalar> total_loss(const LossComponents<Scalar>& c, const LossWeights& w) {
  auto term = [](const Var<Scalar>& v, double k) { return scale(v, static_cast<Scalar>(k)); };
  return add(add(term(c.completeness, w.alpha), term(c.adversarial, w.beta)),
             add(term(c.reconstruction, w.gamma), term(c.sentiment, w.delta)));
}

template <typename Scalar>
LossValues loss_values(const LossComponents<Scalar>& c) {
  return {static_cast<double>(c.completeness.item()), static_cast<double>(c.adversarial.item()),
          static_cast<double>(c.reconstruction.item()), static_cast<double>(c.sentiment.item())};
}

// ---------------------------------------------------------------------------
// AdamW

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

template <typename Scalar>
struct AdamWState {
  std::size_t step = 0;
  std::vector<Tensor<Scalar>> first_moment;
  std::vector<Tensor<Scalar>> second_moment;
};

/// Decoupled weight decay followed by a bias-corrected adaptive-moment step.
/// Throws NumericError (leaving parameters untouched) on a non-finite gradient.
template <typename Scalar>
void optimizer_step(ParamStore<Scalar>& params, AdamWState<Scalar>& state, double lr,
                    const AdamWConfig& cfg) {
  auto& entries = params.entries();
  std::vector<Tensor<Scalar>> grads;
  grads.reserve(entries.size());
  for (const auto& e : entries) {
    grads.push_back(e.var.grad());
    if (!grads.back().all_finite()) {
      throw NumericError("optimizer_step: non-finite gradient for '" + e.name + "'");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& e : entries) {
      state.first_moment.emplace_back(e.var.shape());
      state.second_moment.emplace_back(e.var.shape());
    }
  }
  if (state.first_moment.size() != entries.size()) {
    throw std::invalid_argument("optimizer_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& p = entries[k].var.mutable_value();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      double pi = static_cast<double>(p[i]);
      const double gi = static_cast<double>(g[i]);
      pi -= lr * cfg.weight_decay * pi;
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<Scalar>(mi);
      v[i] = static_cast<Scalar>(vi);
      pi -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.epsilon);
      p[i] = static_cast<Scalar>(pi);
    }
  }
}

// ---------------------------------------------------------------------------
// Schedule

struct ScheduleConfig {
  double base_lr = 1e-4;
  std::size_t total_steps = 1;
  bool warmup = true;
  double warmup_fraction = 0.05;
  bool cosine = true;

  std::size_t warmup_steps() const {
    if (!warmup) return 0;
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps))));
  }
};

/// Linear warmup from 0 to the base rate over W steps, then cosine decay that
/// reaches 0 at the last step (index total_steps - 1).
inline double lr_schedule(std::size_t step, const ScheduleConfig& cfg) {
  const std::size_t warm = cfg.warmup_steps();
  if (step < warm) return cfg.base_lr * static_cast<double>(step) / static_cast<double>(warm);
  if (!cfg.cosine) return cfg.base_lr;
  const std::size_t last = cfg.total_steps > 0 ? cfg.total_steps - 1 : 0;
  if (last <= warm) return step >= last && step > warm ? 0.0 : cfg.base_lr;
  const double progress =
      std::min(1.0, static_cast<double>(step - warm) / static_cast<double>(last - warm));
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::size_t epochs = 200;
  bool warmup = true;
  double warmup_fraction = 0.05;
  bool cosine = true;
  std::size_t patience = 20;
  std::uint64_t seed = 1111;
  LossWeights weights = LossWeights::mosi();
  AdamWConfig adamw;
  /// Corrupt training samples with a per-sample rate drawn from [0, 0.9].
  bool noisy_training = true;
  std::vector<double> validation_rates = {0.0, 0.3, 0.6};
  std::uint64_t validation_seed = 2024;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;  // rate at the epoch's last step
  LossValues train;
  double train_total = 0.0;
  MetricsReport validation;
  double seconds = 0.0;
};

template <typename Scalar>
struct ParamSnapshot {
  std::size_t epoch = 0;
  double score = 0.0;
  std::vector<Tensor<Scalar>> values;
};

template <typename Scalar>
struct TrainResult {
  std::vector<EpochLog> log;
  ParamSnapshot<Scalar> best_regression;      // lowest validation MAE
  ParamSnapshot<Scalar> best_classification;  // highest validation Acc-2 (neg/pos)
  AdamWState<Scalar> optimizer;
  std::vector<Tensor<Scalar>> final_values;  // parameters matching `optimizer`
  bool stopped_early = false;
  /// Set when a non-finite loss or gradient ended training.
  std::optional<std::string> abort_reason;
};

template <typename Scalar>
std::vector<Tensor<Scalar>> snapshot_values(const ParamStore<Scalar>& params) {
  std::vector<Tensor<Scalar>> v;
  v.reserve(params.leaf_count());
  for (const auto& e : params.entries()) v.push_back(e.var.value());
  return v;
}

template <typename Scalar>
void restore_values(ParamStore<Scalar>& params, const std::vector<Tensor<Scalar>>& values) {
  auto& entries = params.entries();
  if (values.size() != entries.size()) {
    throw std::invalid_argument("restore_values: snapshot does not match parameters");
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (values[k].shape() != entries[k].var.shape()) {
      throw ShapeError("restore_values: shape mismatch for '" + entries[k].name + "'");
    }
    entries[k].var.mutable_value() = values[k];
  }
}

/// Validation metrics averaged over the configured validation rates.
template <typename Scalar>
MetricsReport validate(const LnlnModel<Scalar>& model, const std::vector<ModalityBundle>& samples,
                       LabelScheme scheme, const std::vector<float>& unknown,
                       const TrainConfig& cfg) {
  std::vector<MetricsReport> reports;
  for (double r : cfg.validation_rates) {
    reports.push_back(evaluate_at(model, samples, scheme, shared_rate(r), unknown,
                                  EvalOptions{cfg.batch_size, cfg.validation_seed})
                          .metrics);
  }
  return average_reports(reports);
}

/// Training-time corruption of one sample in one epoch.
inline CorruptionRecord corrupt_for_training(const ModalityBundle& sample, std::size_t index,
                                             std::size_t epoch, std::uint64_t seed, bool noisy,
                                             const std::vector<float>& unknown) {
  Rng rng(derive_seed(seed, 0x7261696E00000000ULL + epoch, index));
  const double r = noisy ? draw_training_rate(rng) : 0.0;
  return corrupt_sample(sample, shared_rate(r), rng, unknown);
}

/// One optimization step on a batch; returns the loss components.
template <typename Scalar>
LossValues train_step(LnlnModel<Scalar>& model, const Batch<Scalar>& batch,
                      AdamWState<Scalar>& state, double lr, const TrainConfig& cfg) {
  model.params().zero_grad();
  Tape<Scalar> tape;
  LossValues values;
  {
    typename Tape<Scalar>::Recording rec(tape);
    const auto out = model.forward(batch.corrupted);
    const auto comps = loss_components(out, batch);
    values = loss_values(comps);
    const auto loss = total_loss(comps, cfg.weights);
    backward(tape, loss);
  }
  tape.clear();
  optimizer_step(model.params(), state, lr, cfg.adamw);
  return values;
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains `model` in place. On return the model holds the regression-best
/// parameters. A non-finite loss ends training early with `abort_reason` set;
/// the best snapshots seen so far are kept.
template <typename Scalar>
TrainResult<Scalar> train(LnlnModel<Scalar>& model, const DatasetHeader& header,
                          const std::vector<ModalityBundle>& train_set,
                          const std::vector<ModalityBundle>& validation_set,
                          const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training split");
  if (validation_set.empty()) throw std::invalid_argument("train: empty validation split");
  if (cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("train: batch size, epochs and learning rate must be positive");
  }
  const std::size_t steps_per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  ScheduleConfig sched{cfg.learning_rate, steps_per_epoch * cfg.epochs, cfg.warmup,
                       cfg.warmup_fraction, cfg.cosine};
  TrainResult<Scalar> result;
  result.best_regression.score = std::numeric_limits<double>::infinity();
  result.best_classification.score = -1.0;
  std::size_t since_best = 0;
  std::size_t step = 0;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(cfg.seed, 0x5368756666000000ULL, epoch));
    shuffler.shuffle(order);

    EpochLog log;
    log.epoch = epoch;
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const ModalityBundle*> clean;
      std::vector<CorruptionRecord> recs;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        clean.push_back(&train_set[i]);
        recs.push_back(corrupt_for_training(train_set[i], i, epoch, cfg.seed, cfg.noisy_training,
                                            header.unknown));
      }
      const auto batch = make_batch<Scalar>(clean, recs);
      const double lr = lr_schedule(step++, sched);
      LossValues v;
      try {
        v = train_step(model, batch, result.optimizer, lr, cfg);
      } catch (const NumericError& e) {
        result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
        break;
      }
      const double n = static_cast<double>(end - start);
      log.train.completeness += n * v.completeness;
      log.train.adversarial += n * v.adversarial;
      log.train.reconstruction += n * v.reconstruction;
      log.train.sentiment += n * v.sentiment;
      weight_sum += n;
      log.lr = lr;
    }
    if (result.abort_reason) break;
    log.train.completeness /= weight_sum;
    log.train.adversarial /= weight_sum;
    log.train.reconstruction /= weight_sum;
    log.train.sentiment /= weight_sum;
    log.train_total = total_loss(log.train, cfg.weights);

    log.validation = validate(model, validation_set, header.scheme, header.unknown, cfg);
    if (log.validation.mae < result.best_regression.score) {
      result.best_regression = {epoch, log.validation.mae, snapshot_values(model.params())};
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log.validation.acc2_negpos > result.best_classification.score) {
      result.best_classification = {epoch, log.validation.acc2_negpos,
                                    snapshot_values(model.params())};
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (cfg.patience > 0 && since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  result.final_values = snapshot_values(model.params());
  if (!result.best_regression.values.empty()) {
    restore_values(model.params(), result.best_regression.values);
  }
  return result;
}

}  // namespace lnln
