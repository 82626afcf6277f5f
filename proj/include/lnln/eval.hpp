#pragma once

// Missing-rate evaluation: per-rate metrics, rate averaging, seed-stability
// aggregation and the modality-missing special case.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lnln/batch.hpp"
#include "lnln/metrics.hpp"
#include "lnln/model.hpp"

namespace lnln {

/// r = 0.0, 0.1, ..., 0.9. Full erasure is deliberately not part of the sweep.
inline std::vector<double> default_sweep_rates() {
  std::vector<double> r;
  for (int k = 0; k < 10; ++k) r.push_back(k / 10.0);
  return r;
}

inline std::vector<std::uint64_t> default_seeds() { return {1111, 1112, 1113}; }

struct EvalOptions {
  std::size_t batch_size = 64;
  std::uint64_t seed = 1111;
};

/// Predictions on corrupted copies of `samples` (eval mode, no tape).
template <typename Scalar>
std::vector<double> predict(const LnlnModel<Scalar>& model,
                            const std::vector<ModalityBundle>& samples,
                            const ModalityRates& rates, const std::vector<float>& unknown,
                            const EvalOptions& opts = {}) {
  std::vector<double> preds;
  preds.reserve(samples.size());
  const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    const std::size_t end = std::min(samples.size(), start + bs);
    std::vector<const ModalityBundle*> clean;
    std::vector<CorruptionRecord> recs;
    for (std::size_t i = start; i < end; ++i) {
      clean.push_back(&samples[i]);
      recs.push_back(corrupt_for_eval(samples[i], i, rates, opts.seed, unknown));
    }
    const auto batch = make_batch<Scalar>(clean, recs);
    const auto out = model.forward(batch.corrupted);
    for (Scalar v : out.prediction.value().data()) preds.push_back(static_cast<double>(v));
  }
  return preds;
}

inline std::vector<double> labels_of(const std::vector<ModalityBundle>& samples) {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

struct RateResult {
  double rate = 0.0;
  MetricsReport metrics;
  ConfusionMatrix confusion_fine;    // 7-class (MOSI) or 5-class (SIMS)
  ConfusionMatrix confusion_binary;  // neg/non-neg
};

struct SeedSweep {
  std::uint64_t seed = 0;
  std::vector<RateResult> rates;
  MetricsReport average;
};

struct MetricStat {
  double mean = 0.0;
  double std = 0.0;
};

struct SweepResult {
  std::vector<SeedSweep> seeds;
  /// Metric name -> mean over seeds of the rate average, and the mean over
  /// rates of the across-seed standard deviation.
  std::vector<std::pair<std::string, MetricStat>> summary;
};

inline Granularity fine_granularity(LabelScheme scheme) {
  return scheme == LabelScheme::Mosi ? Granularity::Seven : Granularity::Five;
}

template <typename Scalar>
RateResult evaluate_at(const LnlnModel<Scalar>& model, const std::vector<ModalityBundle>& samples,
                       LabelScheme scheme, const ModalityRates& rates,
                       const std::vector<float>& unknown, const EvalOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty test set");
  const auto preds = predict(model, samples, rates, unknown, opts);
  const auto labels = labels_of(samples);
  RateResult r;
  r.rate = rates[0];
  r.metrics = compute_metrics(preds, labels, scheme);
  r.confusion_fine = confusion_matrix(preds, labels, scheme, fine_granularity(scheme));
  r.confusion_binary = confusion_matrix(preds, labels, scheme, Granularity::TwoNegNonNeg);
  return r;
}

/// Seed aggregation: per metric, the mean of per-seed rate
/// averages, and the standard deviation across seeds computed at each rate
/// and then averaged over rates (population standard deviation).
inline std::vector<std::pair<std::string, MetricStat>> aggregate_seeds(
    const std::vector<SeedSweep>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("aggregate_seeds: no seeds");
  std::vector<std::pair<std::string, MetricStat>> out;
  const auto names = metric_values(seeds.front().average);
  const std::size_t n_rates = seeds.front().rates.size();
  const double n_seeds = static_cast<double>(seeds.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    MetricStat stat;
    for (const auto& s : seeds) stat.mean += metric_values(s.average)[k].second;
    stat.mean /= n_seeds;
    double std_sum = 0.0;
    for (std::size_t r = 0; r < n_rates; ++r) {
      double mu = 0.0;
      for (const auto& s : seeds) mu += metric_values(s.rates[r].metrics)[k].second;
      mu /= n_seeds;
      double var = 0.0;
      for (const auto& s : seeds) {
        const double d = metric_values(s.rates[r].metrics)[k].second - mu;
        var += d * d;
      }
      std_sum += std::sqrt(var / n_seeds);
    }
    stat.std = n_rates ? std_sum / static_cast<double>(n_rates) : 0.0;
    out.emplace_back(names[k].first, stat);
  }
  return out;
}

/// Runs every (seed, rate) cell with one shared rate across modalities.
/// `models` holds one model per seed, or a single model reused for all seeds
/// (then seeds only vary the corruption draws).
template <typename Scalar>
SweepResult sweep(std::span<const LnlnModel<Scalar>* const> models,
                  const std::vector<ModalityBundle>& testset, LabelScheme scheme,
                  const std::vector<float>& unknown,
                  const std::vector<double>& rates = default_sweep_rates(),
                  const std::vector<std::uint64_t>& seeds = default_seeds(),
                  std::size_t batch_size = 64) {
  if (models.empty()) throw std::invalid_argument("sweep: no model");
  if (models.size() != 1 && models.size() != seeds.size()) {
    throw std::invalid_argument("sweep: need one model, or one model per seed");
  }
  if (rates.empty() || seeds.empty()) throw std::invalid_argument("sweep: empty rate or seed list");
  if (testset.empty()) throw std::invalid_argument("sweep: empty test set");
  SweepResult result;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const auto& model = *models[models.size() == 1 ? 0 : si];
    SeedSweep s;
    s.seed = seeds[si];
    std::vector<MetricsReport> reports;
    for (double r : rates) {
      s.rates.push_back(evaluate_at(model, testset, scheme, shared_rate(r), unknown,
                                    EvalOptions{batch_size, seeds[si]}));
      reports.push_back(s.rates.back().metrics);
    }
    s.average = average_reports(reports);
    result.seeds.push_back(std::move(s));
  }
  result.summary = aggregate_seeds(result.seeds);
  return result;
}

/// Whole modalities removed (rate 1.0) while the others stay intact.
template <typename Scalar>
MetricsReport modality_missing_eval(const LnlnModel<Scalar>& model,
                                    const std::vector<ModalityBundle>& testset,
                                    LabelScheme scheme, const std::vector<float>& unknown,
                                    const std::set<Modality>& missing,
                                    const EvalOptions& opts = {}) {
  if (missing.size() == kNumModalities) {
    throw std::invalid_argument("modality_missing_eval: removing every modality leaves no input");
  }
  ModalityRates rates{0.0, 0.0, 0.0};
  for (Modality m : missing) rates[index_of(m)] = 1.0;
  return evaluate_at(model, testset, scheme, rates, unknown, opts).metrics;
}

}  // namespace lnln
