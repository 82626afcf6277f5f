#pragma once

// Sentiment evaluation criteria: label binning, Acc-k, weighted F1, MAE,
// Pearson correlation and confusion matrices.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "lnln/types.hpp"

namespace lnln {

enum class Granularity { Seven, Five, Three, TwoNegPos, TwoNegNonNeg };

inline std::size_t class_count(LabelScheme scheme, Granularity g) {
  switch (g) {
    case Granularity::Seven:
      if (scheme == LabelScheme::Sims) {
        throw std::invalid_argument("bin_label: 7-class binning is undefined for SIMS labels");
      }
      return 7;
    case Granularity::Five: return 5;
    case Granularity::Three: return 3;
    case Granularity::TwoNegPos:
    case Granularity::TwoNegNonNeg: return 2;
  }
  throw std::invalid_argument("bin_label: unknown granularity");
}

/// Class index of a continuous score. MOSI: clamp(round(score), -k, k) + k
/// with k = 3, 2, 1 for 7/5/3 classes. SIMS: MMSA-style intervals with
/// edges {-0.7, -0.1, 0.1, 0.7} (5-class) and {-0.1, 0.1} (3-class), each
/// interval closed on the right. Two-class: neg/pos is score > 0, neg/non-neg
/// is score >= 0 (samples with label 0 are dropped from neg/pos metrics).
inline int bin_label(double score, LabelScheme scheme, Granularity g) {
  const double bound = scheme_bound(scheme);
  const double s = std::clamp(score, -bound, bound);
  switch (g) {
    case Granularity::TwoNegPos: return s > 0.0 ? 1 : 0;
    case Granularity::TwoNegNonNeg: return s >= 0.0 ? 1 : 0;
    default: break;
  }
  if (scheme == LabelScheme::Mosi) {
    const double k = g == Granularity::Seven ? 3.0 : g == Granularity::Five ? 2.0 : 1.0;
    return static_cast<int>(std::clamp(std::round(s), -k, k) + k);
  }
  static constexpr std::array<double, 4> five = {-0.7, -0.1, 0.1, 0.7};
  static constexpr std::array<double, 2> three = {-0.1, 0.1};
  if (g == Granularity::Seven) class_count(scheme, g);  // throws
  auto edges = g == Granularity::Five ? std::span<const double>(five)
                                      : std::span<const double>(three);
  int cls = 0;
  for (double e : edges)
    if (s > e) ++cls;
  return cls;
}

struct MetricsReport {
  std::optional<double> acc7;  // absent for SIMS
  double acc5 = 0.0;
  double acc3 = 0.0;
  double acc2_negpos = 0.0;
  double acc2_negnonneg = 0.0;
  double f1_negpos = 0.0;
  double f1_negnonneg = 0.0;
  double mae = 0.0;
  double corr = 0.0;
  std::size_t count = 0;
  LabelScheme scheme = LabelScheme::Mosi;
};

/// Column names used in reports, in display order.
inline std::vector<std::pair<std::string, double>> metric_values(const MetricsReport& r) {
  std::vector<std::pair<std::string, double>> out;
  if (r.acc7) out.emplace_back("Acc-7", *r.acc7);
  out.emplace_back("Acc-5", r.acc5);
  out.emplace_back("Acc-3", r.acc3);
  out.emplace_back("Acc-2 (neg/pos)", r.acc2_negpos);
  out.emplace_back("Acc-2 (neg/non-neg)", r.acc2_negnonneg);
  out.emplace_back("F1 (neg/pos)", r.f1_negpos);
  out.emplace_back("F1 (neg/non-neg)", r.f1_negnonneg);
  out.emplace_back("MAE", r.mae);
  out.emplace_back("Corr", r.corr);
  return out;
}

namespace detail {

inline void check_inputs(std::span<const double> preds, std::span<const double> labels) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(preds.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (preds.empty()) throw std::invalid_argument("metrics: empty input");
}

/// Binary accuracy and support-weighted F1 over the given subset.
inline std::pair<double, double> binary_scores(const std::vector<int>& truth,
                                               const std::vector<int>& pred) {
  if (truth.empty()) return {0.0, 0.0};
  std::array<std::array<double, 2>, 2> cm{};
  for (std::size_t i = 0; i < truth.size(); ++i) cm[truth[i]][pred[i]] += 1.0;
  const double n = static_cast<double>(truth.size());
  const double acc = (cm[0][0] + cm[1][1]) / n;
  double f1 = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double tp = cm[c][c];
    const double support = cm[c][0] + cm[c][1];
    const double predicted = cm[0][c] + cm[1][c];
    const double denom = support + predicted;
    const double f = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    f1 += f * support / n;
  }
  return {acc, f1};
}

}  // namespace detail

/// Pearson correlation; 0 when either side has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_inputs(x, y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> labels,
                                     LabelScheme scheme) {
  detail::check_inputs(preds, labels);
  MetricsReport r;
  r.scheme = scheme;
  r.count = preds.size();
  const double n = static_cast<double>(preds.size());

  auto accuracy = [&](Granularity g) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      hits += bin_label(preds[i], scheme, g) == bin_label(labels[i], scheme, g);
    return static_cast<double>(hits) / n;
  };
  if (scheme == LabelScheme::Mosi) r.acc7 = accuracy(Granularity::Seven);
  r.acc5 = accuracy(Granularity::Five);
  r.acc3 = accuracy(Granularity::Three);

  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 0.0) continue;
    truth.push_back(bin_label(labels[i], scheme, Granularity::TwoNegPos));
    pred.push_back(bin_label(preds[i], scheme, Granularity::TwoNegPos));
  }
  std::tie(r.acc2_negpos, r.f1_negpos) = detail::binary_scores(truth, pred);
  truth.clear();
  pred.clear();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    truth.push_back(bin_label(labels[i], scheme, Granularity::TwoNegNonNeg));
    pred.push_back(bin_label(preds[i], scheme, Granularity::TwoNegNonNeg));
  }
  std::tie(r.acc2_negnonneg, r.f1_negnonneg) = detail::binary_scores(truth, pred);

  double abs_err = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) abs_err += std::abs(preds[i] - labels[i]);
  r.mae = abs_err / n;
  r.corr = pearson(preds, labels);
  return r;
}

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

/// Rows are true classes, columns predicted classes. For the neg/pos variant
/// samples labelled exactly 0 are left out, as in the accuracy.
inline ConfusionMatrix confusion_matrix(std::span<const double> preds,
                                        std::span<const double> labels, LabelScheme scheme,
                                        Granularity g) {
  detail::check_inputs(preds, labels);
  const std::size_t k = class_count(scheme, g);
  ConfusionMatrix cm(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (g == Granularity::TwoNegPos && labels[i] == 0.0) continue;
    cm[bin_label(labels[i], scheme, g)][bin_label(preds[i], scheme, g)] += 1;
  }
  return cm;
}

/// Metric-wise arithmetic mean of several reports.
inline MetricsReport average_reports(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("average_reports: no reports");
  MetricsReport out;
  out.scheme = reports.front().scheme;
  out.count = reports.front().count;
  const double n = static_cast<double>(reports.size());
  double acc7 = 0.0;
  bool has7 = true;
  for (const auto& r : reports) {
    has7 = has7 && r.acc7.has_value();
    acc7 += r.acc7.value_or(0.0);
    out.acc5 += r.acc5;
    out.acc3 += r.acc3;
    out.acc2_negpos += r.acc2_negpos;
    out.acc2_negnonneg += r.acc2_negnonneg;
    out.f1_negpos += r.f1_negpos;
    out.f1_negnonneg += r.f1_negnonneg;
    out.mae += r.mae;
    out.corr += r.corr;
  }
  if (has7) out.acc7 = acc7 / n;
  out.acc5 /= n;
  out.acc3 /= n;
  out.acc2_negpos /= n;
  out.acc2_negnonneg /= n;
  out.f1_negpos /= n;
  out.f1_negnonneg /= n;
  out.mae /= n;
  out.corr /= n;
  return out;
}

}  // namespace lnln
