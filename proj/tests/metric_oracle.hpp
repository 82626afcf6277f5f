#pragma once

// Brute-force metric oracle, written independently of the library.

#include <cmath>
#include <numeric>
#include <vector>

#include "lnln/metrics.hpp"
#include "lnln/random.hpp"

namespace lnln::test {

int oracle_class(double s, LabelScheme scheme, Granularity g) {
  if (g == Granularity::TwoNegPos) return s > 0 ? 1 : 0;
  if (g == Granularity::TwoNegNonNeg) return s >= 0 ? 1 : 0;
  std::vector<double> cuts;
  if (scheme == LabelScheme::Mosi) {
    const int k = g == Granularity::Seven ? 3 : g == Granularity::Five ? 2 : 1;
    for (int c = -k; c < k; ++c) cuts.push_back(c + 0.5);  // class boundaries
    // Ties round away from zero.
    int cls = 0;
    for (double c : cuts) cls += c > 0 ? s >= c : s > c;
    return cls;
  }
  cuts = g == Granularity::Five ? std::vector<double>{-0.7, -0.1, 0.1, 0.7}
                                : std::vector<double>{-0.1, 0.1};
  int cls = 0;
  for (double c : cuts) cls += s > c;
  return cls;
}

double oracle_accuracy(const std::vector<double>& p, const std::vector<double>& y,
                       LabelScheme scheme, Granularity g, bool drop_zero) {
  double hit = 0, n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (drop_zero && y[i] == 0.0) continue;
    n += 1;
    hit += oracle_class(p[i], scheme, g) == oracle_class(y[i], scheme, g);
  }
  return n ? hit / n : 0.0;
}

double oracle_weighted_f1(const std::vector<double>& p, const std::vector<double>& y,
                          LabelScheme scheme, Granularity g, bool drop_zero) {
  double total = 0, f1 = 0;
  for (int cls = 0; cls < 2; ++cls) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (drop_zero && y[i] == 0.0) continue;
      const bool truth = oracle_class(y[i], scheme, g) == cls;
      const bool pred = oracle_class(p[i], scheme, g) == cls;
      tp += truth && pred;
      fp += !truth && pred;
      fn += truth && !pred;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    f1 += f * (tp + fn);
    total += tp + fn;
  }
  return total ? f1 / total : 0.0;
}

double oracle_corr(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sx += (x[i] - mx) * (x[i] - mx);
    sy += (y[i] - my) * (y[i] - my);
  }
  return sx == 0 || sy == 0 ? 0.0 : sxy / std::sqrt(sx) / std::sqrt(sy);
}

std::vector<double> random_labels(Rng& rng, LabelScheme scheme, std::size_t n) {
  std::vector<double> y(n);
  for (auto& v : y) {
    const double u = rng.uniform();
    if (scheme == LabelScheme::Mosi) {
      v = u < 0.15 ? 0.0 : u < 0.55 ? (static_cast<int>(rng.below(19)) - 9) / 3.0 : rng.uniform(-3, 3);
    } else {
      v = u < 0.15 ? 0.0 : u < 0.55 ? (static_cast<int>(rng.below(11)) - 5) / 5.0 : rng.uniform(-1, 1);
    }
  }
  return y;
}

/// Predictions in [-1.2 bound, 1.2 bound]; a quarter land on the half-step
/// grid so rounding ties are exercised.
inline std::vector<double> random_predictions(Rng& rng, LabelScheme scheme, std::size_t n) {
  const double bound = scheme_bound(scheme);
  std::vector<double> p(n);
  for (auto& v : p) {
    if (rng.uniform() < 0.25) {
      v = scheme == LabelScheme::Mosi ? (static_cast<int>(rng.below(15)) - 7) / 2.0
                                      : (static_cast<int>(rng.below(21)) - 10) / 10.0;
    } else {
      v = rng.uniform(-1.2 * bound, 1.2 * bound);
    }
  }
  return p;
}

/// Empty when `r` agrees with the oracle within `tol`, else the first mismatch.
inline std::string oracle_mismatch(const MetricsReport& r, const std::vector<double>& p,
                                   const std::vector<double>& y, LabelScheme scheme, double tol) {
  auto check = [&](const char* name, double got, double want) -> std::string {
    return std::abs(got - want) <= tol ? "" : std::string(name) + ": " + std::to_string(got) +
                                                  " vs oracle " + std::to_string(want);
  };
  std::vector<std::string> issues;
  if (scheme == LabelScheme::Mosi) {
    if (!r.acc7) return "Acc-7 missing";
    issues.push_back(check("Acc-7", *r.acc7, oracle_accuracy(p, y, scheme, Granularity::Seven, false)));
  } else if (r.acc7) {
    return "Acc-7 present for SIMS";
  }
  issues.push_back(check("Acc-5", r.acc5, oracle_accuracy(p, y, scheme, Granularity::Five, false)));
  issues.push_back(check("Acc-3", r.acc3, oracle_accuracy(p, y, scheme, Granularity::Three, false)));
  issues.push_back(check("Acc-2 neg/pos", r.acc2_negpos,
                         oracle_accuracy(p, y, scheme, Granularity::TwoNegPos, true)));
  issues.push_back(check("Acc-2 neg/non-neg", r.acc2_negnonneg,
                         oracle_accuracy(p, y, scheme, Granularity::TwoNegNonNeg, false)));
  issues.push_back(check("F1 neg/pos", r.f1_negpos,
                         oracle_weighted_f1(p, y, scheme, Granularity::TwoNegPos, true)));
  issues.push_back(check("F1 neg/non-neg", r.f1_negnonneg,
                         oracle_weighted_f1(p, y, scheme, Granularity::TwoNegNonNeg, false)));
  double mae = 0;
  for (std::size_t i = 0; i < p.size(); ++i) mae += std::abs(p[i] - y[i]);
  issues.push_back(check("MAE", r.mae, mae / static_cast<double>(p.size())));
  issues.push_back(check("Corr", r.corr, oracle_corr(p, y)));
  for (const auto& s : issues)
    if (!s.empty()) return s;
  return {};
}

}  // namespace lnln::test
