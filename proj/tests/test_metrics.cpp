#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lnln/metrics.hpp"
#include "lnln/random.hpp"
#include "metric_oracle.hpp"

namespace lnln {
namespace {

TEST(Metrics, MatchBruteForceOracleOnRandomCases) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto scheme = trial % 2 ? LabelScheme::Sims : LabelScheme::Mosi;
    const auto y = test::random_labels(rng, scheme, 20);
    const auto p = test::random_predictions(rng, scheme, 20);
    const auto mismatch = test::oracle_mismatch(compute_metrics(p, y, scheme), p, y, scheme, 1e-10);
    ASSERT_TRUE(mismatch.empty()) << "trial " << trial << ": " << mismatch;
  }
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<double> y = {-2.6, -1.0, 0.4, 1.7, 3.0, -0.2};
  const auto r = compute_metrics(y, y, LabelScheme::Mosi);
  EXPECT_EQ(*r.acc7, 1.0);
  EXPECT_EQ(r.acc5, 1.0);
  EXPECT_EQ(r.acc2_negpos, 1.0);
  EXPECT_EQ(r.f1_negpos, 1.0);
  EXPECT_EQ(r.f1_negnonneg, 1.0);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_NEAR(r.corr, 1.0, 1e-15);
}

TEST(Metrics, AntiCorrelated) {
  const std::vector<double> y = {-1.5, -0.5, 0.5, 1.5};
  const std::vector<double> p = {1.5, 0.5, -0.5, -1.5};
  EXPECT_NEAR(compute_metrics(p, y, LabelScheme::Mosi).corr, -1.0, 1e-15);
}

TEST(Metrics, ConstantVectorHasZeroCorrelation) {
  const std::vector<double> y = {-1, 0, 2};
  const std::vector<double> c = {0.3, 0.3, 0.3};
  EXPECT_EQ(pearson(c, y), 0.0);
  EXPECT_EQ(pearson(y, c), 0.0);
}

TEST(Metrics, RejectsBadInputs) {
  const std::vector<double> a = {1, 2}, b = {1};
  EXPECT_THROW(compute_metrics(a, b, LabelScheme::Mosi), std::invalid_argument);
  EXPECT_THROW(compute_metrics(std::vector<double>{}, std::vector<double>{}, LabelScheme::Mosi),
               std::invalid_argument);
  EXPECT_THROW(bin_label(0.0, LabelScheme::Sims, Granularity::Seven), std::invalid_argument);
}

TEST(Binning, MosiExamples) {
  EXPECT_EQ(bin_label(-3.4, LabelScheme::Mosi, Granularity::Seven), 0);
  EXPECT_EQ(bin_label(0.49, LabelScheme::Mosi, Granularity::Seven), 3);
  EXPECT_EQ(bin_label(0.5, LabelScheme::Mosi, Granularity::Seven), 4);
  EXPECT_EQ(bin_label(-0.5, LabelScheme::Mosi, Granularity::Seven), 2);
  EXPECT_EQ(bin_label(-2.5, LabelScheme::Mosi, Granularity::Seven), 0);
  EXPECT_EQ(bin_label(2.9, LabelScheme::Mosi, Granularity::Five), 4);
  EXPECT_EQ(bin_label(-1.2, LabelScheme::Mosi, Granularity::Three), 0);
  EXPECT_EQ(bin_label(0.0, LabelScheme::Mosi, Granularity::TwoNegPos), 0);
  EXPECT_EQ(bin_label(0.0, LabelScheme::Mosi, Granularity::TwoNegNonNeg), 1);
}

TEST(Binning, SimsIntervalsClosedOnTheRight) {
  EXPECT_EQ(bin_label(-0.7, LabelScheme::Sims, Granularity::Five), 0);
  EXPECT_EQ(bin_label(-0.69, LabelScheme::Sims, Granularity::Five), 1);
  EXPECT_EQ(bin_label(0.1, LabelScheme::Sims, Granularity::Five), 2);
  EXPECT_EQ(bin_label(0.7, LabelScheme::Sims, Granularity::Five), 3);
  EXPECT_EQ(bin_label(0.71, LabelScheme::Sims, Granularity::Five), 4);
  EXPECT_EQ(bin_label(-0.1, LabelScheme::Sims, Granularity::Three), 0);
  EXPECT_EQ(bin_label(0.1, LabelScheme::Sims, Granularity::Three), 1);
}

TEST(Binning, MonotoneInScore) {
  for (auto scheme : {LabelScheme::Mosi, LabelScheme::Sims}) {
    for (auto g : {Granularity::Seven, Granularity::Five, Granularity::Three, Granularity::TwoNegPos,
                   Granularity::TwoNegNonNeg}) {
      if (scheme == LabelScheme::Sims && g == Granularity::Seven) continue;
      const double b = scheme_bound(scheme);
      int prev = -1;
      for (double s = -1.5 * b; s <= 1.5 * b; s += b / 997) {
        const int c = bin_label(s, scheme, g);
        EXPECT_GE(c, prev);
        prev = c;
      }
    }
  }
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(6);
  auto y = test::random_labels(rng, LabelScheme::Mosi, 30);
  std::vector<double> p(30);
  for (auto& v : p) v = rng.uniform(-3, 3);
  const auto a = compute_metrics(p, y, LabelScheme::Mosi);
  std::vector<std::size_t> idx(30);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<double> ps, ys;
  for (auto i : idx) {
    ps.push_back(p[i]);
    ys.push_back(y[i]);
  }
  const auto b = compute_metrics(ps, ys, LabelScheme::Mosi);
  const auto va = metric_values(a), vb = metric_values(b);
  for (std::size_t k = 0; k < va.size(); ++k) EXPECT_NEAR(va[k].second, vb[k].second, 1e-12) << va[k].first;
}

TEST(Metrics, CorrAffineInvariantMaeNot) {
  Rng rng(7);
  auto y = test::random_labels(rng, LabelScheme::Mosi, 25);
  std::vector<double> p(25), q(25);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(-3, 3);
    q[i] = 2.5 * p[i] + 0.7;
  }
  const auto a = compute_metrics(p, y, LabelScheme::Mosi);
  const auto b = compute_metrics(q, y, LabelScheme::Mosi);
  EXPECT_NEAR(a.corr, b.corr, 1e-12);
  EXPECT_GT(std::abs(a.mae - b.mae), 1e-3);
}

TEST(ConfusionMatrix, HandBuiltCase) {
  // labels -> classes (7-way): -2.2->1, 0.1->3, 1.4->4, 2.8->6, -0.6->2, 0.0->3
  const std::vector<double> y = {-2.2, 0.1, 1.4, 2.8, -0.6, 0.0};
  const std::vector<double> p = {-1.9, 0.4, 0.6, 3.3, 0.2, -0.4};
  const auto cm = confusion_matrix(p, y, LabelScheme::Mosi, Granularity::Seven);
  ConfusionMatrix want(7, std::vector<std::size_t>(7, 0));
  want[1][1] = 1;  // -1.9 -> 1
  want[3][3] = 2;  // 0.4 -> 3 and -0.4 -> 3
  want[4][4] = 1;  // 0.6 -> 4
  want[6][6] = 1;  // 3.3 -> 6
  want[2][3] = 1;  // 0.2 -> 3
  EXPECT_EQ(cm, want);
  const auto binary = confusion_matrix(p, y, LabelScheme::Mosi, Granularity::TwoNegPos);
  std::size_t total = 0;
  for (const auto& row : binary) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
  EXPECT_EQ(total, 5u);  // the zero label is left out
}

TEST(ConfusionMatrix, LazyModelFillsOneColumn) {
  const std::vector<double> y = {-2, -1, 0, 1, 2, 3};
  const std::vector<double> p(6, 0.8);
  const auto cm = confusion_matrix(p, y, LabelScheme::Mosi, Granularity::Seven);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 7; ++c)
      if (c != 4) EXPECT_EQ(cm[r][c], 0u);
}

TEST(ConfusionMatrix, RowSumsAreTrueClassCounts) {
  Rng rng(12);
  const auto y = test::random_labels(rng, LabelScheme::Sims, 50);
  std::vector<double> p(50);
  for (auto& v : p) v = rng.uniform(-1, 1);
  const auto cm = confusion_matrix(p, y, LabelScheme::Sims, Granularity::Five);
  for (std::size_t r = 0; r < 5; ++r) {
    std::size_t truth = 0;
    for (double v : y) truth += bin_label(v, LabelScheme::Sims, Granularity::Five) == static_cast<int>(r);
    EXPECT_EQ(std::accumulate(cm[r].begin(), cm[r].end(), std::size_t{0}), truth);
  }
}

TEST(Metrics, AverageReportsIsMetricWiseMean) {
  const std::vector<double> y = {-1, 1, 2, -2};
  const auto a = compute_metrics(std::vector<double>{-1, 1, -2, -2}, y, LabelScheme::Mosi);
  const auto b = compute_metrics(std::vector<double>{1, 1, 2, 2}, y, LabelScheme::Mosi);
  const std::vector<MetricsReport> both = {a, b};
  const auto m = average_reports(both);
  const auto va = metric_values(a), vb = metric_values(b), vm = metric_values(m);
  for (std::size_t k = 0; k < vm.size(); ++k) EXPECT_DOUBLE_EQ(vm[k].second, (va[k].second + vb[k].second) / 2);
}

}  // namespace
}  // namespace lnln
