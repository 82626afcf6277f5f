#pragma once

// Report emission: structured JSON records, a flat CSV table (one row per
// seed x rate x metric) and aligned text tables for people.

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "lnln/config.hpp"
#include "lnln/eval.hpp"
#include "lnln/metrics.hpp"
#include "lnln/training.hpp"

namespace lnln {

inline json to_json(const MetricsReport& r) {
  json metrics = json::object();
  for (const auto& [name, value] : metric_values(r)) metrics[name] = value;
  return {{"scheme", scheme_name(r.scheme)}, {"count", r.count}, {"metrics", metrics}};
}

inline json to_json(const LossValues& v) {
  return {{"completeness", v.completeness},
          {"adversarial", v.adversarial},
          {"reconstruction", v.reconstruction},
          {"sentiment", v.sentiment}};
}

/// Wall-clock time is left out so logs are reproducible byte for byte.
inline json to_json(const EpochLog& log) {
  return {{"epoch", log.epoch},
          {"lr", log.lr},
          {"train_loss", to_json(log.train)},
          {"train_total", log.train_total},
          {"validation", to_json(log.validation).at("metrics")}};
}

inline json to_json(const RateResult& r) {
  return {{"rate", r.rate},
          {"metrics", to_json(r.metrics)},
          {"confusion_fine", r.confusion_fine},
          {"confusion_binary", r.confusion_binary}};
}

inline json to_json(const SweepResult& s) {
  json seeds = json::array();
  for (const auto& seed : s.seeds) {
    json rates = json::array();
    for (const auto& r : seed.rates) rates.push_back(to_json(r));
    seeds.push_back({{"seed", seed.seed}, {"rates", rates}, {"average", to_json(seed.average)}});
  }
  json summary = json::object();
  for (const auto& [name, stat] : s.summary) summary[name] = {{"mean", stat.mean}, {"std", stat.std}};
  return {{"seeds", seeds}, {"summary", summary}};
}

/// seed,rate,metric,value rows; the rate column is "avg" for rate averages.
inline std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "seed,rate,metric,value\n";
  for (const auto& seed : s.seeds) {
    for (const auto& r : seed.rates)
      for (const auto& [name, value] : metric_values(r.metrics))
        os << seed.seed << ',' << r.rate << ",\"" << name << "\"," << value << '\n';
    for (const auto& [name, value] : metric_values(seed.average))
      os << seed.seed << ",avg,\"" << name << "\"," << value << '\n';
  }
  return os.str();
}

namespace detail {

inline std::string render_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) os << "  ";
      os << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    os << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : rows) line(row);
  return os.str();
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Accuracies and F1 in percent, MAE and Corr raw, matching the usual tables.
inline std::string format_metric(const std::string& name, double v) {
  if (name == "MAE" || name == "Corr") return fixed(v, 4);
  return fixed(100.0 * v, 2);
}

}  // namespace detail

inline std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  if (rows.empty()) return {};
  std::vector<std::string> header{""};
  for (const auto& [name, _] : metric_values(rows.front().second)) header.push_back(name);
  std::vector<std::vector<std::string>> cells;
  for (const auto& [label, report] : rows) {
    std::vector<std::string> row{label};
    for (const auto& [name, value] : metric_values(report)) row.push_back(detail::format_metric(name, value));
    cells.push_back(std::move(row));
  }
  return detail::render_table(header, cells);
}

/// One block per seed (rows = rates + average), then the mean +- std summary.
inline std::string sweep_table(const SweepResult& s) {
  std::ostringstream os;
  for (const auto& seed : s.seeds) {
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& r : seed.rates) rows.emplace_back("r=" + detail::fixed(r.rate, 1), r.metrics);
    rows.emplace_back("avg", seed.average);
    os << "seed " << seed.seed << '\n' << metrics_table(rows) << '\n';
  }
  std::vector<std::vector<std::string>> cells;
  for (const auto& [name, stat] : s.summary) {
    cells.push_back({name, detail::format_metric(name, stat.mean),
                     detail::format_metric(name, stat.std)});
  }
  os << "summary over seeds\n" << detail::render_table({"metric", "mean", "std"}, cells);
  return os.str();
}

}  // namespace lnln
