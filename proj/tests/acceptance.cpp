// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is nonzero when any criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cli.hpp"
#include "helpers.hpp"
#include "lnln/checkpoint.hpp"
#include "lnln/config.hpp"
#include "lnln/eval.hpp"
#include "lnln/gradcheck.hpp"
#include "lnln/report.hpp"
#include "lnln/training.hpp"
#include "metric_oracle.hpp"

namespace lnln {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << ": " << o.detail
            << std::endl;
}

template <typename F>
void criterion(int id, const std::string& title, F&& body) {
  try {
    report(id, title, body());
  } catch (const std::exception& e) {
    report(id, title, {false, std::string("exception: ") + e.what()});
  }
}

// ---------------------------------------------------------------------------
// [1] Finite differences

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  auto entries = primitive_grad_checks();
  ModelGradCheckOptions opts;  // batch 2, T=4, d=16
  entries.push_back(model_grad_check(opts));
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& e : entries) {
    if (!(e.max_error <= worst)) {
      worst = e.max_error;
      worst_name = e.name;
    }
  }
  const double objective = entries.back().max_error;
  return {worst < 1e-4 && elapsed < 60.0,
          std::to_string(entries.size()) + " checks, max rel err " + num(worst, 3) + " (" +
              worst_name + "), full objective " + num(objective, 3) + ", " + num(elapsed, 3) +
              " s"};
}

// ---------------------------------------------------------------------------
// [2] Gradient reversal

std::vector<Tensor<double>> adversarial_grads(LnlnModel<double>& model, const Batch<double>& batch,
                                              const ForwardOptions& opts) {
  model.params().zero_grad();
  Tape<double> tape;
  {
    Tape<double>::Recording rec(tape);
    backward(tape, loss_components(model.forward(batch.corrupted, opts), batch).adversarial);
  }
  std::vector<Tensor<double>> g;
  for (const auto& e : model.params().entries()) g.push_back(e.var.grad());
  return g;
}

Outcome grl_contract() {
  // Forward identity at both precisions.
  bool forward_exact = true;
  {
    const auto x = test::random_tensor<double>({3, 4, 5}, 3, 10.0);
    forward_exact = forward_exact && bit_identical(gradient_reverse(Var<double>::leaf(x), 1.0).value(), x);
    const auto xf = test::random_tensor<float>({3, 4, 5}, 4, 10.0);
    forward_exact = forward_exact && bit_identical(gradient_reverse(Var<float>::leaf(xf), 1.0f).value(), xf);
  }
  // Paired runs on the adversarial loss: generator leaves flip sign exactly,
  // every other leaf is unchanged.
  const auto data = generate_synthetic(test::tiny_spec());
  const std::vector<ModalityBundle> samples(data.split(Split::Train).begin(),
                                            data.split(Split::Train).begin() + 4);
  auto cfg = test::tiny_config();
  cfg.grl_lambda = 1.0;
  LnlnModel<double> model(cfg);
  const auto batch = test::batch_of<double>(samples, 0.4, data.header.unknown);
  ForwardOptions plain;
  plain.reverse_gradient = false;
  const auto reversed = adversarial_grads(model, batch, ForwardOptions{});
  const auto straight = adversarial_grads(model, batch, plain);
  const auto generator = model.proxy_generator_leaf_names();
  std::size_t flipped = 0, unchanged = 0, mismatched = 0, nonzero = 0;
  for (std::size_t k = 0; k < model.params().leaf_count(); ++k) {
    const auto& name = model.params().entries()[k].name;
    const bool in_generator =
        std::find(generator.begin(), generator.end(), name) != generator.end() ||
        name.rfind("embed.v.", 0) == 0 || name.rfind("embed.a.", 0) == 0;
    for (std::size_t i = 0; i < reversed[k].size(); ++i) {
      const double want = in_generator ? -straight[k][i] : straight[k][i];
      if (reversed[k][i] != want) ++mismatched;
      if (in_generator && straight[k][i] != 0.0) ++nonzero;
    }
    (in_generator ? flipped : unchanged) += 1;
  }
  return {forward_exact && mismatched == 0 && nonzero > 0,
          std::string("forward ") + (forward_exact ? "bit-exact" : "differs") + "; " +
              std::to_string(flipped) + " generator leaves negated, " + std::to_string(unchanged) +
              " others identical, " + std::to_string(mismatched) + " mismatching coordinates"};
}

// ---------------------------------------------------------------------------
// [3] Corruption

Outcome corruption_exactness() {
  std::size_t bad_counts = 0, cases = 0;
  Rng rng(99);
  for (std::size_t T = 1; T <= 512; ++T) {
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      const std::size_t want = (static_cast<std::size_t>(k) * T + 5) / 10;  // round(kT/10), ties up
      const auto mask = make_mask(T, r, rng);
      const double completeness = completeness_label(mask);
      ++cases;
      if (erased_count(T, r) != want || mask.count() != want ||
          completeness != 1.0 - static_cast<double>(want) / static_cast<double>(T)) {
        ++bad_counts;
      }
    }
  }
  const auto data = generate_synthetic(test::tiny_spec());
  bool zero_identity = true;
  for (std::size_t i = 0; i < data.split(Split::Test).size(); ++i) {
    const auto& s = data.split(Split::Test)[i];
    const auto rec = corrupt_for_eval(s, i, shared_rate(0.0), 5, data.header.unknown);
    for (Modality m : kModalities) zero_identity = zero_identity && bit_identical(rec.corrupted[m], s[m]);
    zero_identity = zero_identity && rec.completeness == 1.0;
  }
  Rng ten(1);
  const double example = completeness_label(make_mask(10, 0.3, ten));
  return {bad_counts == 0 && zero_identity && example == 0.7,
          std::to_string(cases) + " (T, r) cases, " + std::to_string(bad_counts) +
              " wrong; r=0 " + (zero_identity ? "bit-identical" : "altered data") +
              "; T=10 r=0.3 completeness " + num(example, 17)};
}

// ---------------------------------------------------------------------------
// [4] Blend endpoints

Outcome blend_boundaries() {
  const auto data = generate_synthetic(test::tiny_spec());
  const std::vector<ModalityBundle> samples(data.split(Split::Test).begin(),
                                            data.split(Split::Test).begin() + 5);
  bool ok = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto cfg = test::tiny_config();
    cfg.init_seed = seed;
    LnlnModel<double> model(cfg);
    LnlnModel<float> model_f(cfg);
    for (double r : {0.0, 0.5, 0.9}) {
      const auto batch = test::batch_of<double>(samples, r, data.header.unknown, seed);
      const auto batch_f = test::batch_of<float>(samples, r, data.header.unknown, seed);
      ForwardOptions one, zero;
      one.forced_completeness = 1.0;
      zero.forced_completeness = 0.0;
      const auto a = model.forward(batch.corrupted, one);
      const auto b = model.forward(batch.corrupted, zero);
      const auto af = model_f.forward(batch_f.corrupted, one);
      const auto bf = model_f.forward(batch_f.corrupted, zero);
      ok = ok && bit_identical(a.corrected.value(), a.language.value()) &&
           bit_identical(b.corrected.value(), b.proxy.value()) &&
           bit_identical(af.corrected.value(), af.language.value()) &&
           bit_identical(bf.corrected.value(), bf.proxy.value());
    }
  }
  return {ok, ok ? "w=1 gives the language feature and w=0 the proxy, bit-exact (f64 and f32)"
                 : "endpoint blend differs from its input"};
}

// ---------------------------------------------------------------------------
// [5] Metrics

Outcome metric_oracle() {
  Rng rng(2025);
  std::size_t bad = 0;
  std::string first;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto scheme = trial % 2 ? LabelScheme::Sims : LabelScheme::Mosi;
    const auto y = test::random_labels(rng, scheme, 20);
    const auto p = test::random_predictions(rng, scheme, 20);
    const auto m = test::oracle_mismatch(compute_metrics(p, y, scheme), p, y, scheme, 1e-10);
    if (!m.empty() && bad++ == 0) first = m;
  }
  const std::vector<double> constant(20, 1.5);
  const auto y = test::random_labels(rng, LabelScheme::Mosi, 20);
  const double c = compute_metrics(constant, y, LabelScheme::Mosi).corr;
  return {bad == 0 && c == 0.0,
          "1000 cases, " + std::to_string(bad) + " disagree" + (first.empty() ? "" : " (" + first + ")") +
              "; constant prediction Corr = " + num(c)};
}

// ---------------------------------------------------------------------------
// [6] Sweep protocol

Outcome sweep_protocol() {
  const auto rates = default_sweep_rates();
  bool rates_ok = rates.size() == 10;
  for (std::size_t k = 0; k < rates.size(); ++k) rates_ok = rates_ok && rates[k] == k / 10.0;
  rates_ok = rates_ok && std::find(rates.begin(), rates.end(), 1.0) == rates.end();

  const auto data = generate_synthetic(test::tiny_spec());
  std::vector<LnlnModel<double>> models;
  for (std::uint64_t s : default_seeds()) {
    auto cfg = test::tiny_config();
    cfg.init_seed = s;
    models.emplace_back(cfg);
  }
  std::vector<const LnlnModel<double>*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  const auto& testset = data.split(Split::Test);
  const auto a = sweep<double>(ptrs, testset, LabelScheme::Mosi, data.header.unknown);
  const auto b = sweep<double>(ptrs, testset, LabelScheme::Mosi, data.header.unknown);
  const bool deterministic = to_json(a).dump() == to_json(b).dump() && sweep_csv(a) == sweep_csv(b);

  // Averages and the std-then-average aggregation, recomputed by hand.
  double worst_avg = 0.0, worst_agg = 0.0;
  const std::size_t n_metrics = metric_values(a.seeds[0].average).size();
  for (std::size_t k = 0; k < n_metrics; ++k) {
    double seed_mean = 0.0;
    for (const auto& s : a.seeds) {
      double mean = 0.0;
      for (const auto& r : s.rates) mean += metric_values(r.metrics)[k].second;
      mean /= static_cast<double>(s.rates.size());
      worst_avg = std::max(worst_avg, std::abs(mean - metric_values(s.average)[k].second));
      seed_mean += mean / static_cast<double>(a.seeds.size());
    }
    double std_sum = 0.0;
    for (std::size_t r = 0; r < rates.size(); ++r) {
      std::vector<double> v;
      for (const auto& s : a.seeds) v.push_back(metric_values(s.rates[r].metrics)[k].second);
      const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mu) * (x - mu);
      std_sum += std::sqrt(ss / static_cast<double>(v.size()));
    }
    worst_agg = std::max(worst_agg, std::abs(a.summary[k].second.mean - seed_mean));
    worst_agg = std::max(worst_agg,
                         std::abs(a.summary[k].second.std - std_sum / static_cast<double>(rates.size())));
  }
  return {rates_ok && deterministic && worst_avg < 1e-12 && worst_agg < 1e-12,
          std::string("default rates ") + (rates_ok ? "{0..0.9}" : "wrong") +
              ", rate average off by " + num(worst_avg, 2) + ", seed aggregation off by " +
              num(worst_agg, 2) + ", repeated sweep " + (deterministic ? "identical" : "differs")};
}

// ---------------------------------------------------------------------------
// [7]-[10] Desk-scale training on the synthetic language-dominant set

struct DeskRun {
  LnlnModel<float> model;
  SweepResult sweep;
  MetricsReport clean;
  double seconds = 0.0;
  std::size_t epochs = 0;
};

double least_squares_language_mae(const DatasetContainer& d) {
  auto design = [&](const std::vector<ModalityBundle>& s) {
    const std::size_t width = d.header.dims[0];
    Eigen::MatrixXd x(s.size(), width + 1);
    Eigen::VectorXd y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& f = s[i][Modality::Language];
      for (std::size_t c = 0; c < width; ++c) {
        double acc = 0;
        for (std::size_t t = 0; t < f.dim(0); ++t) acc += f.at(t, c);
        x(i, c) = acc / static_cast<double>(f.dim(0));
      }
      x(i, width) = 1.0;
      y(i) = s[i].label;
    }
    return std::pair{x, y};
  };
  const auto [xt, yt] = design(d.split(Split::Train));
  const Eigen::VectorXd beta = xt.colPivHouseholderQr().solve(yt);
  const auto [xs, ys] = design(d.split(Split::Test));
  return (xs * beta - ys).cwiseAbs().mean();
}

struct DeskSettings {
  std::size_t epochs = 30;
  std::size_t width = 32;
  std::size_t heads = 4;
  double learning_rate = 1e-3;
};

DeskRun desk_train(const std::string& label, const DatasetContainer& data, const DeskSettings& ds,
                   bool noisy, bool dmc_and_reconstructor) {
  ModelConfig mc;
  mc.width = ds.width;
  mc.heads = ds.heads;
  mc.feature_dims = data.header.dims;
  mc.use_dmc = dmc_and_reconstructor;
  mc.use_reconstructor = dmc_and_reconstructor;
  TrainConfig tc;
  tc.epochs = ds.epochs;
  tc.learning_rate = ds.learning_rate;
  tc.noisy_training = noisy;
  DeskRun run{LnlnModel<float>(mc), {}, {}, 0.0, 0};
  const auto t0 = Clock::now();
  const auto result = train(run.model, data.header, data.split(Split::Train),
                            data.split(Split::Validation), tc, [&](const EpochLog& e) {
                              std::cerr << "  " << label << " epoch " << e.epoch << "  loss "
                                        << num(e.train_total) << "  val MAE "
                                        << num(e.validation.mae) << "  val Acc-2 "
                                        << num(e.validation.acc2_negpos) << '\n';
                            });
  run.seconds = seconds_since(t0);
  run.epochs = result.log.size();
  if (result.abort_reason) throw NumericError(label + " training aborted: " + *result.abort_reason);
  const std::vector<const LnlnModel<float>*> ptrs{&run.model};
  run.sweep = sweep<float>(ptrs, data.split(Split::Test), data.header.scheme, data.header.unknown);
  run.clean = evaluate_at(run.model, data.split(Split::Test), data.header.scheme, shared_rate(0.0),
                          data.header.unknown, EvalOptions{}).metrics;
  return run;
}

/// Seed-averaged metric per rate.
std::vector<double> per_rate(const SweepResult& s, const std::string& metric) {
  std::vector<double> out(s.seeds.front().rates.size(), 0.0);
  for (const auto& seed : s.seeds)
    for (std::size_t r = 0; r < out.size(); ++r)
      for (const auto& [name, v] : metric_values(seed.rates[r].metrics))
        if (name == metric) out[r] += v / static_cast<double>(s.seeds.size());
  return out;
}

double summary_mean(const SweepResult& s, const std::string& metric) {
  for (const auto& [name, stat] : s.summary)
    if (name == metric) return stat.mean;
  throw std::invalid_argument("no metric " + metric);
}

/// Degradation trend: the end is worse than the start, and at most one step
/// moves the wrong way, by at most `slack`.
bool degrades(const std::vector<double>& v, bool higher_is_better, double slack, std::string& note) {
  std::size_t inversions = 0;
  double largest = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double improvement = higher_is_better ? v[i] - v[i - 1] : v[i - 1] - v[i];
    if (improvement > 0) {
      ++inversions;
      largest = std::max(largest, improvement);
    }
  }
  const bool worse_end = higher_is_better ? v.back() < v.front() : v.back() > v.front();
  note = num(v.front()) + " -> " + num(v.back()) + ", " + std::to_string(inversions) +
         " inversion(s), largest " + num(largest, 3);
  return worse_end && inversions <= 1 && largest <= slack;
}

// ---------------------------------------------------------------------------
// [11] Reproducibility

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome reproducibility(const DeskRun& full, const DatasetContainer& data) {
  // Checkpoint round trip of the trained model.
  const fs::path root = fs::temp_directory_path() / "lnln_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto ckpt = (root / "full.ckpt").string();
  save_checkpoint(make_checkpoint(full.model), ckpt);
  const auto restored = model_from_checkpoint<float>(load_checkpoint(ckpt));
  const std::vector<ModalityBundle> probe(data.split(Split::Test).begin(),
                                          data.split(Split::Test).begin() + 32);
  const auto batch = test::batch_of<float>(probe, 0.5, data.header.unknown);
  const auto a = full.model.forward(batch.corrupted);
  const auto b = restored.forward(batch.corrupted);
  const bool forward_exact = bit_identical(a.prediction.value(), b.prediction.value()) &&
                             bit_identical(a.completeness.value(), b.completeness.value()) &&
                             bit_identical(a.corrected.value(), b.corrected.value());

  // Manifest replay of a small train + sweep through the command line.
  const auto config = (root / "tiny.json").string();
  write_json_file(config, {{"synthetic",
                            {{"split_sizes", {48, 12, 16}}, {"dims", {6, 5, 4}}, {"lengths", {6, 5, 4}}}},
                           {"model",
                            {{"token_len", 4}, {"width", 8}, {"heads", 2}, {"fusion_layers", 2},
                             {"feature_dims", {6, 5, 4}}}},
                           {"train", {{"epochs", 3}, {"batch_size", 16}, {"learning_rate", 1e-3}}},
                           {"seeds", {7, 8}}});
  std::ostringstream sink;
  const auto first = root / "first";
  const auto second = root / "second";
  const auto dataset = (root / "tiny.bin").string();
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
  int status = run({"gen-data", "-c", config, "--dataset", dataset, "-o", first.string()});
  status |= run({"train", "-c", config, "-s", "dataset=" + dataset, "-o", first.string()});
  status |= run({"sweep", "-c", config, "-s", "dataset=" + dataset, "--checkpoint",
                 (first / "seed-7" / "best-mae.ckpt").string(), "--checkpoint",
                 (first / "seed-8" / "best-mae.ckpt").string(), "-o", first.string()});
  for (const char* cmd : {"train", "sweep"})
    status |= run({"replay", (first / (std::string(cmd) + ".manifest.json")).string(), "-o", second.string()});
  std::size_t compared = 0, differing = 0;
  for (const auto* name : {"seed-7/log.jsonl", "seed-7/best-mae.ckpt", "seed-7/final.ckpt",
                           "seed-8/log.jsonl", "seed-8/best-mae.ckpt", "seed-8/final.ckpt",
                           "train-summary.json", "sweep.json", "sweep.csv", "sweep.txt"}) {
    ++compared;
    if (!fs::exists(second / name) || slurp(first / name) != slurp(second / name)) ++differing;
  }
  fs::remove_all(root);
  return {status == 0 && differing == 0 && forward_exact,
          "replayed manifests: " + std::to_string(compared - differing) + "/" +
              std::to_string(compared) + " artifacts byte-identical" +
              (status ? " (a command failed: " + sink.str() + ")" : "") +
              "; checkpoint round trip forward " + (forward_exact ? "bit-exact" : "differs")};
}

}  // namespace
}  // namespace lnln

int main(int argc, char** argv) {
  using namespace lnln;
  CLI::App app{"Acceptance suite"};
  DeskSettings ds;
  app.add_option("--epochs", ds.epochs, "Training epochs for the synthetic runs");
  app.add_option("--width", ds.width, "Model width for the synthetic runs");
  app.add_option("--heads", ds.heads, "Attention heads for the synthetic runs");
  app.add_option("--lr", ds.learning_rate, "Learning rate for the synthetic runs");
  CLI11_PARSE(app, argc, argv);

  criterion(1, "gradient suite", gradient_suite);
  criterion(2, "gradient reversal contract", grl_contract);
  criterion(3, "corruption exactness", corruption_exactness);
  criterion(4, "blend boundaries", blend_boundaries);
  criterion(5, "metric oracle", metric_oracle);
  criterion(6, "sweep protocol", sweep_protocol);

  const auto data = generate_synthetic(SyntheticSpec{});
  std::optional<DeskRun> full, no_noise, no_dmc;
  auto attempt = [&](std::optional<DeskRun>& slot, const std::string& label, bool noisy, bool dmc) {
    try {
      std::cerr << "training " << label << " (" << ds.epochs << " epochs, d=" << ds.width << ")\n";
      slot.emplace(desk_train(label, data, ds, noisy, dmc));
      std::cerr << label << ": " << num(slot->seconds) << " s\n";
    } catch (const std::exception& e) {
      std::cerr << label << " failed: " << e.what() << '\n';
    }
  };
  attempt(full, "full", true, true);

  criterion(7, "synthetic end-to-end", [&]() -> Outcome {
    const double ls = least_squares_language_mae(data);
    if (!full) return {false, "training failed; language least-squares MAE " + num(ls)};
    const auto& m = full->clean;
    return {ls < 0.35 && m.acc2_negpos >= 0.90 && m.mae <= 0.6 && full->seconds <= 1800.0,
            "language least-squares MAE " + num(ls) + "; LNLN at r=0: Acc-2 " + num(m.acc2_negpos) +
                ", MAE " + num(m.mae) + " after " + std::to_string(full->epochs) + " epochs in " +
                num(full->seconds) + " s"};
  });

  criterion(8, "robustness degrades with the missing rate", [&]() -> Outcome {
    if (!full) return {false, "training failed"};
    std::string f1_note, mae_note;
    const bool f1 = degrades(per_rate(full->sweep, "F1 (neg/pos)"), true, 0.02, f1_note);
    const bool mae = degrades(per_rate(full->sweep, "MAE"), false, 0.02, mae_note);
    return {f1 && mae, "F1 " + f1_note + "; MAE " + mae_note};
  });

  attempt(no_noise, "no-training-noise", false, true);
  attempt(no_dmc, "no-dmc-no-reconstructor", true, false);

  criterion(9, "ablation directions", [&]() -> Outcome {
    if (!full || !no_noise || !no_dmc) return {false, "a training run failed"};
    const double acc2_full = summary_mean(full->sweep, "Acc-2 (neg/pos)");
    const double acc2_clean = summary_mean(no_noise->sweep, "Acc-2 (neg/pos)");
    const double acc7_full = summary_mean(full->sweep, "Acc-7");
    const double acc7_ablated = summary_mean(no_dmc->sweep, "Acc-7");
    const bool a = acc2_full - acc2_clean >= 0.02;
    const bool b = acc7_full - acc7_ablated >= 0.02;
    return {a && b, std::string("(a) ") + (a ? "ok" : "FAIL") + " averaged Acc-2 " + num(acc2_full) +
                        " vs " + num(acc2_clean) + " without training noise; (b) " +
                        (b ? "ok" : "FAIL") + " averaged Acc-7 " + num(acc7_full) + " vs " +
                        num(acc7_ablated) + " without DMC and reconstructor"};
  });

  criterion(10, "language dominance", [&]() -> Outcome {
    if (!full) return {false, "training failed"};
    const auto& testset = data.split(Split::Test);
    auto acc2 = [&](std::set<Modality> missing) {
      return modality_missing_eval(full->model, testset, data.header.scheme, data.header.unknown, missing)
          .acc2_negpos;
    };
    const double base = acc2({});
    const double dl = base - acc2({Modality::Language});
    const double dv = base - acc2({Modality::Visual});
    const double da = base - acc2({Modality::Audio});
    return {dl > dv && dl > da, "Acc-2 drop without language " + num(dl) + ", visual " + num(dv) +
                                    ", audio " + num(da) + " (intact " + num(base) + ")"};
  });

  criterion(11, "determinism and persistence", [&]() -> Outcome {
    if (!full) return {false, "training failed"};
    return reproducibility(*full, data);
  });

  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
