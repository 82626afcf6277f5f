#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lnln/checkpoint.hpp"
#include "lnln/config.hpp"
#include "lnln/dataset.hpp"
#include "lnln/eval.hpp"
#include "lnln/gradcheck.hpp"
#include "lnln/report.hpp"
#include "lnln/training.hpp"

namespace lnln::cli {
namespace {

namespace fs = std::filesystem;

struct Context {
  RunConfig config;
  json config_json;
  json arguments;
  std::ostream& out;
  std::ostream& err;
};

fs::path output_dir(const Context& ctx) {
  fs::path dir = ctx.config.output_dir;
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

DatasetContainer open_dataset(const std::string& path) {
  if (path.empty()) throw ConfigError("no dataset path configured (set dataset=...)");
  if (!fs::exists(path)) throw DatasetError("dataset '" + path + "' does not exist");
  if (ends_with(path, ".jsonl")) {
    std::ifstream is(path);
    return read_dataset_text(is);
  }
  return load_dataset(path);
}

Split split_arg(const Context& ctx) {
  return parse_split(ctx.arguments.value("split", std::string("test")));
}

// ---------------------------------------------------------------------------

int cmd_gen_data(Context& ctx) {
  const auto& cfg = ctx.config;
  if (cfg.dataset.empty()) throw ConfigError("gen-data: set dataset=<output path>");
  DatasetContainer data;
  const std::string from_text = ctx.arguments.value("from_text", std::string());
  if (!from_text.empty()) {
    std::ifstream is(from_text);
    if (!is) throw DatasetError("cannot open '" + from_text + "'");
    data = read_dataset_text(is);
  } else {
    data = generate_synthetic(cfg.synthetic);
  }
  const fs::path target(cfg.dataset);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  if (ends_with(cfg.dataset, ".jsonl")) {
    std::ofstream os(cfg.dataset);
    write_dataset_text(os, data);
  } else {
    save_dataset(data, cfg.dataset);
  }
  const std::string text_out = ctx.arguments.value("text_out", std::string());
  if (!text_out.empty()) {
    std::ofstream os(text_out);
    if (!os) throw DatasetError("cannot write '" + text_out + "'");
    write_dataset_text(os, data);
  }
  ctx.out << "wrote " << cfg.dataset << " (train " << data.split(Split::Train).size()
          << ", validation " << data.split(Split::Validation).size() << ", test "
          << data.split(Split::Test).size() << ")\n";
  return 0;
}

template <typename Scalar>
int train_typed(Context& ctx, const DatasetContainer& data) {
  const fs::path root = output_dir(ctx);
  json summary = json::array();
  int status = 0;
  for (std::uint64_t seed : ctx.config.seeds) {
    ModelConfig mc = ctx.config.model;
    mc.init_seed = seed;
    TrainConfig tc = ctx.config.train;
    tc.seed = seed;
    LnlnModel<Scalar> model(mc);
    const fs::path dir = root / ("seed-" + std::to_string(seed));
    fs::create_directories(dir);
    std::ofstream log(dir / "log.jsonl");
    ctx.out << "seed " << seed << ": " << model.params().scalar_count() << " parameters in "
            << model.params().leaf_count() << " leaves\n";
    auto result = train(model, data.header, data.split(Split::Train),
                        data.split(Split::Validation), tc, [&](const EpochLog& e) {
                          log << to_json(e).dump() << '\n';
                          ctx.out << "  epoch " << e.epoch << "  loss " << e.train_total
                                  << "  val MAE " << e.validation.mae << "  val Acc-2 "
                                  << e.validation.acc2_negpos << "  (" << e.seconds << " s)\n";
                        });
    json entry = {{"seed", seed}, {"epochs_run", result.log.size()},
                  {"stopped_early", result.stopped_early}};
    auto save = [&](const std::vector<Tensor<Scalar>>& values, const std::string& name,
                    json notes, const AdamWState<Scalar>* opt) {
      restore_values(model.params(), values);
      save_checkpoint(make_checkpoint(model, opt, std::move(notes)), (dir / name).string());
    };
    if (!result.best_regression.values.empty()) {
      save(result.best_regression.values, "best-mae.ckpt",
           {{"selected_by", "validation MAE"}, {"epoch", result.best_regression.epoch},
            {"score", result.best_regression.score}, {"seed", seed}},
           nullptr);
      save(result.best_classification.values, "best-acc2.ckpt",
           {{"selected_by", "validation Acc-2 (neg/pos)"},
            {"epoch", result.best_classification.epoch},
            {"score", result.best_classification.score}, {"seed", seed}},
           nullptr);
      entry["best_mae"] = {{"epoch", result.best_regression.epoch},
                           {"score", result.best_regression.score}};
      entry["best_acc2"] = {{"epoch", result.best_classification.epoch},
                            {"score", result.best_classification.score}};
    }
    if (!result.abort_reason) {
      save(result.final_values, "final.ckpt", {{"selected_by", "last epoch"}, {"seed", seed}},
           &result.optimizer);
    } else {
      entry["aborted"] = *result.abort_reason;
      ctx.err << "seed " << seed << ": training aborted (" << *result.abort_reason
              << "); kept the last good checkpoints\n";
      status = 3;
    }
    summary.push_back(entry);
  }
  write_json_file((root / "train-summary.json").string(), summary);
  return status;
}

int cmd_train(Context& ctx) {
  const auto data = open_dataset(ctx.config.dataset);
  if (data.header.dims != ctx.config.model.feature_dims) {
    throw ConfigError("model.feature_dims " + json(ctx.config.model.feature_dims).dump() +
                      " do not match the dataset widths " + json(data.header.dims).dump());
  }
  return ctx.config.precision == Precision::F64 ? train_typed<double>(ctx, data)
                                                : train_typed<float>(ctx, data);
}

std::vector<std::string> checkpoint_args(const Context& ctx) {
  std::vector<std::string> paths;
  if (ctx.arguments.contains("checkpoints")) {
    paths = ctx.arguments.at("checkpoints").get<std::vector<std::string>>();
  }
  if (paths.empty()) throw ConfigError("no checkpoint given (--checkpoint PATH)");
  for (const auto& p : paths)
    if (!fs::exists(p)) throw CheckpointError("checkpoint '" + p + "' does not exist");
  return paths;
}

template <typename Scalar>
std::vector<LnlnModel<Scalar>> load_models(const std::vector<std::string>& paths,
                                           const DatasetHeader& header) {
  std::vector<LnlnModel<Scalar>> models;
  for (const auto& p : paths) {
    auto model = model_from_checkpoint<Scalar>(load_checkpoint(p));
    if (model.config().feature_dims != header.dims) {
      throw CheckpointError("checkpoint '" + p + "' expects feature widths " +
                            json(model.config().feature_dims).dump() + ", dataset has " +
                            json(header.dims).dump());
    }
    models.push_back(std::move(model));
  }
  return models;
}

template <typename Scalar>
int eval_typed(Context& ctx, const DatasetContainer& data) {
  const auto models = load_models<Scalar>(checkpoint_args(ctx), data.header);
  const auto& testset = data.split(split_arg(ctx));
  const double rate = ctx.arguments.value("rate", 0.0);
  const std::uint64_t seed = ctx.arguments.value("seed", ctx.config.seeds.front());
  const auto r = evaluate_at(models.front(), testset, data.header.scheme, shared_rate(rate),
                             data.header.unknown, EvalOptions{ctx.config.eval_batch_size, seed});
  write_json_file((output_dir(ctx) / "eval.json").string(), to_json(r));
  ctx.out << metrics_table({{"r=" + std::to_string(rate).substr(0, 4), r.metrics}});
  return 0;
}

int cmd_eval(Context& ctx) {
  const auto data = open_dataset(ctx.config.dataset);
  return ctx.config.precision == Precision::F64 ? eval_typed<double>(ctx, data)
                                                : eval_typed<float>(ctx, data);
}

template <typename Scalar>
int sweep_typed(Context& ctx, const DatasetContainer& data) {
  const auto models = load_models<Scalar>(checkpoint_args(ctx), data.header);
  std::vector<const LnlnModel<Scalar>*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  const auto result = sweep<Scalar>(ptrs, data.split(split_arg(ctx)), data.header.scheme,
                                    data.header.unknown, ctx.config.sweep_rates,
                                    ctx.config.seeds, ctx.config.eval_batch_size);
  const fs::path dir = output_dir(ctx);
  write_json_file((dir / "sweep.json").string(), to_json(result));
  write_text(dir / "sweep.csv", sweep_csv(result));
  const std::string table = sweep_table(result);
  write_text(dir / "sweep.txt", table);
  ctx.out << table;
  return 0;
}

int cmd_sweep(Context& ctx) {
  const auto data = open_dataset(ctx.config.dataset);
  return ctx.config.precision == Precision::F64 ? sweep_typed<double>(ctx, data)
                                                : sweep_typed<float>(ctx, data);
}

template <typename Scalar>
int missing_typed(Context& ctx, const DatasetContainer& data) {
  const auto models = load_models<Scalar>(checkpoint_args(ctx), data.header);
  std::set<Modality> missing;
  for (const auto& tag : ctx.arguments.value("missing", std::vector<std::string>{})) {
    missing.insert(parse_modality(tag));
  }
  const std::uint64_t seed = ctx.arguments.value("seed", ctx.config.seeds.front());
  const auto report =
      modality_missing_eval(models.front(), data.split(split_arg(ctx)), data.header.scheme,
                            data.header.unknown, missing,
                            EvalOptions{ctx.config.eval_batch_size, seed});
  std::string label = "missing {";
  for (Modality m : missing) label += std::string(label.back() == '{' ? "" : ",") + std::string(modality_tag(m));
  label += "}";
  json j = to_json(report);
  j["missing"] = ctx.arguments.value("missing", std::vector<std::string>{});
  write_json_file((output_dir(ctx) / "modality-missing.json").string(), j);
  ctx.out << metrics_table({{label, report}});
  return 0;
}

int cmd_modality_missing(Context& ctx) {
  const auto data = open_dataset(ctx.config.dataset);
  return ctx.config.precision == Precision::F64 ? missing_typed<double>(ctx, data)
                                                : missing_typed<float>(ctx, data);
}

int cmd_grad_check(Context& ctx) {
  const double tolerance = ctx.arguments.value("tolerance", 1e-4);
  ModelGradCheckOptions opts;
  opts.coords_per_leaf = ctx.arguments.value("coords_per_leaf", opts.coords_per_leaf);
  opts.weights = ctx.config.train.weights;
  auto entries = primitive_grad_checks();
  entries.push_back(model_grad_check(opts));
  double worst = 0.0;
  json j = json::object();
  for (const auto& e : entries) {
    ctx.out << "  " << e.name << ": " << e.max_error << '\n';
    j[e.name] = e.max_error;
    worst = std::max(worst, e.max_error);
  }
  ctx.out << "max error " << worst << " (tolerance " << tolerance << ")\n";
  write_json_file((output_dir(ctx) / "grad-check.json").string(),
                  {{"entries", j}, {"max_error", worst}, {"tolerance", tolerance}});
  return worst < tolerance ? 0 : 1;
}

}  // namespace

int execute(const std::string& command, const json& config, const json& arguments,
            std::ostream& out, std::ostream& err) {
  Context ctx{run_config_from_json(config), config, arguments, out, err};
  ctx.config_json = to_json(ctx.config);
  const fs::path dir = output_dir(ctx);
  write_json_file((dir / (command + ".manifest.json")).string(),
                  make_manifest(command, ctx.config_json, arguments));
  if (command == "gen-data") return cmd_gen_data(ctx);
  if (command == "train") return cmd_train(ctx);
  if (command == "eval") return cmd_eval(ctx);
  if (command == "sweep") return cmd_sweep(ctx);
  if (command == "modality-missing") return cmd_modality_missing(ctx);
  if (command == "grad-check") return cmd_grad_check(ctx);
  throw ConfigError("unknown command '" + command + "'");
}

int replay(const std::string& manifest_path, const std::string& output_dir, std::ostream& out,
           std::ostream& err) {
  const json manifest = read_json_file(manifest_path);
  for (const char* key : {"manifest_version", "command", "arguments", "config"}) {
    if (!manifest.contains(key)) throw ConfigError("'" + manifest_path + "' is not a manifest (no " + key + ")");
  }
  json config = manifest.at("config");
  if (!output_dir.empty()) config["output_dir"] = output_dir;
  return execute(manifest.at("command").get<std::string>(), config, manifest.at("arguments"), out,
                 err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-resistant multimodal sentiment regression under random data missing", "lnln"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file or manifest");
    sub->add_option("-s,--set", overrides, "Override a config key: key.path=value")
        ->allow_extra_args(false);
    sub->add_option("-o,--out", out_dir, "Output directory (config output_dir)");
  };
  json arguments = json::object();

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic (or ingested text) dataset");
  common(gen);
  std::string from_text, text_out, dataset_out;
  gen->add_option("--dataset", dataset_out, "Output path (config dataset)");
  gen->add_option("--from-text", from_text, "Ingest a text export instead of generating");
  gen->add_option("--text", text_out, "Also write a text export here");

  auto* tr = app.add_subcommand("train", "Train one model per configured seed");
  common(tr);

  std::vector<std::string> checkpoints;
  std::string split = "test";
  double rate = 0.0;
  std::uint64_t seed = 0;

  auto* ev = app.add_subcommand("eval", "Metrics at one missing rate");
  common(ev);
  ev->add_option("--checkpoint", checkpoints, "Checkpoint file")->required()->expected(1);
  ev->add_option("--rate", rate, "Missing rate shared by all modalities")
      ->check(CLI::Range(0.0, 1.0));
  ev->add_option("--seed", seed, "Corruption seed (default: first configured seed)");
  ev->add_option("--split", split, "train, validation or test");

  auto* sw = app.add_subcommand("sweep", "Rate sweep over every configured seed");
  common(sw);
  sw->add_option("--checkpoint", checkpoints, "One checkpoint, or one per seed")->required();
  sw->add_option("--split", split, "train, validation or test");

  auto* mm = app.add_subcommand("modality-missing", "Evaluate with whole modalities removed");
  common(mm);
  std::vector<std::string> missing;
  mm->add_option("--checkpoint", checkpoints, "Checkpoint file")->required()->expected(1);
  mm->add_option("--missing", missing, "Removed modalities among l, v, a")->delimiter(',');
  mm->add_option("--seed", seed, "Corruption seed (default: first configured seed)");
  mm->add_option("--split", split, "train, validation or test");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  common(gc);
  std::size_t coords = 16;
  double tolerance = 1e-4;
  gc->add_option("--coords", coords, "Coordinates probed per model leaf (0 = all)");
  gc->add_option("--tolerance", tolerance, "Maximum accepted relative error");

  auto* rp = app.add_subcommand("replay", "Re-run a manifest");
  std::string manifest;
  rp->add_option("manifest", manifest, "Manifest file")->required();
  rp->add_option("-o,--out", out_dir, "Redirect the output directory");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (rp->parsed()) return replay(manifest, out_dir, out, err);
    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    if (!out_dir.empty()) overrides.push_back("output_dir=" + json(out_dir).dump());
    if (!dataset_out.empty()) overrides.push_back("dataset=" + json(dataset_out).dump());
    const RunConfig cfg = resolve_run_config(config_path, overrides);
    if (sub == gen) {
      if (!from_text.empty()) arguments["from_text"] = from_text;
      if (!text_out.empty()) arguments["text_out"] = text_out;
    } else if (sub == ev || sub == sw || sub == mm) {
      arguments["checkpoints"] = checkpoints;
      arguments["split"] = split;
      if (sub == ev) arguments["rate"] = rate;
      if (sub == mm) arguments["missing"] = missing;
      if (sub != sw) arguments["seed"] = sub->count("--seed") ? seed : cfg.seeds.front();
    } else if (sub == gc) {
      arguments["coords_per_leaf"] = coords;
      arguments["tolerance"] = tolerance;
    }
    return execute(command, to_json(cfg), arguments, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace lnln::cli
