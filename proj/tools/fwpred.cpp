// fwpred: generate synthetic data, train model bundles, predict and evaluate.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fwp/dataset_io.hpp"
#include "fwp/error.hpp"
#include "fwp/experiment.hpp"
#include "fwp/log.hpp"
#include "fwp/synthetic.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int report_error(const std::string& code, const std::string& message, int status = 1) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
  return status;
}

fwp::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  json j = fwp::read_json_file(path);
  if (seed) {
    j["seed"] = *seed;
    if (j.contains("dataset")) j["dataset"]["master_seed"] = *seed;
  }
  return fwp::experiment_config_from_json(j);
}

fwp::ModelBundle load_bundle(const std::string& path) {
  return fwp::bundle_from_json(fwp::read_json_file(path));
}

fwp::ExperimentConfig bundle_config(const fwp::ModelBundle& bundle) {
  if (bundle.experiment.is_null()) return {};
  return fwp::experiment_config_from_json(bundle.experiment);
}

int cmd_generate(const std::string& config, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  json j = fwp::read_json_file(config);
  json spec_json = j.contains("dataset") ? j["dataset"] : j;
  if (seed) {
    spec_json["master_seed"] = *seed;
  } else if (!spec_json.contains("master_seed") && j.contains("seed")) {
    spec_json["master_seed"] = j["seed"];
  }
  const fwp::DatasetSpec spec = fwp::dataset_spec_from_json(spec_json);
  const fwp::Dataset data = fwp::generate_dataset(spec);
  fwp::save_dataset(out, data, fwp::dataset_manifest(spec));
  std::size_t tracks = 0;
  for (const auto& s : data) tracks += s.tracks.size();
  std::cout << json{{"scenes", data.size()}, {"tracks", tracks}, {"out", out}}.dump() << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data_path, const std::string& out,
              std::optional<std::uint64_t> seed) {
  const fwp::ExperimentConfig cfg = load_config(config, seed);
  const fwp::Dataset data = fwp::load_dataset(data_path, cfg.rate);
  const fwp::ModelBundle bundle = fwp::train_all(cfg, data);
  fwp::write_text_file(out, fwp::to_json(bundle).dump() + "\n");
  std::cout << json{{"bundle", out}, {"hash", fwp::bundle_hash(bundle)}}.dump() << "\n";
  return 0;
}

int cmd_predict(const std::string& bundle_path, const std::string& data_path,
                const std::string& setting, const std::string& out) {
  const fwp::ModelBundle bundle = load_bundle(bundle_path);
  const fwp::ExperimentConfig cfg = bundle_config(bundle);
  const fwp::Dataset data = fwp::load_dataset(data_path, cfg.rate);
  fwp::EvalOptions opt;
  opt.keep_trajectories = true;
  const fwp::SettingRun run = fwp::run_setting(cfg, bundle, data, fwp::parse_setting(setting), opt);
  fwp::write_text_file(out, fwp::predictions_jsonl(run));
  std::cout << json{{"predictions", run.records.size()}, {"out", out}}.dump() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& bundle_path, const std::string& data_path,
                 const std::string& setting_name, const std::string& report,
                 const std::string& predictions, bool timing) {
  const fwp::ModelBundle bundle = load_bundle(bundle_path);
  const fwp::ExperimentConfig cfg = bundle_config(bundle);
  const fwp::Setting setting = fwp::parse_setting(setting_name);
  fwp::SettingRun run;
  if (!predictions.empty()) {
    std::ifstream in(predictions);
    if (!in) throw fwp::Error("io_error", "cannot open predictions " + predictions);
    run = fwp::read_predictions_jsonl(in);
    if (run.setting != setting) {
      throw fwp::Error("invalid_argument", "predictions were made with a different setting");
    }
  } else {
    const fwp::Dataset data = fwp::load_dataset(data_path, cfg.rate);
    fwp::EvalOptions opt;
    opt.measure_time = timing;
    run = fwp::run_setting(cfg, bundle, data, setting, opt);
  }
  const std::vector<fwp::MetricsReport> reports = {fwp::evaluate(cfg, run)};
  const std::vector<std::string> names = {std::string(fwp::to_string(setting))};
  fwp::write_text_file(report, fwp::metrics_csv(reports, names));
  std::cout << json{{"snippets", run.records.size()}, {"report", report}}.dump() << "\n";
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& out_override,
               std::optional<std::uint64_t> seed, bool timing, bool dump) {
  fwp::ExperimentConfig cfg = load_config(config, seed);
  if (timing) cfg.measure_time = true;
  const fs::path out = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);
  fwp::Dataset data;
  if (!cfg.data_path.empty()) {
    data = fwp::load_dataset(cfg.data_path, cfg.rate);
  } else if (cfg.dataset) {
    data = fwp::normalize_dataset(fwp::generate_dataset(*cfg.dataset));
  } else {
    throw fwp::Error("invalid_config", "config needs either data_path or a dataset spec");
  }
  const fwp::AblationResult result = fwp::run_ablation(cfg, data);
  fwp::write_ablation_reports(cfg, result, out);
  if (dump) {
    std::string all;
    for (const auto& run : result.runs) all += fwp::predictions_jsonl(run);
    fwp::write_text_file(out / "predictions.jsonl", all);
  }
  std::cout << json{{"out", out.string()},
                    {"snippets", result.runs.front().records.size()},
                    {"lambdas", result.lambdas}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Freeway surround-vehicle trajectory prediction"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  std::string config, out, data, bundle, setting, report, predictions;
  std::optional<std::uint64_t> seed;
  bool timing = false;
  bool dump = false;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", config, "Dataset or experiment config (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Override the master seed");

  auto* train = app.add_subcommand("train", "Train a model bundle");
  train->add_option("--config", config, "Experiment config (JSON)")->required();
  train->add_option("--data", data, "Dataset directory or .jsonl file")->required();
  train->add_option("--out", out, "Bundle output path")->required();
  train->add_option("--seed", seed, "Override the seed");

  auto* predict = app.add_subcommand("predict", "Dump per-snippet predictions");
  predict->add_option("--bundle", bundle, "Trained bundle")->required();
  predict->add_option("--data", data, "Dataset directory or .jsonl file")->required();
  predict->add_option("--setting", setting, "IMM, M-VGMM, C-VGMM or C-VGMM+VIM")->required();
  predict->add_option("--out", out, "Output JSON-lines path")->required();

  auto* eval = app.add_subcommand("evaluate", "Evaluate one setting");
  eval->add_option("--bundle", bundle, "Trained bundle")->required();
  eval->add_option("--data", data, "Dataset directory or .jsonl file");
  eval->add_option("--setting", setting, "IMM, M-VGMM, C-VGMM or C-VGMM+VIM")->required();
  eval->add_option("--report", report, "CSV report path")->required();
  eval->add_option("--predictions", predictions, "Score a predictions file instead of predicting");
  eval->add_flag("--timing", timing, "Measure per-frame execution time");

  auto* ablate = app.add_subcommand("ablate", "Cross-validated ablation of all four settings");
  ablate->add_option("--config", config, "Experiment config (JSON)")->required();
  ablate->add_option("--out", out, "Report directory (defaults to output_dir)");
  ablate->add_option("--seed", seed, "Override the master seed");
  ablate->add_flag("--timing", timing, "Fill the execution-time row");
  ablate->add_flag("--dump-predictions", dump, "Also write predictions.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }
  fwp::set_log_level(verbose ? fwp::LogLevel::Info : fwp::LogLevel::Warning);

  try {
    if (*gen) return cmd_generate(config, out, seed);
    if (*train) return cmd_train(config, data, out, seed);
    if (*predict) return cmd_predict(bundle, data, setting, out);
    if (*eval) {
      if (data.empty() && predictions.empty()) {
        return report_error("usage", "evaluate needs --data or --predictions", 2);
      }
      return cmd_evaluate(bundle, data, setting, report, predictions, timing);
    }
    if (*ablate) return cmd_ablate(config, out, seed, timing, dump);
  } catch (const fwp::Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what());
  }
  return 0;
}
