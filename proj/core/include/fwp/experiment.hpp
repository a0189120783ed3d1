#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fwp/dataset_io.hpp"
#include "fwp/imm.hpp"
#include "fwp/interaction.hpp"
#include "fwp/metrics.hpp"
#include "fwp/prediction.hpp"
#include "fwp/synthetic.hpp"

namespace fwp {

enum class Setting { Imm, MVgmm, CVgmm, CVgmmVim };
inline constexpr std::array<Setting, 4> kAllSettings = {Setting::Imm, Setting::MVgmm,
                                                        Setting::CVgmm, Setting::CVgmmVim};
/// "IMM", "M-VGMM", "C-VGMM", "C-VGMM+VIM".
std::string_view to_string(Setting s);
/// Accepts the display names and lower-case aliases (imm, m-vgmm, ...).
Setting parse_setting(std::string_view name);

struct ExperimentConfig {
  std::optional<DatasetSpec> dataset;  // generated in memory by `ablate`
  std::string data_path;               // used instead when non-empty
  std::string output_dir = "results";

  double rate = kDefaultSampleRate;
  double t_h = 3.0;
  double t_f = 5.0;
  std::vector<double> horizons = {1.0, 2.0, 3.0, 4.0, 5.0};

  double lambda = kDefaultLambda;
  std::size_t top_k = kDefaultTopK;
  double distance_floor = kDefaultDistanceFloor;
  bool lambda_search = false;
  std::vector<double> lambda_grid = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  int validation_scenes = 8;

  std::uint64_t seed = 0;
  int folds = 4;
  bool augment = true;
  std::size_t hmm_stride = 5;   // snippet stride when collecting training data
  std::size_t vgmm_stride = 5;
  std::size_t eval_stride = 15;
  std::size_t hmm_max_per_class = 600;  // 0 keeps every snippet
  std::size_t vgmm_max_per_class = 0;
  std::size_t monolithic_max_rows = 8000;

  int hmm_states = 5;
  int hmm_mixes = 3;
  int hmm_max_iter = 100;
  double hmm_tol = 1e-4;
  int class_components = 8;
  int monolithic_components = 80;
  int vgmm_max_iter = 200;
  double vgmm_tol = 1e-5;
  bool train_monolithic = true;

  ImmConfig imm;
  bool measure_time = false;

  /// Throws Error("invalid_config").
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults. Throws Error("invalid_config").
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string config_hash(const ExperimentConfig& cfg);

/// Scene i belongs to fold i mod folds.
int fold_of(std::size_t scene_index, int folds);

/// Trains 10 HMMs, 10 class VGMMs and (optionally) the monolithic VGMM on
/// the (augmented) scenes outside `held_out_fold`; all scenes when empty.
/// Throws Error("insufficient_training_data") naming classes without data.
ModelBundle train_all(const ExperimentConfig& cfg, const Dataset& data,
                      std::optional<int> held_out_fold = std::nullopt);

/// Per-snippet outcome of one setting, with the full forecast on request.
struct SettingRun {
  Setting setting = Setting::Imm;
  std::vector<SnippetRecord> records;
  std::vector<PredictedTrajectory> trajectories;  // parallel to records when kept
  std::vector<double> frame_seconds;              // wall clock per prediction frame
};

struct EvalOptions {
  std::optional<int> fold;  // only scenes of this fold
  bool keep_trajectories = false;
  bool measure_time = false;
  std::optional<double> lambda;  // overrides the configured weight
};

/// Runs one setting on every evaluation window of the dataset. Windows end
/// every eval_stride samples; windows sharing a scene and t_pred form one
/// frame, which is the unit for timing and for the interaction module.
SettingRun run_setting(const ExperimentConfig& cfg, const ModelBundle& bundle,
                       const Dataset& data, Setting setting, const EvalOptions& options = {});

/// Report for a run; exec_time is filled when frame times were measured.
MetricsReport evaluate(const ExperimentConfig& cfg, const SettingRun& run,
                       Subset subset = Subset::All);

struct AblationResult {
  std::array<SettingRun, 4> runs;  // ordered as kAllSettings
  std::vector<double> lambdas;     // weight used per fold
};

/// Cross-validated evaluation of the four settings on identical snippets.
AblationResult run_ablation(const ExperimentConfig& cfg, const Dataset& data);

/// Table with a metric column and one column per report:
/// mean_ae_{h}s, median_ae_{h}s, accuracy_pct, exec_time_s. Missing values
/// are written as "-".
std::string metrics_csv(std::span<const MetricsReport> reports,
                        std::span<const std::string> column_names);
std::string axis_csv(std::span<const MetricsReport> reports,
                     std::span<const std::string> column_names);

/// Writes ablation.csv (all snippets), ablation_<subset>.csv for the
/// overtake/cut-in and stop-and-go subsets, and axis_breakdown.csv.
void write_ablation_reports(const ExperimentConfig& cfg, const AblationResult& result,
                            const std::filesystem::path& dir);

/// Lambda from the grid with the best interaction-module accuracy on `data`
/// (ties: lower 5 s mean error, then the earlier grid entry).
double select_lambda(const ExperimentConfig& cfg, const ModelBundle& bundle,
                     const Dataset& data);

nlohmann::json record_to_json(const SnippetRecord& record, Setting setting,
                              const PredictedTrajectory* trajectory = nullptr);
SnippetRecord record_from_json(const nlohmann::json& j);
/// JSON lines, one record per snippet.
std::string predictions_jsonl(const SettingRun& run);
/// Parses a predictions file; all lines must share one setting.
SettingRun read_predictions_jsonl(std::istream& in);

}  // namespace fwp
