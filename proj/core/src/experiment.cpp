#include "fwp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>

#include "fwp/error.hpp"
#include "fwp/log.hpp"
#include "fwp/rng.hpp"

namespace fwp {

using nlohmann::json;

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::Imm: return "IMM";
    case Setting::MVgmm: return "M-VGMM";
    case Setting::CVgmm: return "C-VGMM";
    case Setting::CVgmmVim: return "C-VGMM+VIM";
  }
  return "IMM";
}

Setting parse_setting(std::string_view name) {
  std::string lower(name);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "imm") return Setting::Imm;
  if (lower == "m-vgmm" || lower == "mvgmm") return Setting::MVgmm;
  if (lower == "c-vgmm" || lower == "cvgmm") return Setting::CVgmm;
  if (lower == "c-vgmm+vim" || lower == "cvgmm+vim" || lower == "vim") return Setting::CVgmmVim;
  throw Error("invalid_argument", "unknown setting '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("invalid_config", m); };
  if (!(t_h > 0.0) || !(t_f > 0.0)) fail("t_h and t_f must be positive");
  if (!(rate > 0.0)) fail("rate must be positive");
  if (horizons.empty()) fail("at least one evaluation horizon is required");
  for (double h : horizons) {
    if (!(h > 0.0) || h > t_f + 1e-12) fail("horizons must lie in (0, t_f]");
    if (std::lround(h * rate) < 1) fail("horizon shorter than one sample");
  }
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (top_k < 1 || top_k > kNumManeuvers) fail("top_k must lie in [1, 10]");
  if (!(distance_floor > 0.0)) fail("distance_floor must be positive");
  if (folds < 1) fail("folds must be >= 1");
  if (hmm_stride < 1 || vgmm_stride < 1 || eval_stride < 1) fail("strides must be >= 1");
  if (hmm_states < 1 || hmm_mixes < 1 || hmm_max_iter < 0) fail("invalid HMM hyperparameters");
  if (class_components < 1 || monolithic_components < 1 || vgmm_max_iter < 0) {
    fail("invalid VGMM hyperparameters");
  }
  if (lambda_search && lambda_grid.empty()) fail("lambda_grid is empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) fail("lambda_grid entries must be >= 0");
  }
  if (!(imm.self_transition > 0.0 && imm.self_transition <= 1.0)) {
    fail("imm self_transition must lie in (0, 1]");
  }
}

json to_json(const ExperimentConfig& c) {
  json j{{"output_dir", c.output_dir},
         {"rate", c.rate},
         {"t_h", c.t_h},
         {"t_f", c.t_f},
         {"horizons", c.horizons},
         {"lambda", c.lambda},
         {"top_k", c.top_k},
         {"distance_floor", c.distance_floor},
         {"lambda_search", c.lambda_search},
         {"lambda_grid", c.lambda_grid},
         {"validation_scenes", c.validation_scenes},
         {"seed", c.seed},
         {"folds", c.folds},
         {"augment", c.augment},
         {"hmm_stride", c.hmm_stride},
         {"vgmm_stride", c.vgmm_stride},
         {"eval_stride", c.eval_stride},
         {"hmm_max_per_class", c.hmm_max_per_class},
         {"vgmm_max_per_class", c.vgmm_max_per_class},
         {"monolithic_max_rows", c.monolithic_max_rows},
         {"hmm",
          {{"states", c.hmm_states},
           {"mixes", c.hmm_mixes},
           {"max_iter", c.hmm_max_iter},
           {"tol", c.hmm_tol}}},
         {"vgmm",
          {{"class_components", c.class_components},
           {"monolithic_components", c.monolithic_components},
           {"max_iter", c.vgmm_max_iter},
           {"tol", c.vgmm_tol},
           {"train_monolithic", c.train_monolithic}}},
         {"imm",
          {{"self_transition", c.imm.self_transition},
           {"sigma_accel", c.imm.noise.sigma_accel},
           {"sigma_jerk", c.imm.noise.sigma_jerk},
           {"sigma_accel_ctrv", c.imm.noise.sigma_accel_ctrv},
           {"sigma_yaw_accel", c.imm.noise.sigma_yaw_accel},
           {"measurement_var", c.imm.noise.measurement_var}}},
         {"measure_time", c.measure_time}};
  if (!c.data_path.empty()) j["data_path"] = c.data_path;
  if (c.dataset) j["dataset"] = to_json(*c.dataset);
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.output_dir = j.value("output_dir", c.output_dir);
    c.data_path = j.value("data_path", c.data_path);
    c.rate = j.value("rate", c.rate);
    c.t_h = j.value("t_h", c.t_h);
    c.t_f = j.value("t_f", c.t_f);
    if (j.contains("horizons")) c.horizons = j["horizons"].get<std::vector<double>>();
    c.lambda = j.value("lambda", c.lambda);
    c.top_k = j.value("top_k", c.top_k);
    c.distance_floor = j.value("distance_floor", c.distance_floor);
    c.lambda_search = j.value("lambda_search", c.lambda_search);
    if (j.contains("lambda_grid")) c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
    c.validation_scenes = j.value("validation_scenes", c.validation_scenes);
    c.seed = j.value("seed", c.seed);
    c.folds = j.value("folds", c.folds);
    c.augment = j.value("augment", c.augment);
    c.hmm_stride = j.value("hmm_stride", c.hmm_stride);
    c.vgmm_stride = j.value("vgmm_stride", c.vgmm_stride);
    c.eval_stride = j.value("eval_stride", c.eval_stride);
    c.hmm_max_per_class = j.value("hmm_max_per_class", c.hmm_max_per_class);
    c.vgmm_max_per_class = j.value("vgmm_max_per_class", c.vgmm_max_per_class);
    c.monolithic_max_rows = j.value("monolithic_max_rows", c.monolithic_max_rows);
    if (j.contains("hmm")) {
      const auto& h = j["hmm"];
      c.hmm_states = h.value("states", c.hmm_states);
      c.hmm_mixes = h.value("mixes", c.hmm_mixes);
      c.hmm_max_iter = h.value("max_iter", c.hmm_max_iter);
      c.hmm_tol = h.value("tol", c.hmm_tol);
    }
    if (j.contains("vgmm")) {
      const auto& v = j["vgmm"];
      c.class_components = v.value("class_components", c.class_components);
      c.monolithic_components = v.value("monolithic_components", c.monolithic_components);
      c.vgmm_max_iter = v.value("max_iter", c.vgmm_max_iter);
      c.vgmm_tol = v.value("tol", c.vgmm_tol);
      c.train_monolithic = v.value("train_monolithic", c.train_monolithic);
    }
    if (j.contains("imm")) {
      const auto& m = j["imm"];
      c.imm.self_transition = m.value("self_transition", c.imm.self_transition);
      c.imm.noise.sigma_accel = m.value("sigma_accel", c.imm.noise.sigma_accel);
      c.imm.noise.sigma_jerk = m.value("sigma_jerk", c.imm.noise.sigma_jerk);
      c.imm.noise.sigma_accel_ctrv = m.value("sigma_accel_ctrv", c.imm.noise.sigma_accel_ctrv);
      c.imm.noise.sigma_yaw_accel = m.value("sigma_yaw_accel", c.imm.noise.sigma_yaw_accel);
      c.imm.noise.measurement_var = m.value("measurement_var", c.imm.noise.measurement_var);
    }
    c.measure_time = j.value("measure_time", c.measure_time);
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("experiment config: ") + e.what());
  }
  if (j.contains("dataset")) {
    json d = j["dataset"];
    if (!d.contains("master_seed")) d["master_seed"] = c.seed;
    c.dataset = dataset_spec_from_json(d);
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_json_file(path));
}

std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

int fold_of(std::size_t scene_index, int folds) {
  return static_cast<int>(scene_index % static_cast<std::size_t>(std::max(1, folds)));
}

namespace {

template <typename T>
std::vector<T> even_subsample(std::vector<T> items, std::size_t cap) {
  if (cap == 0 || items.size() <= cap) return items;
  std::vector<T> out;
  out.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) out.push_back(std::move(items[i * items.size() / cap]));
  return out;
}

bool in_training(std::size_t scene_index, const ExperimentConfig& cfg,
                 std::optional<int> held_out) {
  return !held_out || cfg.folds <= 1 || fold_of(scene_index, cfg.folds) != *held_out;
}

bool in_evaluation(std::size_t scene_index, const ExperimentConfig& cfg, std::optional<int> fold) {
  return !fold || cfg.folds <= 1 || fold_of(scene_index, cfg.folds) == *fold;
}

}  // namespace

ModelBundle train_all(const ExperimentConfig& cfg, const Dataset& data,
                      std::optional<int> held_out_fold) {
  cfg.validate();
  std::array<std::vector<HistorySnippet>, kNumManeuvers> hmm_data;
  std::array<std::vector<PredictionWindow>, kNumManeuvers> vgmm_data;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (!in_training(s, cfg, held_out_fold)) continue;
    const auto& scene = data[s];
    const std::vector<UniformTrack> tracks =
        cfg.augment ? augment(scene.tracks) : scene.tracks;
    for (const auto& track : tracks) {
      for (auto& sn : extract_snippets(track, cfg.t_h, cfg.hmm_stride)) {
        if (sn.label) hmm_data[index_of(*sn.label)].push_back(std::move(sn));
      }
      for (auto& w : extract_prediction_windows(track, cfg.t_h, cfg.t_f, cfg.vgmm_stride)) {
        if (w.history.label) vgmm_data[index_of(*w.history.label)].push_back(std::move(w));
      }
    }
  }
  std::string missing;
  for (auto m : kAllManeuvers) {
    if (hmm_data[index_of(m)].empty() || vgmm_data[index_of(m)].empty()) {
      missing += (missing.empty() ? "" : ", ") + std::string(to_string(m));
    }
  }
  if (!missing.empty()) {
    throw Error("insufficient_training_data", "no training snippets for: " + missing);
  }

  ModelBundle bundle;
  bundle.imm = cfg.imm;
  bundle.rate = cfg.rate;
  bundle.experiment = to_json(cfg);
  bundle.config_hash = config_hash(cfg);
  const std::uint64_t fold_salt = held_out_fold ? static_cast<std::uint64_t>(*held_out_fold + 1) : 0;

  std::vector<HistorySnippet> all_snippets;
  for (auto& v : hmm_data) {
    v = even_subsample(std::move(v), cfg.hmm_max_per_class);
    all_snippets.insert(all_snippets.end(), v.begin(), v.end());
  }
  HmmTrainOptions hopt;
  hopt.n_states = cfg.hmm_states;
  hopt.n_mix = cfg.hmm_mixes;
  hopt.max_iter = cfg.hmm_max_iter;
  hopt.tol_per_snippet = cfg.hmm_tol;
  hopt.scaler = fit_feature_scaler(all_snippets);
  for (auto m : kAllManeuvers) {
    hopt.seed = mix_seed(cfg.seed, 1000 * fold_salt + 100 + index_of(m));
    bundle.hmms.push_back(hmm_train(hmm_data[index_of(m)], m, hopt));
    log_info("trained HMM for " + std::string(to_string(m)) + " on " +
             std::to_string(hmm_data[index_of(m)].size()) + " snippets");
  }

  std::vector<PredictionWindow> all_windows;
  for (auto m : kAllManeuvers) {
    auto& v = vgmm_data[index_of(m)];
    v = even_subsample(std::move(v), cfg.vgmm_max_per_class);
    bundle.class_models[index_of(m)] = train_probabilistic_model(
        v, m, cfg.class_components, mix_seed(cfg.seed, 1000 * fold_salt + 200 + index_of(m)),
        kDefaultChebDegree, cfg.vgmm_max_iter, cfg.vgmm_tol);
    log_info("trained class VGMM for " + std::string(to_string(m)) + " on " +
             std::to_string(v.size()) + " windows");
    all_windows.insert(all_windows.end(), v.begin(), v.end());
  }
  if (cfg.train_monolithic) {
    all_windows = even_subsample(std::move(all_windows), cfg.monolithic_max_rows);
    bundle.monolithic = train_probabilistic_model(
        all_windows, std::nullopt, cfg.monolithic_components,
        mix_seed(cfg.seed, 1000 * fold_salt + 300), kDefaultChebDegree, cfg.vgmm_max_iter,
        cfg.vgmm_tol);
    log_info("trained monolithic VGMM on " + std::to_string(all_windows.size()) + " windows");
  }
  return bundle;
}

namespace {

struct FrameItem {
  PredictionWindow window;
  bool stop_and_go = false;
  std::string sequence_id;
};

// Windows grouped by (scene, prediction sample), in deterministic order.
std::vector<std::vector<FrameItem>> collect_frames(const ExperimentConfig& cfg, const Dataset& data,
                                                   std::optional<int> fold) {
  std::vector<std::vector<FrameItem>> frames;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (!in_evaluation(s, cfg, fold)) continue;
    const auto& scene = data[s];
    std::map<long, std::vector<FrameItem>> by_time;
    for (const auto& track : scene.tracks) {
      for (auto& w : extract_prediction_windows(track, cfg.t_h, cfg.t_f, cfg.eval_stride)) {
        const long key = std::lround(w.history.t_pred * cfg.rate);
        by_time[key].push_back(
            FrameItem{std::move(w), scene.density == TrafficDensity::StopAndGo, scene.sequence_id});
      }
    }
    for (auto& [key, items] : by_time) frames.push_back(std::move(items));
  }
  return frames;
}

const ProbabilisticModel& class_model(const ModelBundle& bundle, ManeuverClass m) {
  const auto& slot = bundle.class_models[index_of(m)];
  if (!slot) throw Error("missing_model", "bundle has no VGMM for " + std::string(to_string(m)));
  return *slot;
}

struct FrameOutput {
  std::vector<PredictedTrajectory> trajectories;
  std::vector<std::optional<ManeuverClass>> assigned;
};

FrameOutput predict_frame(const ExperimentConfig& cfg, const ModelBundle& bundle,
                          const std::vector<FrameItem>& items, Setting setting, double lambda) {
  FrameOutput out;
  const std::size_t n = items.size();
  out.trajectories.reserve(n);
  out.assigned.assign(n, std::nullopt);
  if (setting == Setting::CVgmmVim) {
    std::vector<VehicleCandidates> cands(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& sn = items[i].window.history;
      const ImmEstimate est = imm_filter_snippet(sn, bundle.rate, bundle.imm);
      const PredictedTrajectory motion = imm_forecast(est, cfg.t_f, bundle.rate, sn.t_pred, bundle.imm);
      cands[i].vehicle_id = sn.vehicle_id;
      cands[i].scores = classify(bundle.hmms, sn, cfg.top_k);
      for (const auto& s : cands[i].scores) {
        cands[i].trajectories.push_back(
            fuse(motion, prob_predict(class_model(bundle, s.maneuver), sn, cfg.t_f, bundle.rate)));
      }
    }
    const EnergyTable table = build_energy_table(cands, lambda, cfg.distance_floor);
    const SceneAssignment a = solve_assignment(table);
    for (std::size_t i = 0; i < n; ++i) {
      out.trajectories.push_back(std::move(cands[i].trajectories[a.choice[i]]));
      out.assigned[i] = cands[i].scores[a.choice[i]].maneuver;
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sn = items[i].window.history;
    const ImmEstimate est = imm_filter_snippet(sn, bundle.rate, bundle.imm);
    switch (setting) {
      case Setting::Imm:
        out.trajectories.push_back(predict_vehicle(bundle, est, sn, ImmOnlyRoute{}, cfg.t_f));
        break;
      case Setting::MVgmm:
        out.trajectories.push_back(predict_vehicle(bundle, est, sn, MonolithicRoute{}, cfg.t_f));
        break;
      case Setting::CVgmm: {
        const auto top = classify(bundle.hmms, sn, 1);
        out.assigned[i] = top.front().maneuver;
        out.trajectories.push_back(predict_vehicle(bundle, est, sn, top.front().maneuver, cfg.t_f));
        break;
      }
      case Setting::CVgmmVim:
        break;
    }
  }
  return out;
}

}  // namespace

SettingRun run_setting(const ExperimentConfig& cfg, const ModelBundle& bundle, const Dataset& data,
                       Setting setting, const EvalOptions& options) {
  cfg.validate();
  if (bundle.rate != cfg.rate) throw Error("invalid_config", "bundle and config sample rates differ");
  if (setting == Setting::MVgmm && !bundle.monolithic) {
    throw Error("missing_model", "bundle has no monolithic VGMM");
  }
  if ((setting == Setting::CVgmm || setting == Setting::CVgmmVim) &&
      bundle.hmms.size() != kNumManeuvers) {
    throw Error("missing_model", "bundle does not hold the 10 maneuver HMMs");
  }
  std::vector<std::size_t> marks;
  for (double h : cfg.horizons) marks.push_back(horizon_index(h, cfg.rate));
  const double lambda = options.lambda.value_or(cfg.lambda);

  SettingRun run;
  run.setting = setting;
  for (const auto& frame : collect_frames(cfg, data, options.fold)) {
    const auto t0 = std::chrono::steady_clock::now();
    FrameOutput out = predict_frame(cfg, bundle, frame, setting, lambda);
    const auto t1 = std::chrono::steady_clock::now();
    if (options.measure_time) {
      run.frame_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const auto& w = frame[i].window;
      SnippetRecord r;
      r.sequence_id = frame[i].sequence_id;
      r.vehicle_id = w.history.vehicle_id;
      r.end_index = w.history.end_index;
      r.t_pred = w.history.t_pred;
      r.stop_and_go = frame[i].stop_and_go;
      r.label = w.history.label;
      r.assigned = out.assigned[i];
      for (std::size_t m : marks) {
        r.predicted.push_back(out.trajectories[i].means.at(m));
        r.predicted_cov.push_back(out.trajectories[i].covariances.at(m));
        r.truth.emplace_back(w.future_x.at(m), w.future_y.at(m));
      }
      run.records.push_back(std::move(r));
      if (options.keep_trajectories) run.trajectories.push_back(std::move(out.trajectories[i]));
    }
  }
  return run;
}

MetricsReport evaluate(const ExperimentConfig& cfg, const SettingRun& run, Subset subset) {
  const auto records = filter_subset(run.records, subset);
  MetricsReport r = compute_report(records, cfg.horizons);
  if (!run.frame_seconds.empty()) r.exec_time = stable_mean(run.frame_seconds);
  return r;
}

AblationResult run_ablation(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.validate();
  AblationResult result;
  for (std::size_t s = 0; s < kAllSettings.size(); ++s) result.runs[s].setting = kAllSettings[s];
  Dataset validation;
  if (cfg.lambda_search) {
    if (!cfg.dataset) throw Error("invalid_config", "lambda_search needs a dataset spec");
    DatasetSpec spec = *cfg.dataset;
    spec.n_scenes = cfg.validation_scenes;
    spec.master_seed = mix_seed(cfg.seed, 0x7A11DULL);
    validation = normalize_dataset(generate_dataset(spec));
  }
  const int folds = std::max(1, cfg.folds);
  for (int f = 0; f < folds; ++f) {
    const std::optional<int> fold = folds > 1 ? std::optional<int>(f) : std::nullopt;
    const ModelBundle bundle = train_all(cfg, data, fold);
    const double lambda = cfg.lambda_search ? select_lambda(cfg, bundle, validation) : cfg.lambda;
    result.lambdas.push_back(lambda);
    for (std::size_t s = 0; s < kAllSettings.size(); ++s) {
      if (kAllSettings[s] == Setting::MVgmm && !bundle.monolithic) continue;
      EvalOptions opt;
      opt.fold = fold;
      opt.measure_time = cfg.measure_time;
      opt.lambda = lambda;
      SettingRun part = run_setting(cfg, bundle, data, kAllSettings[s], opt);
      auto& dst = result.runs[s];
      dst.records.insert(dst.records.end(), part.records.begin(), part.records.end());
      dst.frame_seconds.insert(dst.frame_seconds.end(), part.frame_seconds.begin(),
                               part.frame_seconds.end());
    }
    log_info("fold " + std::to_string(f + 1) + "/" + std::to_string(folds) + " evaluated");
  }
  return result;
}

namespace {

std::string cell(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

std::string horizon_label(double h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%gs", h);
  return buf;
}

std::string header(std::span<const std::string> names) {
  std::string s = "metric";
  for (const auto& n : names) s += "," + n;
  return s + "\n";
}

}  // namespace

std::string metrics_csv(std::span<const MetricsReport> reports,
                        std::span<const std::string> column_names) {
  if (reports.size() != column_names.size()) {
    throw Error("invalid_argument", "one column name per report is required");
  }
  std::string out = header(column_names);
  const std::size_t nh = reports.empty() ? 0 : reports.front().horizons.size();
  auto row = [&](const std::string& name, auto getter) {
    out += name;
    for (const auto& r : reports) out += "," + cell(getter(r));
    out += "\n";
  };
  for (std::size_t h = 0; h < nh; ++h) {
    row("mean_ae_" + horizon_label(reports.front().horizons[h]),
        [h](const MetricsReport& r) { return std::optional<double>(r.mean_ae.at(h)); });
  }
  for (std::size_t h = 0; h < nh; ++h) {
    row("median_ae_" + horizon_label(reports.front().horizons[h]),
        [h](const MetricsReport& r) { return std::optional<double>(r.median_ae.at(h)); });
  }
  row("accuracy_pct", [](const MetricsReport& r) { return r.accuracy; });
  row("exec_time_s", [](const MetricsReport& r) { return r.exec_time; });
  return out;
}

std::string axis_csv(std::span<const MetricsReport> reports,
                     std::span<const std::string> column_names) {
  std::string out = header(column_names);
  const std::size_t nh = reports.empty() ? 0 : reports.front().horizons.size();
  for (int axis = 0; axis < 2; ++axis) {
    for (std::size_t h = 0; h < nh; ++h) {
      out += std::string(axis == 0 ? "mean_ae_x_" : "mean_ae_y_") +
             horizon_label(reports.front().horizons[h]);
      for (const auto& r : reports) {
        out += "," + cell(axis == 0 ? r.mean_ae_x.at(h) : r.mean_ae_y.at(h));
      }
      out += "\n";
    }
  }
  return out;
}

void write_ablation_reports(const ExperimentConfig& cfg, const AblationResult& result,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  for (auto s : kAllSettings) names.emplace_back(to_string(s));
  for (auto subset : {Subset::All, Subset::OvertakeCutIn, Subset::StopAndGo}) {
    std::vector<MetricsReport> reports;
    for (const auto& run : result.runs) reports.push_back(evaluate(cfg, run, subset));
    const std::string stem = subset == Subset::All
                                 ? std::string("ablation")
                                 : "ablation_" + std::string(to_string(subset));
    write_text_file(dir / (stem + ".csv"), metrics_csv(reports, names));
    if (subset == Subset::All) write_text_file(dir / "axis_breakdown.csv", axis_csv(reports, names));
  }
}

double select_lambda(const ExperimentConfig& cfg, const ModelBundle& bundle, const Dataset& data) {
  if (cfg.lambda_grid.empty()) return cfg.lambda;
  double best_lambda = cfg.lambda_grid.front();
  double best_acc = -1.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (double l : cfg.lambda_grid) {
    EvalOptions opt;
    opt.lambda = l;
    const SettingRun run = run_setting(cfg, bundle, data, Setting::CVgmmVim, opt);
    const MetricsReport r = evaluate(cfg, run);
    const double acc = r.accuracy.value_or(0.0);
    const double err = r.mean_ae.empty() ? 0.0 : r.mean_ae.back();
    log_info("lambda " + std::to_string(l) + ": accuracy " + std::to_string(acc) + "%, error " +
             std::to_string(err) + " m");
    if (acc > best_acc || (acc == best_acc && err < best_err)) {
      best_lambda = l;
      best_acc = acc;
      best_err = err;
    }
  }
  return best_lambda;
}

namespace {

json point(const Eigen::Vector2d& p) { return json::array({p.x(), p.y()}); }

Eigen::Vector2d point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

json record_to_json(const SnippetRecord& r, Setting setting, const PredictedTrajectory* trajectory) {
  json pred = json::array();
  json truth = json::array();
  for (const auto& p : r.predicted) pred.push_back(point(p));
  for (const auto& p : r.truth) truth.push_back(point(p));
  json cov = json::array();
  for (const auto& c : r.predicted_cov) cov.push_back(json::array({c(0, 0), c(0, 1), c(1, 1)}));
  json j{{"setting", std::string(to_string(setting))},
         {"sequence_id", r.sequence_id},
         {"vehicle_id", r.vehicle_id},
         {"end_index", r.end_index},
         {"t_pred", r.t_pred},
         {"stop_and_go", r.stop_and_go},
         {"label", r.label ? json(std::string(to_string(*r.label))) : json()},
         {"assigned", r.assigned ? json(std::string(to_string(*r.assigned))) : json()},
         {"horizon_pred", pred},
         {"horizon_cov", cov},
         {"horizon_truth", truth}};
  if (trajectory) {
    json means = json::array();
    json covs = json::array();
    for (std::size_t k = 0; k < trajectory->horizon_steps(); ++k) {
      means.push_back(point(trajectory->means[k]));
      const auto& c = trajectory->covariances[k];
      covs.push_back(json::array({c(0, 0), c(0, 1), c(1, 1)}));
    }
    j["trajectory"] = {{"rate", trajectory->rate}, {"means", means}, {"covariances", covs}};
  }
  return j;
}

SnippetRecord record_from_json(const json& j) {
  try {
    SnippetRecord r;
    r.sequence_id = j.at("sequence_id").get<std::string>();
    r.vehicle_id = j.at("vehicle_id").get<int>();
    r.end_index = j.at("end_index").get<std::size_t>();
    r.t_pred = j.at("t_pred").get<double>();
    r.stop_and_go = j.value("stop_and_go", false);
    auto maneuver = [](const json& v) -> std::optional<ManeuverClass> {
      if (v.is_null()) return std::nullopt;
      auto m = parse_maneuver(v.get<std::string>());
      if (!m) throw Error("invalid_dataset", "unknown maneuver in predictions");
      return m;
    };
    r.label = maneuver(j.at("label"));
    r.assigned = maneuver(j.at("assigned"));
    for (const auto& p : j.at("horizon_pred")) r.predicted.push_back(point_from(p));
    for (const auto& p : j.at("horizon_truth")) r.truth.push_back(point_from(p));
    if (j.contains("horizon_cov")) {
      for (const auto& c : j["horizon_cov"]) {
        Eigen::Matrix2d m;
        m << c.at(0).get<double>(), c.at(1).get<double>(), c.at(1).get<double>(), c.at(2).get<double>();
        r.predicted_cov.push_back(m);
      }
    }
    return r;
  } catch (const json::exception& e) {
    throw Error("invalid_dataset", std::string("malformed prediction record: ") + e.what());
  }
}

std::string predictions_jsonl(const SettingRun& run) {
  std::string out;
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const PredictedTrajectory* t = i < run.trajectories.size() ? &run.trajectories[i] : nullptr;
    out += record_to_json(run.records[i], run.setting, t).dump() + "\n";
  }
  return out;
}

SettingRun read_predictions_jsonl(std::istream& in) {
  SettingRun run;
  std::optional<Setting> setting;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("invalid_dataset", "predictions line " + std::to_string(lineno) + ": " + e.what());
    }
    const Setting s = parse_setting(j.at("setting").get<std::string>());
    if (setting && *setting != s) throw Error("invalid_dataset", "predictions mix several settings");
    setting = s;
    run.records.push_back(record_from_json(j));
  }
  run.setting = setting.value_or(Setting::Imm);
  return run;
}

}  // namespace fwp
