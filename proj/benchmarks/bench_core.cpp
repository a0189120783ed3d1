#include <benchmark/benchmark.h>

#include "fwp/experiment.hpp"
#include "fwp/rng.hpp"

namespace {

using namespace fwp;

struct Fixture {
  ExperimentConfig cfg;
  ModelBundle bundle;
  std::vector<PredictionWindow> windows;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    DatasetSpec spec;
    spec.n_scenes = 12;
    spec.master_seed = 99;
    spec.scene.class_mix.fill(0.1);
    x.cfg.dataset = spec;
    x.cfg.hmm_max_iter = 10;
    x.cfg.hmm_max_per_class = 100;
    x.cfg.vgmm_max_iter = 50;
    x.cfg.monolithic_components = 40;
    x.cfg.monolithic_max_rows = 2000;
    const Dataset data = normalize_dataset(generate_dataset(spec));
    x.bundle = train_all(x.cfg, data);
    for (const auto& t : data.front().tracks) {
      for (auto& w : extract_prediction_windows(t, x.cfg.t_h, x.cfg.t_f, 15)) x.windows.push_back(std::move(w));
    }
    return x;
  }();
  return f;
}

void BM_ImmStep(benchmark::State& state) {
  ImmEstimate est = imm_init({0.0, 0.0}, {10.0, 0.0});
  double t = 0.0;
  for (auto _ : state) {
    t += 1.0 / 15.0;
    est = imm_step(est, {10.0 * t, 0.05 * std::sin(t)}, 1.0 / 15.0);
    benchmark::DoNotOptimize(est);
  }
}
BENCHMARK(BM_ImmStep);

void BM_ImmFilterSnippet(benchmark::State& state) {
  const auto& f = fixture();
  const auto& sn = f.windows.front().history;
  for (auto _ : state) benchmark::DoNotOptimize(imm_filter_snippet(sn, f.bundle.rate, f.bundle.imm));
}
BENCHMARK(BM_ImmFilterSnippet);

void BM_HmmClassify(benchmark::State& state) {
  const auto& f = fixture();
  const auto& sn = f.windows.front().history;
  for (auto _ : state) benchmark::DoNotOptimize(classify(f.bundle.hmms, sn, 3));
}
BENCHMARK(BM_HmmClassify);

void BM_PredictVehicle(benchmark::State& state) {
  const auto& f = fixture();
  const auto& sn = f.windows.front().history;
  const auto est = imm_filter_snippet(sn, f.bundle.rate, f.bundle.imm);
  const PredictionRoute route = state.range(0) == 0 ? PredictionRoute(ImmOnlyRoute{})
                                : state.range(0) == 1 ? PredictionRoute(MonolithicRoute{})
                                                      : PredictionRoute(ManeuverClass::OvertakeLeft);
  for (auto _ : state) benchmark::DoNotOptimize(predict_vehicle(f.bundle, est, sn, route, f.cfg.t_f));
}
BENCHMARK(BM_PredictVehicle)->Arg(0)->Arg(1)->Arg(2)->ArgNames({"route"});

EnergyTable random_table(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd hmm(n, k), ego(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      hmm(i, c) = rng.uniform(0, 40);
      ego(i, c) = 1.0 / rng.uniform(0.5, 40);
    }
  }
  std::vector<double> vi(n * n * k * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          const double v = 1.0 / rng.uniform(0.5, 20);
          vi[((i * n + j) * k + a) * k + b] = v;
          vi[((j * n + i) * k + b) * k + a] = v;
        }
      }
    }
  }
  return EnergyTable(n, k, 2.0, hmm, ego, vi);
}

void BM_SolveAssignment(benchmark::State& state) {
  const auto table = random_table(static_cast<std::size_t>(state.range(0)), 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(table));
}
BENCHMARK(BM_SolveAssignment)->Arg(2)->Arg(6)->Arg(10)->ArgNames({"vehicles"});

void BM_EnumerateAssignment(benchmark::State& state) {
  const auto table = random_table(static_cast<std::size_t>(state.range(0)), 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_assignment(table));
}
BENCHMARK(BM_EnumerateAssignment)->Arg(2)->Arg(6)->Arg(10)->ArgNames({"vehicles"});

}  // namespace

BENCHMARK_MAIN();
