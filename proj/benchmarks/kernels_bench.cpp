// Serial references against their optimized counterparts.
//
//   episode driver: serial_eval_driver vs parallel_eval_driver (OpenMP)
//   network:        reference_matmul / reference_forward vs Eigen

#include <random>

#include <benchmark/benchmark.h>

#include "stitch/bench/parallel.hpp"
#include "stitch/env/expert.hpp"
#include "stitch/nn/dense_net.hpp"

using namespace stitch;

namespace {

const EnvSpec& grasp_spec() {
  static const EnvSpec spec = EnvSpec::single(default_config(Subtask::Grasp));
  return spec;
}

bench::EpisodeOutcome expert_episode(const bench::EpisodeJob& job) {
  const ScriptedExpert expert;
  SutureEnv env = grasp_spec().make();
  env.reset(job.reset_seed);
  bench::EpisodeOutcome out{job.id, job.seed, job.episode};
  for (;;) {
    const StepResult r = env.step(expert.act(env));
    ++out.steps;
    out.length_mm += r.info.applied_translation_mm;
    if (r.terminated || r.truncated) {
      out.success = r.info.is_success;
      break;
    }
  }
  return out;
}

const std::vector<bench::EpisodeJob>& jobs() {
  static const auto j = bench::make_jobs({0, 1, 2, 3, 4, 5, 6, 7}, 16, Subtask::Grasp);
  return j;
}

void BM_EnvStep(benchmark::State& state) {
  SutureEnv env = grasp_spec().make();
  env.reset(0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Action a{};
  std::uint64_t resets = 0;
  for (auto _ : state) {
    for (double& v : a) v = u(rng);
    const StepResult r = env.step(a);
    if (r.terminated || r.truncated) env.reset(++resets);
    benchmark::DoNotOptimize(r.reward);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvStep);

void BM_EpisodesSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(bench::serial_eval_driver(jobs(), expert_episode));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(jobs().size()));
}
BENCHMARK(BM_EpisodesSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_EpisodesOpenMP(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bench::parallel_eval_driver(jobs(), workers, expert_episode));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(jobs().size()));
}
BENCHMARK(BM_EpisodesOpenMP)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

template <typename T>
nn::Matrix<T> random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n(rng));
  return m;
}

void BM_MatmulReference(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto a = random_matrix<float>(batch, 256, 1);
  const auto b = random_matrix<float>(256, 256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::reference_matmul(a, b));
  state.SetItemsProcessed(state.iterations() * batch * 256 * 256);
}
BENCHMARK(BM_MatmulReference)->Arg(1)->Arg(256);

void BM_MatmulEigen(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto a = random_matrix<float>(batch, 256, 1);
  const auto b = random_matrix<float>(256, 256, 2);
  for (auto _ : state) {
    nn::Matrix<float> c = a * b;
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * batch * 256 * 256);
}
BENCHMARK(BM_MatmulEigen)->Arg(1)->Arg(256);

nn::DenseNet<float> actor_net() {
  auto net = nn::DenseNet<float>::mlp(58, 7, nn::Head::Tanh, 256, 4);
  std::mt19937_64 rng(3);
  net.initialize(rng);
  return net;
}

void BM_ForwardReference(benchmark::State& state) {
  const auto net = actor_net();
  const auto x = random_matrix<float>(static_cast<int>(state.range(0)), 58, 4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::reference_forward(net, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardReference)->Arg(1)->Arg(256);

void BM_ForwardEigen(benchmark::State& state) {
  const auto net = actor_net();
  const auto x = random_matrix<float>(static_cast<int>(state.range(0)), 58, 4);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardEigen)->Arg(1)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
