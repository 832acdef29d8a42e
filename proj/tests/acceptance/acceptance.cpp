// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--configs DIR] [--workdir DIR]
//
// Exit status: 0 when every selected criterion passes, 1 otherwise, 77 when
// the only failure is the multi-worker speedup on a host with fewer than 8
// hardware threads (reported to ctest as skipped).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stitch/bench/experiment.hpp"
#include "stitch/demo/dmp.hpp"
#include "stitch/env/expert.hpp"
#include "stitch/nn/dense_net.hpp"

using namespace stitch;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kHardwareSkip = 77;

struct Verdict {
  bool pass = false;
  std::string detail;
  bool hardware_limited = false;
};

struct Context {
  fs::path configs;
  fs::path workdir;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bench::ExperimentConfig experiment(const Context& ctx, const std::string& name, const std::string& out) {
  bench::ExperimentConfig c = bench::load_experiment(ctx.configs / name);
  c.out = ctx.workdir / out;
  fs::remove_all(c.out);
  return c;
}

// ---------------------------------------------------------------------------
// 1. Gradients of 4x256 nets against central differences.

Verdict gradient_check(const Context&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  const nn::Head heads[] = {nn::Head::Linear, nn::Head::Tanh, nn::Head::Softmax};
  for (int trial = 0; trial < 10; ++trial) {
    auto net = nn::DenseNet<double>::mlp(12, 5, heads[trial % 3], 256, 4);
    net.initialize(rng);
    nn::Matrix<double> x(6, 12), up(6, 5);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    for (int i = 0; i < up.size(); ++i) up.data()[i] = n(rng);
    auto loss = [&] { return (net.forward(x).array() * up.array()).sum(); };
    nn::DenseNet<double>::Cache cache;
    net.forward(x, cache);
    const auto grads = net.backward(cache, up);
    // 100 parameters per net, spread over every layer's weights and biases.
    for (int s = 0; s < 100; ++s) {
      const std::size_t layer = static_cast<std::size_t>(s) % net.params().size();
      const bool bias = s % 5 == 4;
      auto& pl = net.params()[layer];
      double* p = bias ? pl.bias.data() : pl.weight.data();
      const double* g = bias ? grads[layer].bias.data() : grads[layer].weight.data();
      const Eigen::Index n_p = bias ? pl.bias.size() : pl.weight.size();
      const Eigen::Index i = std::uniform_int_distribution<Eigen::Index>(0, n_p - 1)(rng);
      const double keep = p[i];
      p[i] = keep + h;
      const double lp = loss();
      p[i] = keep - h;
      const double lm = loss();
      p[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double an = g[i];
      const double scale = std::max(std::abs(fd), std::abs(an));
      // Both vanish for parameters feeding dead units.
      const double rel = scale < 1e-10 ? 0.0 : std::abs(fd - an) / scale;
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && t < 60.0,
          fmt("max relative error %.3g over %d parameters of 10 nets (limit 1e-4), %.1f s (limit 60 s)", worst,
              checked, t)};
}

// ---------------------------------------------------------------------------
// 2. compute_reward against a from-scratch evaluator on raw 7-vectors.

struct OracleErrors {
  double trans;
  double angle_deg;
};

OracleErrors oracle_errors(const Goal& a, const Goal& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  // Relative rotation conj(qa) * qb, quaternions stored (w, x, y, z).
  const double aw = a[3], ax = -a[4], ay = -a[5], az = -a[6];
  const double bw = b[3], bx = b[4], by = b[5], bz = b[6];
  const double w = aw * bw - ax * bx - ay * by - az * bz;
  const double x = aw * bx + ax * bw + ay * bz - az * by;
  const double y = aw * by - ax * bz + ay * bw + az * bx;
  const double z = aw * bz + ax * by - ay * bx + az * bw;
  const double angle = 2.0 * std::atan2(std::sqrt(x * x + y * y + z * z), std::abs(w));
  return {std::sqrt(dx * dx + dy * dy + dz * dz), angle * 180.0 / 3.14159265358979323846};
}

Verdict reward_oracle(const Context&) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_quat = [&] { return Quat(n(rng), n(rng), n(rng), n(rng)).normalized(); };
  int sparse_mismatch = 0, successes = 0;
  double dense_err = 0.0;
  const int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const ScenarioConfig cfg = default_config(kAllSubtasks[static_cast<std::size_t>(i) % kNumSubtasks]);
    Pose d{Vec3(n(rng), n(rng), n(rng)) * 20.0, random_quat()};
    Pose a;
    if (i % 4 == 0) {
      a = Pose{Vec3(n(rng), n(rng), n(rng)) * 20.0, random_quat()};
    } else {
      // Near the thresholds so both outcomes occur.
      const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
      const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
      a.position = d.position + dir * (2.0 * cfg.success_trans_mm * u(rng));
      a.orientation = (d.orientation * rotation_exp(axis * (2.0 * cfg.success_angle_deg * u(rng)))).normalized();
    }
    const Goal ga = to_goal(a), gd = to_goal(d);
    const OracleErrors e = oracle_errors(ga, gd);
    const double sparse_oracle = (e.trans <= cfg.success_trans_mm && e.angle_deg <= cfg.success_angle_deg) ? 0.0 : -1.0;
    const double dense_oracle = -(e.trans / 100.0 + e.angle_deg / 10.0);
    successes += sparse_oracle == 0.0;
    if (compute_reward(ga, gd, RewardMode::Sparse, cfg.success_trans_mm, cfg.success_angle_deg) != sparse_oracle)
      ++sparse_mismatch;
    dense_err = std::max(dense_err, std::abs(compute_reward(ga, gd, RewardMode::Dense, cfg.success_trans_mm,
                                                            cfg.success_angle_deg) -
                                             dense_oracle));
  }
  return {sparse_mismatch == 0 && dense_err <= 1e-12,
          fmt("%d pairs (%d within thresholds): %d sparse mismatches, max dense error %.3g (limit 1e-12)", pairs,
              successes, sparse_mismatch, dense_err)};
}

// ---------------------------------------------------------------------------
// 3. Hindsight relabeling on 100 random-action episodes.

Verdict her_invariants(const Context&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> len_dist(1, 120);
  int bad_count = 0, bad_source = 0, bad_reward = 0, relabeled_successes = 0;
  std::size_t total = 0;
  for (int e = 0; e < 100; ++e) {
    const ScenarioConfig cfg = default_config(kAllSubtasks[static_cast<std::size_t>(e) % kNumSubtasks]);
    SutureEnv env(cfg);
    Observation obs = env.reset(static_cast<std::uint64_t>(e));
    const int length = len_dist(rng);
    std::vector<agents::Transition> ep;
    for (int t = 0; t < length; ++t) {
      Action a;
      for (double& v : a) v = u(rng);
      // Creep so later achieved goals sometimes sit within thresholds.
      for (int k = 0; k < 6; ++k) a[k] *= 0.05;
      const StepResult r = env.step(a);
      ep.push_back({obs.vector, a, r.reward, r.obs.vector, r.terminated, r.truncated, r.obs.achieved_goal,
                    obs.desired_goal});
      obs = r.obs;
      if (r.terminated || r.truncated) break;
    }
    auto reward = [&](const Goal& a, const Goal& d) { return env.goal_reward(a, d); };
    auto success = [&](const Goal& a, const Goal& d) { return env.goal_success(a, d); };
    const auto v = agents::her_relabel(ep, 3, reward, success, rng);
    total += v.size();
    if (v.size() != 3 * ep.size()) ++bad_count;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const int own = static_cast<int>(i / 3);
      // goal_source indexes states; state own+1 is this transition's next state.
      if (v[i].goal_source <= own ||
          v[i].desired_goal != ep[static_cast<std::size_t>(v[i].goal_source - 1)].achieved_goal)
        ++bad_source;
      const bool reached = success(v[i].achieved_goal, v[i].desired_goal);
      if (reached) ++relabeled_successes;
      if (reached != (v[i].reward == 0.0) || reached != v[i].done) ++bad_reward;
    }
  }
  const double t = seconds_since(t0);
  return {bad_count == 0 && bad_source == 0 && bad_reward == 0 && relabeled_successes > 0 && t < 60.0,
          fmt("%zu relabels: %d count errors, %d goals not from later states, %d success/reward mismatches "
              "(%d relabeled successes), %.1f s",
              total, bad_count, bad_source, bad_reward, relabeled_successes, t)};
}

// ---------------------------------------------------------------------------
// 4-7. Scaled training results.

Verdict grasp_td3_her_bc(const Context& ctx) {
  const auto cfg = experiment(ctx, "grasp_td3_her_bc.json", "c4_grasp_td3_her_bc");
  const auto t0 = Clock::now();
  const bench::RunReport r = bench::run_experiment(cfg, bench::Command::Train, &std::cerr);
  const bench::MeanStd s = r.rows.at(0).success();
  return {s.mean >= 0.8, fmt("success %s over %zu seeds x %d episodes (need >= 0.80), %.0f s",
                             bench::format_cell(s).c_str(), cfg.seeds.size(), cfg.episodes, seconds_since(t0))};
}

Verdict grasp_td3(const Context& ctx) {
  const auto cfg = experiment(ctx, "grasp_td3.json", "c5_grasp_td3");
  const auto t0 = Clock::now();
  const bench::RunReport r = bench::run_experiment(cfg, bench::Command::Train, &std::cerr);
  const bench::MeanStd s = r.rows.at(0).success();
  return {s.mean <= 0.05, fmt("success %s without HER or BC (need <= 0.05), %.0f s", bench::format_cell(s).c_str(),
                              seconds_since(t0))};
}

Verdict demo_count_trend(const Context& ctx) {
  const auto cfg = experiment(ctx, "bench_grasp_lambda08.json", "c6_bench_lambda08");
  const auto t0 = Clock::now();
  const bench::RunReport r = bench::run_experiment(cfg, bench::Command::Bench, &std::cerr);
  double s10 = -1, s30 = -1;
  for (const auto& row : r.rows) {
    std::string demos, lambda;
    for (const auto& [k, v] : row.params) (k == "demos" ? demos : k == "lambda" ? lambda : demos) = v;
    if (lambda != "0.8") continue;
    if (demos == "10") s10 = row.success().mean;
    if (demos == "30") s30 = row.success().mean;
  }
  const double t = seconds_since(t0);
  return {s10 >= 0 && s30 >= s10 + 0.10 && t <= 3600.0,
          fmt("lambda 0.8: success %.2f with 30 demos vs %.2f with 10 (need +0.10), %.0f s", s30, s10, t)};
}

Verdict hierarchy_trend(const Context& ctx) {
  const auto cfg = experiment(ctx, "hier_grasp_place.json", "c7_hier_grasp_place");
  const auto t0 = Clock::now();
  const bench::RunReport r = bench::run_experiment(cfg, bench::Command::HierEval, &std::cerr);
  double her = -1, her_bc = -1, hier = -1;
  int episodes = 0;
  for (const auto& row : r.rows) {
    if (row.label == "single_td3_her") her = row.success().mean;
    if (row.label == "single_td3_her_bc") her_bc = row.success().mean;
    if (row.label == "hierarchical") {
      hier = row.success().mean;
      for (const auto& s : row.seeds) episodes += s.episodes;
    }
  }
  return {episodes >= 100 && hier >= her_bc + 0.10 && her >= 0 && her <= 0.05,
          fmt("grasp->place over %d episodes: hierarchical %.2f, single TD3+HER+BC %.2f, single TD3+HER %.2f "
              "(need hier >= single BC + 0.10, single HER <= 0.05), %.0f s",
              episodes, hier, her_bc, her, seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 8. DMP fidelity and demo replay.

double min_jerk(double s) { return s * s * s * (10 - 15 * s + 6 * s * s); }

Verdict dmp_fidelity(const Context&) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_rmse = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 p0(20 * u(rng), 20 * u(rng), 20 * u(rng));
    const Vec3 p1 = p0 + Vec3(30 * u(rng), 30 * u(rng), 30 * u(rng));
    const Vec3 r1(40 * u(rng), 40 * u(rng), 40 * u(rng));
    demo::DemoTrajectory t;
    const int n = 151;
    for (int i = 0; i < n; ++i) {
      const double s = min_jerk(static_cast<double>(i) / (n - 1));
      t.push_back(0.02 * i, Pose{p0 + s * (p1 - p0), rotation_exp(s * r1)}, 1.0);
    }
    const demo::DMPModel m = demo::dmp_fit(t);
    const demo::DemoTrajectory r = demo::dmp_rollout(m, t.pose.front(), t.pose.back(), t.duration(), t.dt());
    for (int d = 0; d < 6; ++d) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (d < 3) {
          a.push_back(t.pose[i].position[d]);
          b.push_back(r.pose[i].position[d]);
        } else {
          a.push_back(demo::unwrapped_log(t.pose.front().orientation.inverse() * t.pose[i].orientation, Vec3::Zero())[d - 3]);
          b.push_back(demo::unwrapped_log(t.pose.front().orientation.inverse() * r.pose[i].orientation, Vec3::Zero())[d - 3]);
        }
      }
      const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
      const double range = *hi - *lo;
      if (range < 1e-6) continue;
      double se = 0;
      for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
      worst_rmse = std::max(worst_rmse, std::sqrt(se / static_cast<double>(a.size())) / range);
    }
  }

  double worst_endpoint = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    demo::DMPModel m;
    m.basis = demo::BasisSet::make(m.params);
    m.tau = 0.5 + 2.0 * (u(rng) + 1.0);
    for (auto& d : m.dims) {
      d.weights.assign(static_cast<std::size_t>(m.params.n_basis), 0.0);
      d.active = true;
    }
    const Pose start{Vec3(10 * u(rng), 10 * u(rng), 10 * u(rng)), Quat::Identity()};
    const Pose goal{start.position + Vec3(30 * u(rng), 30 * u(rng), 30 * u(rng)), Quat::Identity()};
    const demo::DemoTrajectory r = demo::dmp_rollout(m, start, goal, m.tau, 0.01);
    worst_endpoint = std::max(worst_endpoint, translation_error(r.pose.back(), goal) /
                                                  (goal.position - start.position).norm());
  }

  // Replay: a generated episode re-run from the same reset in a fresh
  // environment reproduces every observation, and the verified demo sets
  // build without exhausting their retries.
  int episodes = 0, replay_mismatches = 0, successes = 0, demo_sets = 0;
  const EnvSpec reference = EnvSpec::chained(Subtask::Pullout);
  const demo::DMPLibrary lib =
      demo::DMPLibrary::fit(demo::record_expert(reference, 0), reference.stages, demo::DMPParams{});
  std::vector<EnvSpec> specs;
  for (Subtask s : kAllSubtasks) specs.push_back(EnvSpec::single(default_config(s)));
  specs.push_back(EnvSpec::chained(Subtask::Place));
  for (const EnvSpec& spec : specs) {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      SutureEnv env = spec.make();
      env.reset(seed);
      const auto ts = demo::generate_episode(env, lib);
      SutureEnv check = spec.make();
      check.reset(seed);
      bool same = !ts.empty();
      bool reached = false;
      for (std::size_t i = 0; same && i < ts.size(); ++i) {
        const StepResult r = check.step(ts[i].action);
        same = r.obs.vector == ts[i].next_obs && r.reward == ts[i].reward && r.terminated == ts[i].done;
        reached = r.info.is_success;
      }
      ++episodes;
      replay_mismatches += !same;
      successes += same && reached;
    }
    demo::generate_demo_set(spec, 10, 5);
    ++demo_sets;
  }
  return {worst_rmse <= 0.02 && worst_endpoint <= 1e-3 && replay_mismatches == 0,
          fmt("worst RMSE %.4f of range (limit 0.02), worst zero-weight endpoint %.2g of |goal-start| (limit 1e-3), "
              "%d/%d generated episodes replay exactly (%d successful), %d verified demo sets",
              worst_rmse, worst_endpoint, episodes - replay_mismatches, episodes, successes, demo_sets)};
}

// ---------------------------------------------------------------------------
// 9. Determinism of a full train run.

Verdict determinism(const Context& ctx) {
  bench::RunReport reports[2];
  std::string logs[2];
  for (int i = 0; i < 2; ++i) {
    auto cfg = experiment(ctx, "grasp_td3_her_bc.json", "c9_determinism_" + std::to_string(i));
    cfg.train.total_steps = 8000;
    cfg.train.eval_every = 4000;
    cfg.train.log_every = 500;
    cfg.workers = 1;
    reports[i] = bench::run_experiment(cfg, bench::Command::Train);
    logs[i] = slurp(cfg.out / "train_log.jsonl");
  }
  const bool same_log = !logs[0].empty() && logs[0] == logs[1];
  const bool same_report = bench::payload_json(reports[0]) == bench::payload_json(reports[1]);
  const bool same_ckpt = slurp(ctx.workdir / "c9_determinism_0/agent/actor.bin") ==
                         slurp(ctx.workdir / "c9_determinism_1/agent/actor.bin");
  return {same_log && same_report && same_ckpt,
          fmt("8000-step runs: training logs %s (%zu bytes), report payloads %s, actor checkpoints %s",
              same_log ? "identical" : "differ", logs[0].size(), same_report ? "identical" : "differ",
              same_ckpt ? "identical" : "differ")};
}

// ---------------------------------------------------------------------------
// 10. Throughput.

Verdict throughput(const Context&) {
  // Single thread: raw env stepping with pre-drawn actions.
  const EnvSpec spec = EnvSpec::single(default_config(Subtask::Grasp));
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Action> actions(4096);
  for (auto& a : actions)
    for (double& v : a) v = u(rng);
  SutureEnv env = spec.make();
  env.reset(1);
  const std::int64_t steps = 300000;
  auto t0 = Clock::now();
  std::uint64_t resets = 1;
  for (std::int64_t i = 0; i < steps; ++i) {
    const StepResult r = env.step(actions[static_cast<std::size_t>(i) & 4095]);
    if (r.terminated || r.truncated) env.reset(++resets);
  }
  const double single_rate = static_cast<double>(steps) / seconds_since(t0);

  // Parallel evaluation: same jobs with 1 and 8 workers.
  const ScriptedExpert expert;
  const agents::PolicyFn policy = [&](const SutureEnv& e, const Observation&) { return expert.act(e); };
  const auto jobs = bench::make_jobs({0, 1, 2, 3, 4, 5, 6, 7}, 40, spec.last);
  t0 = Clock::now();
  const auto one = bench::run_policy_episodes(policy, spec, jobs, 1);
  const double t1 = seconds_since(t0);
  t0 = Clock::now();
  const auto eight = bench::run_policy_episodes(policy, spec, jobs, 8);
  const double t8 = seconds_since(t0);
  const bool identical = one == eight;
  const double speedup = t1 / t8;
  const unsigned cores = std::thread::hardware_concurrency();

  const bool single_ok = single_rate >= 10000.0;
  const bool parallel_ok = identical && speedup >= 4.0;
  Verdict v{single_ok && parallel_ok,
            fmt("%.0f env steps/s single-threaded (need >= 10000); 8 workers %.2fx faster than 1 (need >= 4x), "
                "merged results %s; %u hardware threads",
                single_rate, speedup, identical ? "identical" : "DIFFER", cores)};
  v.hardware_limited = single_ok && identical && !parallel_ok && cores < 8;
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stitchbench acceptance suite"};
  std::vector<int> selected;
  Context ctx;
  std::string configs = STITCH_CONFIG_DIR, workdir = "acceptance_runs";
  app.add_option("--criterion", selected, "criteria to run (default all)")->check(CLI::Range(1, 10));
  app.add_option("--configs", configs, "experiment config directory");
  app.add_option("--workdir", workdir, "scratch directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  ctx.configs = configs;
  ctx.workdir = workdir;
  fs::create_directories(ctx.workdir);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);

  using Check = Verdict (*)(const Context&);
  const Check checks[] = {gradient_check, reward_oracle,   her_invariants, grasp_td3_her_bc, grasp_td3,
                          demo_count_trend, hierarchy_trend, dmp_fidelity,   determinism,      throughput};
  bool all_pass = true, only_hardware = true;
  for (int c : selected) {
    Verdict v;
    try {
      v = checks[c - 1](ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::cout << "CRITERION " << c << ' ' << (v.pass ? "PASS" : "FAIL") << ": " << v.detail << std::endl;
    all_pass = all_pass && v.pass;
    if (!v.pass && !v.hardware_limited) only_hardware = false;
  }
  if (all_pass) return 0;
  return only_hardware ? kHardwareSkip : 1;
}
