#include "stitch/bench/experiment.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "stitch/error.hpp"
#include "stitch/json_util.hpp"

namespace stitch::bench {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<EpisodeOutcome> run_policy_episodes(const agents::PolicyFn& policy, const EnvSpec& spec,
                                                const std::vector<EpisodeJob>& jobs, int workers) {
  auto run = [&](const EpisodeJob& job) {
    SutureEnv env = spec.make();
    Observation obs = env.reset(job.reset_seed);
    EpisodeOutcome o;
    for (;;) {
      const StepResult r = env.step(policy(env, obs));
      obs = r.obs;
      ++o.steps;
      o.length_mm += r.info.applied_translation_mm;
      if (r.terminated || r.truncated) {
        o.success = r.terminated;
        break;
      }
    }
    o.final_stage = env.current_stage();
    return o;
  };
  return parallel_eval_driver(jobs, workers, run);
}

namespace {

std::int64_t total_steps(const std::vector<EpisodeOutcome>& outcomes) {
  std::int64_t n = 0;
  for (const auto& o : outcomes) n += o.steps;
  return n;
}

}  // namespace

ReportRow evaluate(const agents::PolicyFn& policy, const EnvSpec& spec, int episodes,
                   const std::vector<std::uint64_t>& seeds, int workers, const std::string& label,
                   std::int64_t* env_steps) {
  const auto outcomes = run_policy_episodes(policy, spec, make_jobs(seeds, episodes, spec.last), workers);
  if (env_steps) *env_steps += total_steps(outcomes);
  return {label, {}, seed_results(outcomes)};
}

ReportRow evaluate_checkpoint(const fs::path& dir, const EnvSpec& spec, int episodes,
                              const std::vector<std::uint64_t>& seeds, int workers, const std::string& label,
                              std::int64_t* env_steps) {
  const agents::ActorPolicy actor = agents::load_actor(dir, spec.fingerprint());
  return evaluate(actor, spec, episodes, seeds, workers, label, env_steps);
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Train: return "train";
    case Command::Eval: return "eval";
    case Command::DemoGen: return "demo-gen";
    case Command::Bench: return "bench";
    case Command::HierEval: return "hier-eval";
  }
  return "?";
}

Command command_from_string(std::string_view s) {
  for (Command c : {Command::Train, Command::Eval, Command::DemoGen, Command::Bench, Command::HierEval})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown command '" + std::string(s) + "' (train, eval, demo-gen, bench, hier-eval)");
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ddpg: return "ddpg";
    case Algorithm::Td3: return "td3";
    case Algorithm::Td3Her: return "td3_her";
    case Algorithm::Td3HerBc: return "td3_her_bc";
    case Algorithm::Bc: return "bc";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view s) {
  for (Algorithm a : {Algorithm::Ddpg, Algorithm::Td3, Algorithm::Td3Her, Algorithm::Td3HerBc, Algorithm::Bc})
    if (to_string(a) == s) return a;
  throw ConfigError("algorithm: unknown value '" + std::string(s) + "' (ddpg, td3, td3_her, td3_her_bc, bc)");
}

agents::TD3Config effective_agent(const ExperimentConfig& cfg) {
  agents::TD3Config a = cfg.agent;
  switch (cfg.algorithm) {
    case Algorithm::Ddpg:
      a.twin_critics = false;
      a.use_her = false;
      a.lambda_bc = 0.0;
      break;
    case Algorithm::Td3:
      a.use_her = false;
      a.lambda_bc = 0.0;
      break;
    case Algorithm::Td3Her: a.lambda_bc = 0.0; break;
    case Algorithm::Td3HerBc:
    case Algorithm::Bc: a.use_her = cfg.algorithm == Algorithm::Td3HerBc; break;
  }
  return a;
}

void ExperimentConfig::validate(Command c) const {
  auto need_eval = [&] {
    if (seeds.empty()) throw ConfigError("seeds: must list at least one seed");
    if (episodes < 1) throw ConfigError("episodes: must be >= 1");
  };
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  agent.validate();
  train.validate();
  if (!demos.file.empty() && !fs::exists(demos.file))
    throw ConfigError("demos.file: " + demos.file.string() + " does not exist");
  if (demos.episodes < 0) throw ConfigError("demos.episodes: must be >= 0");
  const bool uses_demos = algorithm == Algorithm::Bc || (algorithm == Algorithm::Td3HerBc && agent.lambda_bc > 0.0);
  switch (c) {
    case Command::Train:
      need_eval();
      if (uses_demos && demos.file.empty() && demos.episodes < 1)
        throw ConfigError("demos.episodes: " + std::string(to_string(algorithm)) + " needs demonstrations");
      break;
    case Command::Eval:
      need_eval();
      if (checkpoint.empty()) throw ConfigError("checkpoint: required for eval");
      if (!fs::exists(checkpoint)) throw ConfigError("checkpoint: " + checkpoint.string() + " does not exist");
      break;
    case Command::DemoGen: break;
    case Command::Bench:
      need_eval();
      if (bench_lambdas.empty() || bench_demo_counts.empty())
        throw ConfigError("bench: lambdas and demo_counts must be non-empty");
      for (double l : bench_lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("bench.lambdas: values must lie in [0, 1]");
      for (int n : bench_demo_counts)
        if (n < 1) throw ConfigError("bench.demo_counts: values must be >= 1");
      break;
    case Command::HierEval:
      need_eval();
      if (!env.chain) throw ConfigError("chain: hier-eval needs a chained scene");
      hier.exec.validate();
      if (hier.hlp != "scripted" && hier.hlp != "classifier")
        throw ConfigError("hier.hlp: expected 'scripted' or 'classifier'");
      if (!hier.llp_manifest.empty() && !fs::exists(hier.llp_manifest))
        throw ConfigError("hier.llp_manifest: " + hier.llp_manifest.string() + " does not exist");
      if (hier.modes.empty()) throw ConfigError("hier.modes: must be non-empty");
      break;
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

std::vector<std::uint64_t> seed_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of seeds");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<std::int64_t>() < 0)
      throw ConfigError(path + "[" + std::to_string(i) + "]: expected a seed >= 0");
    out.push_back(j[i].get<std::uint64_t>());
  }
  return out;
}

hier::ClassifierConfig classifier_from_json(const json& j, const std::string& path) {
  jsonu::check_keys(j, path, {"hidden", "depth", "epochs", "batch_size", "lr", "seed"});
  hier::ClassifierConfig c;
  if (j.contains("hidden")) c.hidden = jsonu::integer_at(j["hidden"], path + ".hidden");
  if (j.contains("depth")) c.depth = jsonu::integer_at(j["depth"], path + ".depth");
  if (j.contains("epochs")) c.epochs = jsonu::integer_at(j["epochs"], path + ".epochs");
  if (j.contains("batch_size")) c.batch_size = jsonu::integer_at(j["batch_size"], path + ".batch_size");
  if (j.contains("lr")) c.lr = jsonu::number_at(j["lr"], path + ".lr");
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(jsonu::integer_at(j["seed"], path + ".seed"));
  return c;
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("experiment: expected a JSON object");
  jsonu::check_keys(j, "experiment",
                    {"command", "scenario", "scenario_file", "chain", "algorithm", "agent", "train", "bc", "demos",
                     "seeds", "episodes", "workers", "out", "checkpoint", "bench", "hier"});
  ExperimentConfig c;
  if (j.contains("command")) c.command = command_from_string(jsonu::string_at(j["command"], "command"));

  std::optional<ScenarioConfig> scenario;
  if (j.contains("scenario") && j.contains("scenario_file"))
    throw ConfigError("scenario: give either 'scenario' or 'scenario_file', not both");
  if (j.contains("scenario")) {
    if (!j["scenario"].is_object()) throw ConfigError("scenario: expected an object");
    scenario = scenario_from_json_text(j["scenario"].dump());
  } else if (j.contains("scenario_file")) {
    const fs::path p = resolve(base, jsonu::string_at(j["scenario_file"], "scenario_file"));
    if (!fs::exists(p)) throw ConfigError("scenario_file: " + p.string() + " does not exist");
    scenario = load_scenario(p);
  }
  if (j.contains("chain")) {
    const Subtask end = subtask_from_string(jsonu::string_at(j["chain"], "chain"));
    std::array<ScenarioConfig, kNumSubtasks> stages;
    for (Subtask s : kAllSubtasks) stages[static_cast<int>(s)] = default_config(s);
    if (scenario) stages[static_cast<int>(scenario->subtask)] = *scenario;
    c.env = EnvSpec::chained(stages, end);
  } else {
    if (!scenario) throw ConfigError("scenario: required unless 'chain' is given");
    scenario->validate();
    c.env = EnvSpec::single(*scenario);
  }

  if (j.contains("algorithm")) c.algorithm = algorithm_from_string(jsonu::string_at(j["algorithm"], "algorithm"));
  if (j.contains("agent")) c.agent = agents::td3_config_from_json(j["agent"], "agent");
  if (c.algorithm == Algorithm::Td3HerBc && !(j.contains("agent") && j["agent"].contains("lambda_bc")))
    c.agent.lambda_bc = 0.5;
  if (j.contains("train")) c.train = agents::train_config_from_json(j["train"], "train");
  if (j.contains("bc")) {
    const json& b = j["bc"];
    jsonu::check_keys(b, "bc", {"epochs", "batch_size", "lr"});
    if (b.contains("epochs")) c.bc.epochs = jsonu::integer_at(b["epochs"], "bc.epochs");
    if (b.contains("batch_size")) c.bc.batch_size = jsonu::integer_at(b["batch_size"], "bc.batch_size");
    if (b.contains("lr")) c.bc.lr = jsonu::number_at(b["lr"], "bc.lr");
  }
  if (j.contains("demos")) {
    const json& d = j["demos"];
    jsonu::check_keys(d, "demos", {"episodes", "seed", "file"});
    if (d.contains("episodes")) c.demos.episodes = jsonu::integer_at(d["episodes"], "demos.episodes");
    if (d.contains("seed")) c.demos.seed = static_cast<std::uint64_t>(jsonu::integer_at(d["seed"], "demos.seed"));
    if (d.contains("file")) c.demos.file = resolve(base, jsonu::string_at(d["file"], "demos.file"));
  }
  if (j.contains("seeds")) c.seeds = seed_list(j["seeds"], "seeds");
  if (j.contains("episodes")) c.episodes = jsonu::integer_at(j["episodes"], "episodes");
  if (j.contains("workers")) c.workers = jsonu::integer_at(j["workers"], "workers");
  if (j.contains("out")) c.out = resolve(base, jsonu::string_at(j["out"], "out"));
  if (j.contains("checkpoint")) c.checkpoint = resolve(base, jsonu::string_at(j["checkpoint"], "checkpoint"));
  if (j.contains("bench")) {
    const json& b = j["bench"];
    jsonu::check_keys(b, "bench", {"lambdas", "demo_counts"});
    if (b.contains("lambdas")) {
      c.bench_lambdas.clear();
      if (!b["lambdas"].is_array()) throw ConfigError("bench.lambdas: expected an array");
      for (std::size_t i = 0; i < b["lambdas"].size(); ++i)
        c.bench_lambdas.push_back(jsonu::number_at(b["lambdas"][i], "bench.lambdas[" + std::to_string(i) + "]"));
    }
    if (b.contains("demo_counts")) {
      c.bench_demo_counts.clear();
      if (!b["demo_counts"].is_array()) throw ConfigError("bench.demo_counts: expected an array");
      for (std::size_t i = 0; i < b["demo_counts"].size(); ++i)
        c.bench_demo_counts.push_back(
            jsonu::integer_at(b["demo_counts"][i], "bench.demo_counts[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("hier")) {
    const json& h = j["hier"];
    jsonu::check_keys(h, "hier",
                      {"modes", "hlp", "hlp_episodes", "classifier", "stage_step_cap", "total_step_cap",
                       "llp_manifest", "llp_train"});
    if (h.contains("modes")) {
      c.hier.modes.clear();
      if (!h["modes"].is_array()) throw ConfigError("hier.modes: expected an array");
      for (std::size_t i = 0; i < h["modes"].size(); ++i)
        c.hier.modes.push_back(
            hier::policy_mode_from_string(jsonu::string_at(h["modes"][i], "hier.modes[" + std::to_string(i) + "]")));
    }
    if (h.contains("hlp")) c.hier.hlp = jsonu::string_at(h["hlp"], "hier.hlp");
    if (h.contains("hlp_episodes")) c.hier.hlp_episodes = jsonu::integer_at(h["hlp_episodes"], "hier.hlp_episodes");
    if (h.contains("classifier")) c.hier.classifier = classifier_from_json(h["classifier"], "hier.classifier");
    if (h.contains("stage_step_cap"))
      c.hier.exec.stage_step_cap = jsonu::integer_at(h["stage_step_cap"], "hier.stage_step_cap");
    if (h.contains("total_step_cap"))
      c.hier.exec.total_step_cap = jsonu::integer_at(h["total_step_cap"], "hier.total_step_cap");
    if (h.contains("llp_manifest"))
      c.hier.llp_manifest = resolve(base, jsonu::string_at(h["llp_manifest"], "hier.llp_manifest"));
    if (h.contains("llp_train")) c.hier.llp_train = agents::train_config_from_json(h["llp_train"], "hier.llp_train");
  }
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_from_json(jsonu::parse(ss.str(), path.string()), path.parent_path());
}

namespace {

using Clock = std::chrono::steady_clock;

std::string env_label(const EnvSpec& spec) {
  if (!spec.chain) return std::string(to_string(spec.last));
  return "grasp->" + std::string(to_string(spec.last));
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

struct Runner {
  const ExperimentConfig& cfg;
  std::ostream* progress;
  std::int64_t env_steps = 0;

  void note(const std::string& msg) const {
    if (progress) *progress << msg << std::endl;
  }

  agents::DemoDataset demos_for(const EnvSpec& spec, int episodes, std::uint64_t seed, const fs::path& save_to) {
    if (!cfg.demos.file.empty() && spec.fingerprint() == cfg.env.fingerprint()) {
      const demo::TransitionFile f = demo::load_transitions(cfg.demos.file);
      f.check(spec);
      note("loaded " + std::to_string(f.data.episode_count()) + " demos from " + cfg.demos.file.string());
      return f.data;
    }
    demo::GeneratorConfig g;
    g.workers = cfg.workers;
    const demo::TransitionFile f = demo::generate_demo_set(spec, episodes, seed, g);
    if (!save_to.empty()) {
      fs::create_directories(save_to.parent_path());
      demo::save_transitions(f, save_to);
    }
    note("generated " + std::to_string(episodes) + " " + env_label(spec) + " demos");
    return f.data;
  }

  // Trains one agent and saves it under `dir`; returns the deterministic actor.
  agents::ActorPolicy train_agent(const EnvSpec& spec, const agents::TD3Config& agent_cfg,
                                  const agents::TrainConfig& train_cfg, const agents::DemoDataset* demos,
                                  const fs::path& dir, bool bc_only = false) {
    fs::create_directories(dir);
    const std::uint64_t fp = spec.fingerprint();
    if (bc_only) {
      agents::TD3Agent agent(agent_cfg, agents::InputScaler(spec.goal_config().workspace), train_cfg.seed);
      agents::BCConfig bc = cfg.bc;
      bc.seed = train_cfg.seed;
      const auto losses = agents::bc_train(*demos, agent.actor, agent.scaler, bc);
      std::ofstream log(dir / "train_log.jsonl");
      for (std::size_t e = 0; e < losses.size(); ++e)
        log << json{{"epoch", e + 1}, {"bc_loss", losses[e]}}.dump() << '\n';
      agents::save_agent(agent, dir / "agent", fp);
    } else {
      std::ofstream log(dir / "train_log.jsonl");
      agents::TrainHooks hooks;
      hooks.log = &log;
      if (train_cfg.checkpoint_every > 0) hooks.checkpoint_dir = dir / "checkpoints";
      const auto t0 = Clock::now();
      const agents::TrainResult r = agents::train_loop(spec, agent_cfg, train_cfg, demos, hooks);
      env_steps += train_cfg.total_steps;
      agents::save_agent(r.agent, dir / "agent", fp);
      note("trained " + env_label(spec) + " for " + std::to_string(train_cfg.total_steps) + " steps in " +
           fmt(std::chrono::duration<double>(Clock::now() - t0).count()) + " s");
    }
    return agents::load_actor(dir / "agent", fp);
  }

  ReportRow eval(const agents::PolicyFn& policy, const EnvSpec& spec, const std::string& label) {
    return evaluate(policy, spec, cfg.episodes, cfg.seeds, cfg.workers, label, &env_steps);
  }

  RunReport train() {
    const agents::TD3Config agent = effective_agent(cfg);
    const bool bc_only = cfg.algorithm == Algorithm::Bc;
    std::optional<agents::DemoDataset> demos;
    if (bc_only || agent.lambda_bc > 0.0)
      demos = demos_for(cfg.env, cfg.demos.episodes, cfg.demos.seed, cfg.out / "demos.jsonl");
    const agents::ActorPolicy actor =
        train_agent(cfg.env, agent, cfg.train, demos ? &*demos : nullptr, cfg.out, bc_only);
    ReportRow row = eval(actor, cfg.env, env_label(cfg.env) + " " + std::string(to_string(cfg.algorithm)));
    row.params = {{"train_seed", std::to_string(cfg.train.seed)},
                  {"steps", std::to_string(cfg.train.total_steps)},
                  {"lambda", fmt(agent.lambda_bc)},
                  {"demos", std::to_string(demos ? demos->episode_count() : 0)}};
    return report(Command::Train, {row});
  }

  RunReport eval_cmd() {
    ReportRow row = evaluate_checkpoint(cfg.checkpoint, cfg.env, cfg.episodes, cfg.seeds, cfg.workers,
                                        env_label(cfg.env), &env_steps);
    row.params = {{"checkpoint", cfg.checkpoint.filename().string()}};
    return report(Command::Eval, {row});
  }

  RunReport demo_gen() {
    demo::GeneratorConfig g;
    g.workers = cfg.workers;
    const demo::TransitionFile f = demo::generate_demo_set(cfg.env, cfg.demos.episodes, cfg.demos.seed, g);
    fs::create_directories(cfg.out);
    demo::save_transitions(f, cfg.out / "demos.jsonl");
    std::vector<EpisodeOutcome> outcomes;
    for (std::size_t e = 0; e < f.data.episode_count(); ++e) {
      EpisodeOutcome o;
      o.job_id = e;
      o.seed = cfg.demos.seed;
      o.episode = static_cast<int>(e);
      o.success = f.data.episode(e).back().done;
      o.steps = static_cast<int>(f.data.episode(e).size());
      o.length_mm = f.length_mm[e];
      env_steps += o.steps;
      outcomes.push_back(o);
    }
    ReportRow row{env_label(cfg.env) + " heuristic demos", {{"episodes", std::to_string(cfg.demos.episodes)}},
                  seed_results(outcomes)};
    if (row.seeds.empty()) row.seeds.push_back({cfg.demos.seed, 0, 0, std::nullopt, std::nullopt});
    return report(Command::DemoGen, {row});
  }

  RunReport bench() {
    int max_demos = 0;
    for (int n : cfg.bench_demo_counts) max_demos = std::max(max_demos, n);
    const agents::DemoDataset all = demos_for(cfg.env, max_demos, cfg.demos.seed, cfg.out / "demos.jsonl");
    if (static_cast<int>(all.episode_count()) < max_demos)
      throw ConfigError("demos.file: holds " + std::to_string(all.episode_count()) + " episodes, bench needs " +
                        std::to_string(max_demos));
    std::vector<ReportRow> rows;
    for (double lambda : cfg.bench_lambdas) {
      for (int n : cfg.bench_demo_counts) {
        agents::TD3Config agent = cfg.agent;
        agent.use_her = true;
        agent.lambda_bc = lambda;
        const agents::DemoDataset d = all.take(static_cast<std::size_t>(n));
        const std::string cell = "lambda_" + fmt(lambda) + "_demos_" + std::to_string(n);
        const agents::ActorPolicy actor = train_agent(cfg.env, agent, cfg.train, &d, cfg.out / cell);
        ReportRow row = eval(actor, cfg.env, env_label(cfg.env) + " td3_her_bc");
        row.params = {{"lambda", fmt(lambda)}, {"demos", std::to_string(n)}};
        rows.push_back(std::move(row));
      }
    }
    return report(Command::Bench, std::move(rows));
  }

  RunReport hier_eval() {
    using hier::PolicyMode;
    const EnvSpec& chain = cfg.env;
    std::vector<ReportRow> rows;
    for (PolicyMode mode : cfg.hier.modes) {
      hier::SequentialArtifacts art;
      art.exec = cfg.hier.exec;
      hier::LLPRegistry llps;
      std::optional<agents::ActorPolicy> single;
      const fs::path mode_dir = cfg.out / std::string(hier::to_string(mode));
      if (mode == PolicyMode::Hierarchical) {
        llps = cfg.hier.llp_manifest.empty() ? train_llps() : hier::LLPRegistry::load_manifest(cfg.hier.llp_manifest);
        art.llps = &llps;
        art.hlp = make_hlp();
      } else {
        agents::TD3Config agent = cfg.agent;
        agent.use_her = true;
        agent.lambda_bc = mode == PolicyMode::SingleTD3HERBC ? (cfg.agent.lambda_bc > 0.0 ? cfg.agent.lambda_bc : 0.5)
                                                             : 0.0;
        std::optional<agents::DemoDataset> demos;
        if (agent.lambda_bc > 0.0)
          demos = demos_for(chain, cfg.demos.episodes, cfg.demos.seed, mode_dir / "demos.jsonl");
        single = train_agent(chain, agent, cfg.train, demos ? &*demos : nullptr, mode_dir);
        art.single = *single;
      }
      const auto outcomes = hier::run_sequential(mode, art, chain, cfg.episodes, cfg.seeds, cfg.workers);
      env_steps += total_steps(outcomes);
      rows.push_back({std::string(hier::to_string(mode)), {{"chain", env_label(chain)}}, seed_results(outcomes)});
      note(std::string(hier::to_string(mode)) + ": success " + format_cell(rows.back().success()));
    }
    return report(Command::HierEval, std::move(rows));
  }

  hier::LLPRegistry train_llps() {
    hier::LLPRegistry reg;
    agents::TD3Config agent = cfg.agent;
    agent.use_her = true;
    if (!(agent.lambda_bc > 0.0)) agent.lambda_bc = 0.5;
    const agents::TrainConfig tc = cfg.hier.llp_train.value_or(cfg.train);
    const fs::path root = cfg.out / "llps";
    for (int k = 0; k <= static_cast<int>(cfg.env.last); ++k) {
      const Subtask s = static_cast<Subtask>(k);
      const EnvSpec spec = EnvSpec::single(cfg.env.stages[k]);
      const agents::DemoDataset demos =
          demos_for(spec, cfg.demos.episodes, cfg.demos.seed + static_cast<std::uint64_t>(k), {});
      const fs::path dir = root / std::string(to_string(s));
      reg.set(s, train_agent(spec, agent, tc, &demos, dir), cfg.env.stages[k], dir / "agent");
    }
    reg.save_manifest(root / "llps.txt", root / "scenarios");
    return reg;
  }

  hier::HLP make_hlp() {
    if (cfg.hier.hlp == "scripted") return hier::scripted_hlp;
    const hier::LabeledStates data = hier::harvest_hlp_data(cfg.env, cfg.hier.hlp_episodes, cfg.seed());
    return hier::train_hlp_classifier(data.features, data.labels, cfg.hier.classifier);
  }

  RunReport report(Command c, std::vector<ReportRow> rows) const {
    RunReport r;
    r.command = std::string(to_string(c));
    r.fingerprint = cfg.env.fingerprint();
    r.rows = std::move(rows);
    return r;
  }
};

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg, Command command, std::ostream* progress) {
  if (cfg.command && *cfg.command != command)
    throw ConfigError("command: config is for '" + std::string(to_string(*cfg.command)) + "', invoked as '" +
                      std::string(to_string(command)) + "'");
  cfg.validate(command);
  fs::create_directories(cfg.out);
  const auto t0 = Clock::now();
  Runner run{cfg, progress};
  RunReport r;
  switch (command) {
    case Command::Train: r = run.train(); break;
    case Command::Eval: r = run.eval_cmd(); break;
    case Command::DemoGen: r = run.demo_gen(); break;
    case Command::Bench: r = run.bench(); break;
    case Command::HierEval: r = run.hier_eval(); break;
  }
  r.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  r.env_steps = run.env_steps;
  r.steps_per_s = r.wall_time_s > 0.0 ? static_cast<double>(r.env_steps) / r.wall_time_s : 0.0;
  std::ofstream(cfg.out / "report.json") << to_json(r).dump(2) << '\n';
  return r;
}

}  // namespace stitch::bench
