#include "stitch/hier/hier.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "stitch/env/expert.hpp"
#include "stitch/error.hpp"

namespace stitch::hier {

using nlohmann::json;

std::optional<StageId> scripted_hlp(const SutureEnv& env) {
  for (int k = static_cast<int>(env.first_stage()); k <= static_cast<int>(env.last_stage()); ++k)
    if (!env.stage_terminated(static_cast<Subtask>(k))) return static_cast<Subtask>(k);
  return std::nullopt;
}

Observation stage_observation(const SutureEnv& env, StageId stage) {
  Observation obs = env.observe();
  const ScenarioConfig& c = env.stage_config(stage);
  obs.achieved_goal = to_goal(stage_achieved_goal(env.state(), c));
  obs.desired_goal = to_goal(stage_desired_goal(env.state(), c));
  return obs;
}

FeatureMat ClassifierHLP::predict_proba(const FeatureMat& features) const { return net.forward(features); }

std::vector<int> ClassifierHLP::predict(const FeatureMat& features) const {
  const FeatureMat p = predict_proba(features);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r).maxCoeff(&out[static_cast<std::size_t>(r)]);
  return out;
}

std::optional<StageId> ClassifierHLP::operator()(const SutureEnv& env) const {
  if (!scripted_hlp(env)) return std::nullopt;
  return static_cast<StageId>(predict(hlp_features(env)).front());
}

FeatureMat hlp_features(const SutureEnv& env) {
  const Observation obs = env.observe();
  const agents::InputScaler scaler(env.config().workspace);
  return scaler.state(obs.vector, obs.desired_goal).cast<double>();
}

ClassifierHLP train_hlp_classifier(const FeatureMat& features, const std::vector<int>& labels,
                                   const ClassifierConfig& cfg) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("train_hlp_classifier: " + std::to_string(features.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.hidden < 1 || cfg.depth < 1 || !(cfg.lr > 0.0))
    throw ConfigError("train_hlp_classifier: epochs, batch_size, hidden, depth and lr must be positive");
  std::array<int, kNumSubtasks> counts{};
  for (int y : labels) {
    if (y < 0 || y >= kNumSubtasks) throw ConfigError("train_hlp_classifier: label " + std::to_string(y) + " out of range");
    ++counts[y];
  }
  for (int k = 0; k < kNumSubtasks; ++k)
    if (counts[k] == 0)
      throw ConfigError("train_hlp_classifier: no example of stage " + std::string(to_string(static_cast<Subtask>(k))));

  std::mt19937_64 rng(cfg.seed);
  ClassifierHLP hlp;
  hlp.net = nn::DenseNet<double>::mlp(static_cast<int>(features.cols()), kNumSubtasks, nn::Head::Softmax, cfg.hidden,
                                      cfg.depth);
  hlp.net.initialize(rng);
  nn::AdamState<double> adam(hlp.net.params(), cfg.lr);

  std::vector<Eigen::Index> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  const auto n = static_cast<Eigen::Index>(labels.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index b = 0; b < n; b += cfg.batch_size) {
      const Eigen::Index m = std::min<Eigen::Index>(cfg.batch_size, n - b);
      FeatureMat x(m, features.cols());
      FeatureMat onehot = FeatureMat::Zero(m, kNumSubtasks);
      for (Eigen::Index i = 0; i < m; ++i) {
        x.row(i) = features.row(order[b + i]);
        onehot(i, labels[order[b + i]]) = 1.0;
      }
      nn::DenseNet<double>::Cache cache;
      const FeatureMat p = hlp.net.forward(x, cache);
      // Softmax plus cross-entropy: the logit gradient is p - y.
      const FeatureMat dlogits = (p - onehot) / static_cast<double>(m);
      adam_step(hlp.net.params(), hlp.net.backward(cache, dlogits, nullptr, nn::Upstream::HeadInput), adam);
    }
  }
  return hlp;
}

LabeledStates harvest_hlp_data(const EnvSpec& chain, int episodes, std::uint64_t seed) {
  const ScriptedExpert expert;
  std::vector<FeatureMat> rows;
  std::vector<int> labels;
  for (int e = 0; e < episodes; ++e) {
    SutureEnv env = chain.make();
    env.reset(bench::derive_reset_seed(seed, e));
    std::vector<FeatureMat> ep_rows;
    std::vector<int> ep_labels;
    bool success = false;
    for (;;) {
      const auto stage = scripted_hlp(env);
      if (!stage) break;
      ep_rows.push_back(hlp_features(env));
      ep_labels.push_back(static_cast<int>(*stage));
      const StepResult r = env.step(expert.act(env));
      if (r.terminated) {
        success = true;
        break;
      }
      if (r.truncated) break;
    }
    if (!success) continue;
    rows.insert(rows.end(), ep_rows.begin(), ep_rows.end());
    labels.insert(labels.end(), ep_labels.begin(), ep_labels.end());
  }
  LabeledStates out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), agents::kStateDim);
  for (std::size_t i = 0; i < rows.size(); ++i) out.features.row(static_cast<Eigen::Index>(i)) = rows[i];
  out.labels = std::move(labels);
  return out;
}

void LLPRegistry::set(StageId stage, agents::PolicyFn policy, const ScenarioConfig& config,
                      std::filesystem::path checkpoint) {
  if (config.subtask != stage)
    throw ConfigError("LLPRegistry: config for " + std::string(to_string(config.subtask)) + " registered as " +
                      std::string(to_string(stage)));
  entries_[static_cast<int>(stage)] = LLPEntry{std::move(policy), config, std::move(checkpoint)};
}

const LLPEntry& LLPRegistry::at(StageId stage) const {
  const auto& e = entries_[static_cast<int>(stage)];
  if (!e) throw ConfigError("LLPRegistry: no policy for " + std::string(to_string(stage)));
  return *e;
}

void LLPRegistry::require(StageId last) const {
  for (int k = 0; k <= static_cast<int>(last); ++k) at(static_cast<Subtask>(k));
}

void LLPRegistry::save_manifest(const std::filesystem::path& path, const std::filesystem::path& config_dir) const {
  std::filesystem::create_directories(config_dir);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# stitch-llp-manifest v1\n";
  for (const auto& e : entries_) {
    if (!e) continue;
    if (e->checkpoint.empty())
      throw ConfigError("LLPRegistry: " + std::string(to_string(e->config.subtask)) + " has no checkpoint on disk");
    const std::filesystem::path cfg_path = config_dir / (std::string(to_string(e->config.subtask)) + ".json");
    std::ofstream c(cfg_path);
    c << scenario_to_json_text(e->config);
    out << to_string(e->config.subtask) << ' ' << e->checkpoint.string() << ' ' << cfg_path.string() << '\n';
  }
}

LLPRegistry LLPRegistry::load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read LLP manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  LLPRegistry reg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string stage, ckpt, cfg;
    if (!(ls >> stage >> ckpt >> cfg))
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected '<stage> <checkpoint> <scenario>'");
    const Subtask s = subtask_from_string(stage);
    const ScenarioConfig c = load_scenario(resolve(cfg));
    if (c.subtask != s)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": scenario is for " +
                        std::string(to_string(c.subtask)));
    agents::ActorPolicy actor = agents::load_actor(resolve(ckpt), EnvSpec::single(c).fingerprint());
    reg.set(s, std::move(actor), c, resolve(ckpt));
  }
  return reg;
}

void ExecConfig::validate() const {
  if (stage_step_cap < 1 || total_step_cap < 1) throw ConfigError("hier: step caps must be >= 1");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::StageCap: return "stage_cap";
    case Outcome::TotalCap: return "total_cap";
    case Outcome::Regression: return "regression";
  }
  return "?";
}

namespace {

Outcome outcome_from_string(const std::string& s) {
  for (Outcome o : {Outcome::Success, Outcome::StageCap, Outcome::TotalCap, Outcome::Regression})
    if (to_string(o) == s) return o;
  throw FormatError("unknown episode outcome '" + s + "'");
}

}  // namespace

json EpisodeResult::to_json() const {
  json v = json::array();
  for (StageId s : visited) v.push_back(to_string(s));
  return {{"success", success},
          {"outcome", to_string(outcome)},
          {"final_stage", to_string(final_stage)},
          {"stage_steps", stage_steps},
          {"total_steps", total_steps},
          {"trajectory_length_mm", trajectory_length_mm},
          {"visited", v}};
}

EpisodeResult EpisodeResult::from_json(const json& j) {
  try {
    EpisodeResult r;
    r.success = j.at("success").get<bool>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.final_stage = subtask_from_string(j.at("final_stage").get<std::string>());
    r.stage_steps = j.at("stage_steps").get<std::array<int, kNumSubtasks>>();
    r.total_steps = j.at("total_steps").get<int>();
    r.trajectory_length_mm = j.at("trajectory_length_mm").get<double>();
    for (const json& s : j.at("visited")) r.visited.push_back(subtask_from_string(s.get<std::string>()));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("episode result: ") + e.what());
  }
}

EpisodeResult execute(const HLP& hlp, const LLPRegistry& llps, SutureEnv& env, const ExecConfig& cfg) {
  cfg.validate();
  llps.require(env.last_stage());
  EpisodeResult res;
  res.final_stage = env.current_stage();
  for (;;) {
    if (res.total_steps >= cfg.total_step_cap) {
      res.outcome = Outcome::TotalCap;
      return res;
    }
    const std::optional<StageId> choice = hlp(env);
    if (!choice) {
      res.success = !scripted_hlp(env).has_value();
      res.outcome = res.success ? Outcome::Success : Outcome::Regression;
      return res;
    }
    const StageId stage = *choice;
    res.final_stage = stage;
    if (stage > env.last_stage() || env.state().completed[static_cast<int>(stage)]) {
      res.outcome = Outcome::Regression;
      return res;
    }
    if (res.visited.empty() || res.visited.back() != stage) res.visited.push_back(stage);

    const LLPEntry& llp = llps.at(stage);
    int steps = 0;
    while (steps < cfg.stage_step_cap && res.total_steps < cfg.total_step_cap) {
      const StepResult r = env.step(llp.policy(env, stage_observation(env, stage)));
      ++steps;
      ++res.total_steps;
      ++res.stage_steps[static_cast<int>(stage)];
      res.trajectory_length_mm += r.info.applied_translation_mm;
      if (r.terminated) {
        res.success = true;
        res.outcome = Outcome::Success;
        return res;
      }
      if (r.truncated) {
        res.outcome = Outcome::TotalCap;
        return res;
      }
      if (env.stage_terminated(stage)) break;
    }
    if (!env.stage_terminated(stage) && steps >= cfg.stage_step_cap) {
      res.outcome = Outcome::StageCap;
      return res;
    }
  }
}

std::string_view to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::SingleTD3HER: return "single_td3_her";
    case PolicyMode::SingleTD3HERBC: return "single_td3_her_bc";
    case PolicyMode::Hierarchical: return "hierarchical";
  }
  return "?";
}

PolicyMode policy_mode_from_string(std::string_view s) {
  for (PolicyMode m : {PolicyMode::SingleTD3HER, PolicyMode::SingleTD3HERBC, PolicyMode::Hierarchical})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown policy mode '" + std::string(s) +
                    "' (single_td3_her, single_td3_her_bc, hierarchical)");
}

std::vector<bench::EpisodeOutcome> run_sequential(PolicyMode mode, const SequentialArtifacts& art,
                                                  const EnvSpec& chain, int episodes,
                                                  const std::vector<std::uint64_t>& seeds, int workers) {
  if (episodes < 1) throw ConfigError("evaluate_sequential: episodes must be >= 1");
  if (mode == PolicyMode::Hierarchical) {
    if (!art.hlp || !art.llps) throw ConfigError("evaluate_sequential: hierarchical mode needs an HLP and LLPs");
    art.llps->require(chain.last);
    art.exec.validate();
  } else if (!art.single) {
    throw ConfigError("evaluate_sequential: single-policy mode needs a policy");
  }
  const auto jobs = bench::make_jobs(seeds, episodes, chain.last);
  auto run = [&](const bench::EpisodeJob& job) {
    SutureEnv env = chain.make();
    Observation obs = env.reset(job.reset_seed);
    bench::EpisodeOutcome o;
    if (mode == PolicyMode::Hierarchical) {
      const EpisodeResult r = execute(art.hlp, *art.llps, env, art.exec);
      o.success = r.success;
      o.steps = r.total_steps;
      o.length_mm = r.trajectory_length_mm;
      o.final_stage = r.final_stage;
      return o;
    }
    for (;;) {
      const StepResult r = env.step(art.single(env, obs));
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
  return bench::parallel_eval_driver(jobs, workers, run);
}

double evaluate_sequential(PolicyMode mode, const SequentialArtifacts& art, const EnvSpec& chain, int episodes,
                           const std::vector<std::uint64_t>& seeds, int workers) {
  const auto outcomes = run_sequential(mode, art, chain, episodes, seeds, workers);
  const auto wins = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success; });
  return static_cast<double>(wins) / static_cast<double>(outcomes.size());
}

}  // namespace stitch::hier
