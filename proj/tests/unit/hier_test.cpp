#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "stitch/env/expert.hpp"
#include "stitch/error.hpp"
#include "stitch/hier/hier.hpp"

using namespace stitch;
using namespace stitch::hier;

namespace {

agents::PolicyFn expert_policy() {
  return [](const SutureEnv& env, const Observation&) { return ScriptedExpert{}.act(env); };
}

agents::PolicyFn zero_policy() {
  return [](const SutureEnv&, const Observation&) { return Action{}; };
}

LLPRegistry oracle_registry() {
  LLPRegistry reg;
  for (Subtask s : kAllSubtasks) reg.set(s, expert_policy(), default_config(s));
  return reg;
}

// Runs the expert on the chain until `stage` becomes current.
void advance_to(SutureEnv& env, Subtask stage) {
  const ScriptedExpert expert;
  while (env.current_stage() < stage) env.step(expert.act(env));
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& y) {
  int ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

// Class-balanced points labeled by the argmax of a fixed linear map; points
// near a decision boundary are skipped.
void separable(int n, std::mt19937_64& rng, FeatureMat& x, std::vector<int>& y) {
  const int d = 6;
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd w(d, kNumSubtasks);
  std::mt19937_64 wrng(99);
  for (int i = 0; i < w.size(); ++i) w(i) = g(wrng);
  x.resize(n, d);
  y.clear();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<int, kNumSubtasks> count{};
  int k = 0;
  while (k < n) {
    Eigen::RowVectorXd row(d);
    for (int i = 0; i < d; ++i) row[i] = u(rng);
    Eigen::RowVectorXd s = row * w;
    int best;
    const double top = s.maxCoeff(&best);
    s[best] = -1e9;
    if (top - s.maxCoeff() < 0.3 || count[best] >= n / kNumSubtasks) continue;
    ++count[best];
    x.row(k++) = row;
    y.push_back(best);
  }
}

}  // namespace

TEST(ScriptedHlp, FreshSceneSelectsGrasp) {
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(1);
  EXPECT_EQ(scripted_hlp(env), Subtask::Grasp);
}

TEST(ScriptedHlp, GraspSatisfiedSelectsPlace) {
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(2);
  advance_to(env, Subtask::Place);
  EXPECT_TRUE(env.stage_terminated(Subtask::Grasp));
  EXPECT_EQ(scripted_hlp(env), Subtask::Place);
}

TEST(ScriptedHlp, AllSatisfiedIsDone) {
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(3);
  const ScriptedExpert expert;
  for (;;) {
    const StepResult r = env.step(expert.act(env));
    ASSERT_FALSE(r.truncated);
    if (r.terminated) break;
  }
  EXPECT_FALSE(scripted_hlp(env).has_value());
}

TEST(StageObservation, CarriesTheStageGoals) {
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(4);
  const Observation o = stage_observation(env, Subtask::Grasp);
  const ScenarioConfig& g = env.stage_config(Subtask::Grasp);
  EXPECT_EQ(o.desired_goal, to_goal(stage_desired_goal(env.state(), g)));
  EXPECT_EQ(o.achieved_goal, to_goal(stage_achieved_goal(env.state(), g)));
  EXPECT_EQ(o.vector, env.observe().vector);
}

TEST(Classifier, SeparableDataIsLearned) {
  std::mt19937_64 rng(5);
  FeatureMat x;
  std::vector<int> y;
  separable(1500, rng, x, y);
  ClassifierConfig cfg;
  cfg.epochs = 150;
  const ClassifierHLP hlp = train_hlp_classifier(x, y, cfg);
  EXPECT_GE(accuracy(hlp.predict(x), y), 0.99);
}

TEST(Classifier, SingleExamplePerClassIsMemorized) {
  FeatureMat x = FeatureMat::Identity(5, 5) * 3.0;
  const std::vector<int> y{4, 2, 0, 1, 3};
  ClassifierConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 5;
  const ClassifierHLP hlp = train_hlp_classifier(x, y, cfg);
  EXPECT_EQ(hlp.predict(x), y);
}

TEST(Classifier, PermutedLabelsGiveChanceOnHeldOut) {
  std::mt19937_64 rng(6);
  FeatureMat x, xt;
  std::vector<int> y, yt;
  separable(1000, rng, x, y);
  separable(3000, rng, xt, yt);
  std::shuffle(y.begin(), y.end(), rng);
  ClassifierConfig cfg;
  cfg.epochs = 100;
  const ClassifierHLP hlp = train_hlp_classifier(x, y, cfg);
  // Held-out labels follow the true rule, which the permuted training set
  // no longer carries.
  EXPECT_NEAR(accuracy(hlp.predict(xt), yt), 0.2, 0.05);
}

TEST(Classifier, OutputsAreDistributions) {
  std::mt19937_64 rng(7);
  FeatureMat x;
  std::vector<int> y;
  separable(200, rng, x, y);
  ClassifierConfig cfg;
  cfg.epochs = 5;
  const ClassifierHLP hlp = train_hlp_classifier(x, y, cfg);
  const FeatureMat p = hlp.predict_proba(x);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
    EXPECT_GE(p.row(r).minCoeff(), 0.0);
  }
}

TEST(Classifier, MissingClassIsRejected) {
  FeatureMat x = FeatureMat::Random(8, 3);
  EXPECT_THROW(train_hlp_classifier(x, {0, 1, 2, 3, 0, 1, 2, 3}, {}), ConfigError);
  EXPECT_THROW(train_hlp_classifier(x, {0, 1, 2, 3, 4, 5, 2, 3}, {}), ConfigError);
  EXPECT_THROW(train_hlp_classifier(x, {0, 1, 2}, {}), ShapeError);
}

TEST(Classifier, AgreesWithScriptedHlpOnExpertStates) {
  const EnvSpec chain = EnvSpec::chained(Subtask::Pullout);
  const LabeledStates train = harvest_hlp_data(chain, 30, 1);
  const LabeledStates test = harvest_hlp_data(chain, 10, 2);
  ASSERT_GT(test.labels.size(), 100u);
  ClassifierConfig cfg;
  cfg.epochs = 40;
  const ClassifierHLP hlp = train_hlp_classifier(train.features, train.labels, cfg);
  EXPECT_GE(accuracy(hlp.predict(test.features), test.labels), 0.9);
}

TEST(Execute, OracleLlpsSucceedInOrder) {
  const LLPRegistry reg = oracle_registry();
  const EnvSpec chain = EnvSpec::chained(Subtask::Pullout);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SutureEnv env = chain.make();
    env.reset(seed);
    const EpisodeResult r = execute(scripted_hlp, reg, env);
    ASSERT_TRUE(r.success) << "seed " << seed << " outcome " << to_string(r.outcome);
    EXPECT_EQ(r.visited, (std::vector<Subtask>(kAllSubtasks.begin(), kAllSubtasks.end())));
    EXPECT_EQ(r.final_stage, Subtask::Pullout);
  }
}

TEST(Execute, StalledPlaceFailsAtStageCap) {
  LLPRegistry reg = oracle_registry();
  reg.set(Subtask::Place, zero_policy(), default_config(Subtask::Place));
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(8);
  ExecConfig cfg;
  const EpisodeResult r = execute(scripted_hlp, reg, env, cfg);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.outcome, Outcome::StageCap);
  EXPECT_EQ(r.final_stage, Subtask::Place);
  EXPECT_EQ(r.stage_steps[1], cfg.stage_step_cap);
}

TEST(Execute, NoLlpRunsPastTheStageCap) {
  // The expert needs far more than three steps to grasp.
  LLPRegistry reg = oracle_registry();
  int longest = 0, run = 0;
  reg.set(Subtask::Grasp,
          [&](const SutureEnv& env, const Observation& o) {
            ++run;
            longest = std::max(longest, run);
            return expert_policy()(env, o);
          },
          default_config(Subtask::Grasp));
  HLP hlp = [&](const SutureEnv& env) {
    run = 0;
    return scripted_hlp(env);
  };
  SutureEnv env = EnvSpec::chained(Subtask::Place).make();
  env.reset(9);
  ExecConfig cfg;
  cfg.stage_step_cap = 3;
  const EpisodeResult r = execute(hlp, reg, env, cfg);
  EXPECT_LE(longest, 3);
  EXPECT_EQ(r.outcome, Outcome::StageCap);
  EXPECT_EQ(r.stage_steps[0], 3);
}

TEST(Execute, RegressionIsFailure) {
  const LLPRegistry reg = oracle_registry();
  HLP always_grasp = [](const SutureEnv&) { return std::optional<StageId>(Subtask::Grasp); };
  SutureEnv env = EnvSpec::chained(Subtask::Place).make();
  env.reset(10);
  const EpisodeResult r = execute(always_grasp, reg, env);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.outcome, Outcome::Regression);
  EXPECT_GT(r.stage_steps[0], 0);
}

TEST(Execute, TotalCapEndsEpisode) {
  const LLPRegistry reg = oracle_registry();
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(11);
  ExecConfig cfg;
  cfg.total_step_cap = 20;
  const EpisodeResult r = execute(scripted_hlp, reg, env, cfg);
  EXPECT_EQ(r.outcome, Outcome::TotalCap);
  EXPECT_EQ(r.total_steps, 20);
}

TEST(Execute, MissingLlpIsRejected) {
  LLPRegistry reg;
  reg.set(Subtask::Grasp, expert_policy(), default_config(Subtask::Grasp));
  SutureEnv env = EnvSpec::chained(Subtask::Place).make();
  env.reset(0);
  EXPECT_THROW(execute(scripted_hlp, reg, env), ConfigError);
}

TEST(Execute, TrajectoryLengthIsSumOfAppliedTranslation) {
  // Oracle: displacement of the driven arm between consecutive policy calls.
  LLPRegistry reg;
  std::vector<std::pair<int, Vec3>> before;
  for (Subtask s : kAllSubtasks)
    reg.set(s,
            [&](const SutureEnv& env, const Observation& o) {
              const int arm = active_arm(env.current_stage());
              before.emplace_back(arm, env.state().arms[arm].ee.position);
              return expert_policy()(env, o);
            },
            default_config(s));
  SutureEnv env = EnvSpec::chained(Subtask::Pullout).make();
  env.reset(12);
  const EpisodeResult r = execute(scripted_hlp, reg, env);
  ASSERT_TRUE(r.success);
  ASSERT_EQ(static_cast<int>(before.size()), r.total_steps);
  double expected = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto [arm, p] = before[i];
    const Vec3 next = i + 1 < before.size() && before[i + 1].first == arm ? before[i + 1].second
                                                                           : env.state().arms[arm].ee.position;
    expected += (next - p).norm();
  }
  // An arm is never driven again after its last step, so its final
  // position closes its last segment.
  EXPECT_NEAR(r.trajectory_length_mm, expected, 1e-9);
}

TEST(EpisodeResultJson, RoundTrip) {
  const LLPRegistry reg = oracle_registry();
  SutureEnv env = EnvSpec::chained(Subtask::Insert).make();
  env.reset(13);
  const EpisodeResult r = execute(scripted_hlp, reg, env);
  const EpisodeResult back = EpisodeResult::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back, r);
}

TEST(EvaluateSequential, ZeroEpisodesRejected) {
  const LLPRegistry reg = oracle_registry();
  SequentialArtifacts art{{}, scripted_hlp, &reg, {}};
  EXPECT_THROW(evaluate_sequential(PolicyMode::Hierarchical, art, EnvSpec::chained(Subtask::Place), 0, {0}),
               ConfigError);
}

TEST(EvaluateSequential, OracleHierarchyAndStalledSinglePolicy) {
  const LLPRegistry reg = oracle_registry();
  const EnvSpec chain = EnvSpec::chained(Subtask::Place);
  SequentialArtifacts art{zero_policy(), scripted_hlp, &reg, {}};
  const double hier = evaluate_sequential(PolicyMode::Hierarchical, art, chain, 10, {0, 1});
  const double single = evaluate_sequential(PolicyMode::SingleTD3HERBC, art, chain, 10, {0, 1});
  EXPECT_EQ(hier, 1.0);
  EXPECT_EQ(single, 0.0);
  EXPECT_GE(hier, single);
}

TEST(EvaluateSequential, WorkerCountDoesNotChangeOutcomes) {
  const LLPRegistry reg = oracle_registry();
  const EnvSpec chain = EnvSpec::chained(Subtask::Insert);
  SequentialArtifacts art{{}, scripted_hlp, &reg, {}};
  EXPECT_EQ(run_sequential(PolicyMode::Hierarchical, art, chain, 6, {3, 4}, 1),
            run_sequential(PolicyMode::Hierarchical, art, chain, 6, {3, 4}, 3));
}

TEST(PolicyMode, Names) {
  for (PolicyMode m : {PolicyMode::SingleTD3HER, PolicyMode::SingleTD3HERBC, PolicyMode::Hierarchical})
    EXPECT_EQ(policy_mode_from_string(to_string(m)), m);
  EXPECT_THROW(policy_mode_from_string("ppo"), ConfigError);
}

TEST(LlpManifest, SaveLoadAndFingerprintCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "stitch_llp_manifest_test";
  std::filesystem::remove_all(dir);
  agents::TD3Config cfg;
  cfg.hidden = 16;
  cfg.depth = 1;
  LLPRegistry reg;
  std::vector<agents::ActorPolicy> actors;
  for (Subtask s : {Subtask::Grasp, Subtask::Place}) {
    const ScenarioConfig c = default_config(s);
    agents::TD3Agent agent(cfg, agents::InputScaler(c.workspace), 17 + static_cast<int>(s));
    const auto ckpt = dir / std::string(to_string(s));
    agents::save_agent(agent, ckpt, EnvSpec::single(c).fingerprint());
    actors.push_back(agents::load_actor(ckpt, EnvSpec::single(c).fingerprint()));
    reg.set(s, actors.back(), c, ckpt);
  }
  reg.save_manifest(dir / "llps.txt", dir / "scenarios");

  const LLPRegistry back = LLPRegistry::load_manifest(dir / "llps.txt");
  EXPECT_NO_THROW(back.require(Subtask::Place));
  EXPECT_FALSE(back.has(Subtask::Insert));
  SutureEnv env = EnvSpec::chained(Subtask::Place).make();
  const Observation o = env.reset(3);
  EXPECT_EQ(back.at(Subtask::Grasp).policy(env, o), actors[0](env, o));

  // A scenario edit after training invalidates the checkpoint.
  ScenarioConfig edited = default_config(Subtask::Place);
  edited.success_trans_mm = 7.0;
  std::ofstream(dir / "scenarios" / "place.json") << scenario_to_json_text(edited);
  EXPECT_THROW(LLPRegistry::load_manifest(dir / "llps.txt"), VerificationError);
  std::filesystem::remove_all(dir);
}
