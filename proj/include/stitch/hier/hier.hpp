#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stitch/agents/td3.hpp"
#include "stitch/bench/parallel.hpp"
#include "stitch/env/suture_env.hpp"

namespace stitch::hier {

/// Stages are the Subtask values, ordered Grasp < Place < Insert < Handoff < Pullout.
using StageId = Subtask;

/// A high-level policy returns the stage to run next, or nullopt for Done.
using HLP = std::function<std::optional<StageId>(const SutureEnv& env)>;

/// Lowest stage of the scene whose termination predicate is false; nullopt
/// once every stage is satisfied.
std::optional<StageId> scripted_hlp(const SutureEnv& env);

/// Observation for the policy of `stage`: the scene observation with that
/// stage's achieved and desired goals.
Observation stage_observation(const SutureEnv& env, StageId stage);

struct ClassifierConfig {
  int hidden = 64;
  int depth = 2;
  int epochs = 60;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

// The classifier runs in double so its distributions sum to 1 within 1e-9.
using FeatureMat = nn::Matrix<double>;

/// Softmax classifier over the five stages.
struct ClassifierHLP {
  nn::DenseNet<double> net;

  /// Rows of stage probabilities.
  FeatureMat predict_proba(const FeatureMat& features) const;
  std::vector<int> predict(const FeatureMat& features) const;
  /// Classifies the scene's scaled observation; nullopt when the scene is
  /// finished.
  std::optional<StageId> operator()(const SutureEnv& env) const;
};

/// Scaled observation plus desired goal, the classifier's input row.
FeatureMat hlp_features(const SutureEnv& env);

/// Cross-entropy training on labeled rows. Throws ConfigError when a stage
/// label in 0..4 has no example or a label is out of range.
ClassifierHLP train_hlp_classifier(const FeatureMat& features, const std::vector<int>& labels,
                                   const ClassifierConfig& cfg);

struct LabeledStates {
  FeatureMat features;
  std::vector<int> labels;
};

/// Runs the scripted expert under the scripted HLP on a full chain and keeps
/// every visited state of the successful episodes, labeled with the stage
/// active at that state.
LabeledStates harvest_hlp_data(const EnvSpec& chain, int episodes, std::uint64_t seed);

struct LLPEntry {
  agents::PolicyFn policy;
  ScenarioConfig config;
  /// Where the policy came from; empty for in-memory policies.
  std::filesystem::path checkpoint;
};

class LLPRegistry {
 public:
  void set(StageId stage, agents::PolicyFn policy, const ScenarioConfig& config,
           std::filesystem::path checkpoint = {});
  bool has(StageId stage) const { return entries_[static_cast<int>(stage)].has_value(); }
  const LLPEntry& at(StageId stage) const;
  /// Throws ConfigError unless Grasp..last are all present.
  void require(StageId last) const;

  /// Text manifest, one "<stage> <checkpoint dir> <scenario json>" line per
  /// stage; relative paths resolve against the manifest's directory.
  void save_manifest(const std::filesystem::path& path, const std::filesystem::path& config_dir) const;
  /// Loads each actor, rejecting checkpoints whose fingerprint does not match
  /// the listed scenario.
  static LLPRegistry load_manifest(const std::filesystem::path& path);

 private:
  std::array<std::optional<LLPEntry>, kNumSubtasks> entries_;
};

struct ExecConfig {
  int stage_step_cap = 200;
  int total_step_cap = 1200;
  void validate() const;
};

enum class Outcome { Success, StageCap, TotalCap, Regression };
std::string_view to_string(Outcome o);

struct EpisodeResult {
  bool success = false;
  Outcome outcome = Outcome::TotalCap;
  StageId final_stage = StageId::Grasp;
  std::array<int, kNumSubtasks> stage_steps{};
  int total_steps = 0;
  /// Sum of applied world-frame translation norms over every step.
  double trajectory_length_mm = 0.0;
  /// Stages in the order the HLP handed control to them.
  std::vector<StageId> visited;

  nlohmann::json to_json() const;
  static EpisodeResult from_json(const nlohmann::json& j);
  bool operator==(const EpisodeResult&) const = default;
};

/// Cyclic execution on a reset chain scene: the HLP picks a stage, that
/// stage's LLP acts deterministically until the stage terminates or
/// `stage_step_cap` is hit, then control returns to the HLP. Ends on Done
/// (success), an exhausted stage or total cap, or the HLP choosing a stage
/// that is already complete.
EpisodeResult execute(const HLP& hlp, const LLPRegistry& llps, SutureEnv& env, const ExecConfig& cfg = {});

enum class PolicyMode { SingleTD3HER, SingleTD3HERBC, Hierarchical };
std::string_view to_string(PolicyMode m);
PolicyMode policy_mode_from_string(std::string_view s);

struct SequentialArtifacts {
  /// Full-chain policy for the single-policy modes.
  agents::PolicyFn single;
  /// Hierarchical mode.
  HLP hlp;
  const LLPRegistry* llps = nullptr;
  ExecConfig exec;
};

/// Episode outcomes of the Grasp..end_stage chain, seed-major. Single-policy
/// modes roll one policy over the chain until it terminates or truncates.
std::vector<bench::EpisodeOutcome> run_sequential(PolicyMode mode, const SequentialArtifacts& art,
                                                  const EnvSpec& chain, int episodes,
                                                  const std::vector<std::uint64_t>& seeds, int workers = 1);

/// Mean success over episodes x seeds. Throws ConfigError for zero episodes.
double evaluate_sequential(PolicyMode mode, const SequentialArtifacts& art, const EnvSpec& chain, int episodes,
                           const std::vector<std::uint64_t>& seeds, int workers = 1);

}  // namespace stitch::hier
