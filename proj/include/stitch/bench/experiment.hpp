#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stitch/agents/train.hpp"
#include "stitch/bench/report.hpp"
#include "stitch/demo/generator.hpp"
#include "stitch/hier/hier.hpp"

namespace stitch::bench {

/// Deterministic rollouts of `policy`, one isolated environment per job.
std::vector<EpisodeOutcome> run_policy_episodes(const agents::PolicyFn& policy, const EnvSpec& spec,
                                                const std::vector<EpisodeJob>& jobs, int workers);

/// episodes x seeds rollouts aggregated into one report row.
ReportRow evaluate(const agents::PolicyFn& policy, const EnvSpec& spec, int episodes,
                   const std::vector<std::uint64_t>& seeds, int workers, const std::string& label,
                   std::int64_t* env_steps = nullptr);

/// Loads an actor saved for `spec`; VerificationError when the checkpoint was
/// trained on another scenario.
ReportRow evaluate_checkpoint(const std::filesystem::path& dir, const EnvSpec& spec, int episodes,
                              const std::vector<std::uint64_t>& seeds, int workers, const std::string& label,
                              std::int64_t* env_steps = nullptr);

enum class Command { Train, Eval, DemoGen, Bench, HierEval };
std::string_view to_string(Command c);
Command command_from_string(std::string_view s);

/// Agent presets. Td3HerBc keeps the configured lambda_bc; Bc is supervised
/// regression on demos only.
enum class Algorithm { Ddpg, Td3, Td3Her, Td3HerBc, Bc };
std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view s);

struct DemoSpec {
  int episodes = 30;
  std::uint64_t seed = 0;
  /// Existing transition file; generated when empty.
  std::filesystem::path file;
};

struct HierSpec {
  std::vector<hier::PolicyMode> modes{hier::PolicyMode::SingleTD3HER, hier::PolicyMode::SingleTD3HERBC,
                                      hier::PolicyMode::Hierarchical};
  hier::ExecConfig exec;
  /// "scripted" or "classifier".
  std::string hlp = "scripted";
  hier::ClassifierConfig classifier;
  int hlp_episodes = 30;
  /// Trained LLPs to reuse; trained from scratch when empty.
  std::filesystem::path llp_manifest;
  /// Training budget for each LLP (the main "train" block covers the
  /// single-policy baselines).
  std::optional<agents::TrainConfig> llp_train;
};

struct ExperimentConfig {
  std::optional<Command> command;
  EnvSpec env;
  Algorithm algorithm = Algorithm::Td3HerBc;
  agents::TD3Config agent;
  agents::TrainConfig train;
  agents::BCConfig bc;
  DemoSpec demos;
  /// Evaluation seeds.
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int episodes = 20;
  int workers = 1;
  std::filesystem::path out = "runs";
  std::filesystem::path checkpoint;
  std::vector<double> bench_lambdas{0.2, 0.5, 0.8};
  std::vector<int> bench_demo_counts{10, 20, 30};
  HierSpec hier;

  /// Training seed (train.seed); `--seed` overrides it.
  std::uint64_t seed() const { return train.seed; }
  void validate(Command c) const;
};

/// Parses an experiment file. Unknown keys and bad values raise ConfigError
/// naming the field path; relative paths resolve against the file's folder.
ExperimentConfig load_experiment(const std::filesystem::path& path);
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Agent config after applying the algorithm preset.
agents::TD3Config effective_agent(const ExperimentConfig& cfg);

/// Runs `command`, writes artifacts and report.json under cfg.out, and
/// returns the report. Progress lines go to `progress` when given.
RunReport run_experiment(const ExperimentConfig& cfg, Command command, std::ostream* progress = nullptr);

}  // namespace stitch::bench
