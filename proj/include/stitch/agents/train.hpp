#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "stitch/agents/td3.hpp"

namespace stitch::agents {

struct TrainConfig {
  std::int64_t total_steps = 150000;
  /// Uniform random actions for this many initial steps.
  std::int64_t warmup_steps = 1000;
  /// Environment steps between update bursts, and updates per burst.
  int update_every = 1;
  int updates_per_burst = 1;
  std::int64_t log_every = 1000;
  /// 0 disables periodic evaluation / checkpoints.
  std::int64_t eval_every = 0;
  int eval_episodes = 10;
  std::int64_t checkpoint_every = 0;
  std::size_t buffer_capacity = 1'000'000;
  std::uint64_t seed = 0;

  void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");
nlohmann::json to_json(const TrainConfig& c);

struct LogRecord {
  std::int64_t step = 0;
  std::int64_t episodes = 0;
  std::int64_t updates = 0;
  /// Window means since the previous record.
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double bc_loss = 0.0;
  double filter_pass_rate = 0.0;
  double train_success = 0.0;
  std::optional<double> eval_success;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  /// Receives each log record as one JSON line.
  std::ostream* log = nullptr;
  /// Periodic checkpoints land in `checkpoint_dir/step_<N>`; empty disables.
  std::filesystem::path checkpoint_dir;
  /// Overrides the built-in evaluation (deterministic success rate).
  std::function<double(const TD3Agent&, std::int64_t step)> eval;
};

struct TrainResult {
  TD3Agent agent;
  std::vector<LogRecord> log;
  std::int64_t episodes = 0;
};

/// Off-policy training: noisy rollouts, hindsight relabeling at episode end,
/// TD3 updates with optional demonstration batches. Throws TrainingError on a
/// non-finite loss, naming the step.
TrainResult train_loop(const EnvSpec& spec, const TD3Config& agent_cfg, const TrainConfig& cfg,
                       const DemoDataset* demos, const TrainHooks& hooks = {});

/// Fraction of `episodes` deterministic rollouts that end in success.
double rollout_success(const PolicyFn& policy, const EnvSpec& spec, int episodes, std::uint64_t seed);

struct BCConfig {
  int epochs = 200;
  int batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Plain regression of actions onto demo states over shuffled minibatches.
/// Returns the mean loss of every epoch.
std::vector<double> bc_train(const DemoDataset& demo, Net& actor, const InputScaler& scaler, const BCConfig& cfg);

}  // namespace stitch::agents
