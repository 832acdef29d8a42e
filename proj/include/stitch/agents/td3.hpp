#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>

#include <json.hpp>

#include "stitch/agents/replay.hpp"
#include "stitch/nn/dense_net.hpp"

namespace stitch::agents {

// Learning runs in single precision; see README "Numerics".
using Real = float;
using Mat = nn::Matrix<Real>;
using Col = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Net = nn::DenseNet<Real>;

/// Network input features per pose: scaled position plus the first two
/// rotation-matrix columns. Unlike quaternion components these do not jump
/// when the sign convention flips.
inline constexpr int kPoseFeatures = 9;
/// Four observed poses, jaw, desired goal, the goal in the driven end
/// effector's frame, and that offset squashed at millimetre scale.
inline constexpr int kStateDim = 4 * kPoseFeatures + 1 + 2 * kPoseFeatures + 3;

/// Fixed map of (observation, goal) to network input. Positions are scaled
/// into roughly [-1, 1] by the workspace box, the jaw maps to [-1, 1].
class InputScaler {
 public:
  InputScaler() = default;
  explicit InputScaler(const WorkspaceBounds& ws);
  InputScaler(const Vec3& center, const Vec3& half_extent) : center_(center), half_(half_extent) {}

  void write(const ObsVector& obs, const Goal& goal, Real* row, Eigen::Index stride) const;
  Mat state(const ObsVector& obs, const Goal& goal) const;

  const Vec3& center() const { return center_; }
  const Vec3& half_extent() const { return half_; }

 private:
  Vec3 center_ = Vec3::Zero();
  Vec3 half_ = Vec3::Ones();
};

struct Batch {
  Mat state;       // N x kStateDim
  Mat action;      // N x kActionDim
  Col reward;
  Mat next_state;  // N x kStateDim
  Col done;        // 1 where bootstrapping stops

  Eigen::Index size() const { return state.rows(); }
};

Batch make_batch(std::span<const Transition* const> ts, const InputScaler& scaler);
/// Row-wise concatenation; empty inputs are skipped.
Batch concat(const Batch& a, const Batch& b);

struct TD3Config {
  double gamma = 0.99;
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  double explore_noise = 0.1;
  /// false gives DDPG: one critic, no target smoothing minimum.
  bool twin_critics = true;
  /// BC weight lambda2; the policy-gradient weight is 1 - lambda2.
  double lambda_bc = 0.0;
  bool use_her = true;
  int her_k = 3;
  bool q_filter = true;
  int batch_size = 256;       // N1
  int demo_batch_size = 128;  // N2
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  int hidden = 256;
  int depth = 4;

  double lambda_rl() const { return 1.0 - lambda_bc; }
  void validate() const;
};

TD3Config td3_config_from_json(const nlohmann::json& j, const std::string& path = "agent");
nlohmann::json to_json(const TD3Config& c);

/// Actor, twin critics, their target copies and optimizer state.
class TD3Agent {
 public:
  TD3Agent(const TD3Config& cfg, const InputScaler& scaler, std::uint64_t seed);

  TD3Config cfg;
  InputScaler scaler;
  /// Clamp applied to TD targets; set from the environment's reward structure.
  std::optional<std::pair<double, double>> value_bounds;

  Net actor, actor_target;
  std::array<Net, 2> critic, critic_target;
  nn::AdamState<Real> actor_opt;
  std::array<nn::AdamState<Real>, 2> critic_opt;
  std::int64_t critic_updates = 0;

  int critic_count() const { return cfg.twin_critics ? 2 : 1; }
};

/// y = r + gamma * (1 - done) * (twin ? min(q1, q2) : q1)
double td3_target_value(double r, bool done, double gamma, double q1, double q2, bool twin);

/// Target values for a batch using smoothed target actions.
Col td3_target(const Batch& b, const TD3Agent& agent, std::mt19937_64& rng);

Mat critic_input(const Mat& state, const Mat& action);

/// Regresses every critic onto the shared target; returns the mean squared TD
/// error averaged over critics.
double critic_update(const Batch& b, TD3Agent& agent, std::mt19937_64& rng);
/// Same, against precomputed targets.
double critic_update(const Batch& b, const Col& y, TD3Agent& agent);

/// Admits an expert action only when the critic strictly prefers it.
bool q_filter(double q_expert, double q_policy);

struct BCTerm {
  double loss = 0.0;
  double pass_rate = 0.0;
  /// d loss / d policy output, N2 x kActionDim.
  Mat output_grad;
};

/// (1/N2) * sum over filter-passing samples of |pi(s) - a|^2, with the filter
/// evaluated by `critic`. `filter` = false admits every sample.
BCTerm bc_loss(const Net& actor, const Net& critic, const Batch& demo, bool filter);

struct ActorStats {
  double actor_loss = 0.0;  // -mean Q(s, pi(s)) over the rollout batch
  double bc_loss = 0.0;
  double filter_pass_rate = 0.0;
};

/// One Adam step on lambda1 * grad(-J) + lambda2 * grad(L_BC). `demo` may be
/// null or empty, in which case only the policy-gradient term is used.
ActorStats actor_update(const Batch& rollout, const Batch* demo, TD3Agent& agent);

/// Polyak-averages every target network toward its source.
void update_targets(TD3Agent& agent);

struct UpdateStats {
  double critic_loss = 0.0;
  std::optional<ActorStats> actor;
};

/// One TD3 iteration: critic regression on rollout + demo samples, then every
/// policy_delay iterations an actor step and target update.
UpdateStats td3_update(const Batch& rollout, const Batch* demo, TD3Agent& agent, std::mt19937_64& rng);

/// Deterministic action, or that action plus clipped Gaussian noise.
Action select_action(const Net& actor, const InputScaler& scaler, const Observation& obs, double sigma,
                     bool deterministic, std::mt19937_64& rng);

/// Deterministic policy on observations; everything the evaluators need.
using PolicyFn = std::function<Action(const SutureEnv& env, const Observation& obs)>;

struct ActorPolicy {
  Net actor;
  InputScaler scaler;
  Action operator()(const SutureEnv& env, const Observation& obs) const;
};

/// Saves the networks plus a manifest (config, scaler, scenario fingerprint).
void save_agent(const TD3Agent& agent, const std::filesystem::path& dir, std::uint64_t scenario_fingerprint);
/// Loads the actor from a saved agent; rejects a fingerprint mismatch.
ActorPolicy load_actor(const std::filesystem::path& dir, std::uint64_t expected_fingerprint);

}  // namespace stitch::agents
