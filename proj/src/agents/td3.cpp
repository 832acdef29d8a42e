#include "stitch/agents/td3.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stitch/error.hpp"
#include "stitch/json_util.hpp"
#include "stitch/nn/checkpoint.hpp"

namespace stitch::agents {

using nlohmann::json;

InputScaler::InputScaler(const WorkspaceBounds& ws) : center_(ws.center()), half_(ws.half_extent()) {}

namespace {

// Offset scales of the end-effector-relative goal features: a coarse linear
// one and a saturating one that resolves the last millimetre.
constexpr double kRelativeScaleMm = 20.0;
constexpr double kFineScaleMm = 1.0;

void put_rotation(const Quat& q, Real* row, Eigen::Index stride, int col) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i) row[(col + 3 * c + i) * stride] = static_cast<Real>(r(i, c));
}

}  // namespace

void InputScaler::write(const ObsVector& obs, const Goal& goal, Real* row, Eigen::Index stride) const {
  auto pose_at = [&](const double* v) {
    const Quat q(v[3], v[4], v[5], v[6]);
    return Pose{Vec3(v[0], v[1], v[2]), q.norm() > 1e-12 ? q.normalized() : Quat::Identity()};
  };
  auto put_pose = [&](const Pose& p, int col) {
    for (int i = 0; i < 3; ++i) row[(col + i) * stride] = static_cast<Real>((p.position[i] - center_[i]) / half_[i]);
    put_rotation(p.orientation, row, stride, col + 3);
  };
  for (int p = 0; p < 4; ++p) put_pose(pose_at(obs.data() + 7 * p), kPoseFeatures * p);
  int col = 4 * kPoseFeatures;
  row[col++ * stride] = static_cast<Real>(2.0 * obs[28] - 1.0);
  const Pose g = pose_at(goal.data());
  put_pose(g, col);
  col += kPoseFeatures;
  const Pose ee = pose_at(obs.data());
  const Pose rel = ee.inverse() * g;
  for (int i = 0; i < 3; ++i) row[(col + i) * stride] = static_cast<Real>(rel.position[i] / kRelativeScaleMm);
  put_rotation(rel.orientation, row, stride, col + 3);
  col += kPoseFeatures;
  for (int i = 0; i < 3; ++i)
    row[(col + i) * stride] = static_cast<Real>(std::tanh(rel.position[i] / kFineScaleMm));
}

Mat InputScaler::state(const ObsVector& obs, const Goal& goal) const {
  Mat m(1, kStateDim);
  write(obs, goal, m.data(), 1);
  return m;
}

Batch make_batch(std::span<const Transition* const> ts, const InputScaler& scaler) {
  const Eigen::Index n = static_cast<Eigen::Index>(ts.size());
  Batch b;
  b.state.resize(n, kStateDim);
  b.next_state.resize(n, kStateDim);
  b.action.resize(n, kActionDim);
  b.reward.resize(n);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *ts[i];
    scaler.write(t.obs, t.desired_goal, b.state.data() + i, n);
    scaler.write(t.next_obs, t.desired_goal, b.next_state.data() + i, n);
    for (int k = 0; k < kActionDim; ++k) b.action(i, k) = static_cast<Real>(t.action[k]);
    b.reward(i) = static_cast<Real>(t.reward);
    b.done(i) = t.done ? Real(1) : Real(0);
  }
  return b;
}

Batch concat(const Batch& a, const Batch& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  auto rows = [](const auto& x, const auto& y) {
    std::decay_t<decltype(x)> out(x.rows() + y.rows(), x.cols());
    out << x, y;
    return out;
  };
  return {rows(a.state, b.state), rows(a.action, b.action), rows(a.reward, b.reward),
          rows(a.next_state, b.next_state), rows(a.done, b.done)};
}

void TD3Config::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("agent." + m); };
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma: must lie in (0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau: must lie in [0, 1]");
  if (policy_delay < 1) fail("policy_delay: must be >= 1");
  if (target_noise < 0.0 || target_noise_clip < 0.0 || explore_noise < 0.0) fail("noise scales must be >= 0");
  if (!(lambda_bc >= 0.0 && lambda_bc <= 1.0)) fail("lambda_bc: must lie in [0, 1]");
  if (her_k < 0) fail("her_k: must be >= 0");
  if (batch_size < 1) fail("batch_size: must be >= 1");
  if (demo_batch_size < 0) fail("demo_batch_size: must be >= 0");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) fail("learning rates must be positive");
  if (hidden < 1 || depth < 1) fail("hidden/depth: must be >= 1");
}

TD3Config td3_config_from_json(const json& j, const std::string& path) {
  jsonu::check_keys(j, path,
                    {"gamma", "tau", "policy_delay", "target_noise", "target_noise_clip", "explore_noise",
                     "twin_critics", "lambda_bc", "use_her", "her_k", "q_filter", "batch_size", "demo_batch_size",
                     "actor_lr", "critic_lr", "hidden", "depth"});
  TD3Config c;
  auto num = [&](const char* k, double& dst) {
    if (j.contains(k)) dst = jsonu::number_at(j[k], path + "." + k);
  };
  auto integer = [&](const char* k, int& dst) {
    if (j.contains(k)) dst = jsonu::integer_at(j[k], path + "." + k);
  };
  auto flag = [&](const char* k, bool& dst) {
    if (j.contains(k)) dst = jsonu::boolean_at(j[k], path + "." + k);
  };
  num("gamma", c.gamma);
  num("tau", c.tau);
  integer("policy_delay", c.policy_delay);
  num("target_noise", c.target_noise);
  num("target_noise_clip", c.target_noise_clip);
  num("explore_noise", c.explore_noise);
  flag("twin_critics", c.twin_critics);
  num("lambda_bc", c.lambda_bc);
  flag("use_her", c.use_her);
  integer("her_k", c.her_k);
  flag("q_filter", c.q_filter);
  integer("batch_size", c.batch_size);
  integer("demo_batch_size", c.demo_batch_size);
  num("actor_lr", c.actor_lr);
  num("critic_lr", c.critic_lr);
  integer("hidden", c.hidden);
  integer("depth", c.depth);
  c.validate();
  return c;
}

json to_json(const TD3Config& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"policy_delay", c.policy_delay},
          {"target_noise", c.target_noise},
          {"target_noise_clip", c.target_noise_clip},
          {"explore_noise", c.explore_noise},
          {"twin_critics", c.twin_critics},
          {"lambda_bc", c.lambda_bc},
          {"use_her", c.use_her},
          {"her_k", c.her_k},
          {"q_filter", c.q_filter},
          {"batch_size", c.batch_size},
          {"demo_batch_size", c.demo_batch_size},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"hidden", c.hidden},
          {"depth", c.depth}};
}

TD3Agent::TD3Agent(const TD3Config& config, const InputScaler& s, std::uint64_t seed) : cfg(config), scaler(s) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  actor = Net::mlp(kStateDim, kActionDim, nn::Head::Tanh, cfg.hidden, cfg.depth);
  actor.initialize(rng);
  actor_target = actor;
  actor_opt = nn::AdamState<Real>(actor.params(), cfg.actor_lr);
  for (int c = 0; c < 2; ++c) {
    critic[c] = Net::mlp(kStateDim + kActionDim, 1, nn::Head::Linear, cfg.hidden, cfg.depth);
    critic[c].initialize(rng);
    critic_target[c] = critic[c];
    critic_opt[c] = nn::AdamState<Real>(critic[c].params(), cfg.critic_lr);
  }
}

double td3_target_value(double r, bool done, double gamma, double q1, double q2, bool twin) {
  const double q = twin ? std::min(q1, q2) : q1;
  return r + gamma * (done ? 0.0 : 1.0) * q;
}

Mat critic_input(const Mat& state, const Mat& action) {
  Mat out(state.rows(), state.cols() + action.cols());
  out << state, action;
  return out;
}

Col td3_target(const Batch& b, const TD3Agent& agent, std::mt19937_64& rng) {
  const auto& c = agent.cfg;
  Mat a_next = agent.actor_target.forward(b.next_state);
  if (c.target_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, c.target_noise);
    for (Eigen::Index i = 0; i < a_next.rows(); ++i)
      for (Eigen::Index k = 0; k < a_next.cols(); ++k)
        a_next(i, k) += static_cast<Real>(std::clamp(noise(rng), -c.target_noise_clip, c.target_noise_clip));
  }
  a_next = a_next.cwiseMax(Real(-1)).cwiseMin(Real(1));
  const Mat in = critic_input(b.next_state, a_next);
  Col q = agent.critic_target[0].forward(in).col(0);
  if (c.twin_critics) q = q.cwiseMin(Col(agent.critic_target[1].forward(in).col(0)));
  Col y = b.reward + static_cast<Real>(c.gamma) * (Real(1) - b.done.array()).matrix().cwiseProduct(q);
  if (agent.value_bounds) {
    y = y.cwiseMax(static_cast<Real>(agent.value_bounds->first)).cwiseMin(static_cast<Real>(agent.value_bounds->second));
  }
  return y;
}

double critic_update(const Batch& b, const Col& y, TD3Agent& agent) {
  const Mat in = critic_input(b.state, b.action);
  const Real n = static_cast<Real>(b.size());
  double total = 0.0;
  for (int c = 0; c < agent.critic_count(); ++c) {
    Net::Cache cache;
    const Col diff = agent.critic[c].forward(in, cache).col(0) - y;
    total += static_cast<double>(diff.squaredNorm()) / b.size();
    const Mat up = (Real(2) / n) * diff;
    const auto grads = agent.critic[c].backward(cache, up);
    nn::adam_step(agent.critic[c].params(), grads, agent.critic_opt[c]);
  }
  return total / agent.critic_count();
}

double critic_update(const Batch& b, TD3Agent& agent, std::mt19937_64& rng) {
  const Col y = td3_target(b, agent, rng);
  return critic_update(b, y, agent);
}

bool q_filter(double q_expert, double q_policy) { return q_expert > q_policy; }

namespace {

BCTerm bc_term(const Mat& pi, const Net& critic, const Batch& demo, bool filter) {
  BCTerm t;
  const Eigen::Index n = demo.size();
  t.output_grad = Mat::Zero(n, kActionDim);
  if (n == 0) return t;
  Eigen::Array<bool, Eigen::Dynamic, 1> pass = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true);
  if (filter) {
    const Col q_expert = critic.forward(critic_input(demo.state, demo.action)).col(0);
    const Col q_policy = critic.forward(critic_input(demo.state, pi)).col(0);
    for (Eigen::Index i = 0; i < n; ++i) pass(i) = q_filter(q_expert(i), q_policy(i));
  }
  const Mat diff = pi - demo.action;
  double loss = 0.0;
  int passed = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!pass(i)) continue;
    ++passed;
    loss += static_cast<double>(diff.row(i).squaredNorm());
    t.output_grad.row(i) = (Real(2) / static_cast<Real>(n)) * diff.row(i);
  }
  t.loss = loss / static_cast<double>(n);
  t.pass_rate = static_cast<double>(passed) / static_cast<double>(n);
  return t;
}

}  // namespace

BCTerm bc_loss(const Net& actor, const Net& critic, const Batch& demo, bool filter) {
  return bc_term(actor.forward(demo.state), critic, demo, filter);
}

ActorStats actor_update(const Batch& rollout, const Batch* demo, TD3Agent& agent) {
  ActorStats st;
  const Real l1 = static_cast<Real>(agent.cfg.lambda_rl());
  const Real l2 = static_cast<Real>(agent.cfg.lambda_bc);
  const bool use_rl = l1 > Real(0) && rollout.size() > 0;
  const bool use_bc = l2 > Real(0) && demo != nullptr && demo->size() > 0;
  if (!use_rl && !use_bc) return st;

  nn::Params<Real> grads;
  if (use_rl) {
    Net::Cache actor_cache, critic_cache;
    const Mat pi = agent.actor.forward(rollout.state, actor_cache);
    const Col q = agent.critic[0].forward(critic_input(rollout.state, pi), critic_cache).col(0);
    st.actor_loss = -static_cast<double>(q.mean());
    const Mat up = Mat::Constant(rollout.size(), 1, Real(-1) / static_cast<Real>(rollout.size()));
    const Mat d_in = agent.critic[0].input_gradient(critic_cache, up);
    grads = agent.actor.backward(actor_cache, d_in.rightCols(kActionDim));
    if (l1 != Real(1))
      for (auto& l : grads) {
        l.weight *= l1;
        l.bias *= l1;
      }
  }
  if (use_bc) {
    Net::Cache cache;
    const Mat pi = agent.actor.forward(demo->state, cache);
    const BCTerm bc = bc_term(pi, agent.critic[0], *demo, agent.cfg.q_filter);
    st.bc_loss = bc.loss;
    st.filter_pass_rate = bc.pass_rate;
    const auto g = agent.actor.backward(cache, bc.output_grad);
    if (grads.empty()) {
      grads = nn::zeros_like(g);
    }
    nn::accumulate(grads, g, l2);
  }
  nn::adam_step(agent.actor.params(), grads, agent.actor_opt);
  return st;
}

void update_targets(TD3Agent& agent) {
  const Real tau = static_cast<Real>(agent.cfg.tau);
  nn::soft_update(agent.actor_target.params(), agent.actor.params(), tau);
  for (int c = 0; c < agent.critic_count(); ++c)
    nn::soft_update(agent.critic_target[c].params(), agent.critic[c].params(), tau);
}

UpdateStats td3_update(const Batch& rollout, const Batch* demo, TD3Agent& agent, std::mt19937_64& rng) {
  UpdateStats st;
  const bool with_demo = demo != nullptr && demo->size() > 0;
  st.critic_loss = with_demo ? critic_update(concat(rollout, *demo), agent, rng) : critic_update(rollout, agent, rng);
  ++agent.critic_updates;
  if (agent.critic_updates % agent.cfg.policy_delay == 0) {
    st.actor = actor_update(rollout, with_demo ? demo : nullptr, agent);
    update_targets(agent);
  }
  return st;
}

Action select_action(const Net& actor, const InputScaler& scaler, const Observation& obs, double sigma,
                     bool deterministic, std::mt19937_64& rng) {
  const Mat out = actor.forward(scaler.state(obs.vector, obs.desired_goal));
  Action a{};
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  for (int k = 0; k < kActionDim; ++k) {
    double v = static_cast<double>(out(0, k));
    if (!deterministic && sigma > 0.0) v += noise(rng);
    a[k] = std::clamp(v, -1.0, 1.0);
  }
  return a;
}

Action ActorPolicy::operator()(const SutureEnv&, const Observation& obs) const {
  std::mt19937_64 unused;
  return select_action(actor, scaler, obs, 0.0, true, unused);
}

namespace {

constexpr const char* kAgentFormat = "stitch-agent";
constexpr int kAgentVersion = 1;

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << v;
  return ss.str();
}

}  // namespace

void save_agent(const TD3Agent& agent, const std::filesystem::path& dir, std::uint64_t scenario_fingerprint) {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint(agent.actor, dir / "actor.bin");
  for (int c = 0; c < agent.critic_count(); ++c)
    nn::save_checkpoint(agent.critic[c], dir / ("critic" + std::to_string(c) + ".bin"));
  const json manifest = {{"format", kAgentFormat},
                         {"version", kAgentVersion},
                         {"agent", to_json(agent.cfg)},
                         {"scaler", {{"center", jsonu::to_json(agent.scaler.center())},
                                     {"half_extent", jsonu::to_json(agent.scaler.half_extent())}}},
                         {"scenario_fingerprint", hex(scenario_fingerprint)},
                         {"critic_updates", agent.critic_updates}};
  std::ofstream out(dir / "agent.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw FormatError("cannot write " + (dir / "agent.json").string());
}

ActorPolicy load_actor(const std::filesystem::path& dir, std::uint64_t expected_fingerprint) {
  std::ifstream in(dir / "agent.json");
  if (!in) throw ConfigError("no agent manifest in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const json m = jsonu::parse(ss.str(), (dir / "agent.json").string());
  if (!m.contains("format") || m["format"] != kAgentFormat || !m.contains("version"))
    throw FormatError((dir / "agent.json").string() + ": not an agent manifest");
  if (m["version"] != kAgentVersion)
    throw FormatError((dir / "agent.json").string() + ": unsupported agent manifest version");
  const std::string fp = m.value("scenario_fingerprint", "");
  if (fp != hex(expected_fingerprint))
    throw VerificationError("agent in " + dir.string() + " was trained on scenario " + fp +
                            ", evaluation scenario is " + hex(expected_fingerprint));
  const TD3Config cfg = td3_config_from_json(m["agent"], "agent");
  ActorPolicy p;
  p.actor = nn::load_checkpoint<Real>(dir / "actor.bin",
                                      Net::mlp(kStateDim, kActionDim, nn::Head::Tanh, cfg.hidden, cfg.depth).widths(),
                                      nn::Head::Tanh);
  p.scaler = InputScaler(jsonu::vec3_at(m["scaler"]["center"], "scaler.center"),
                         jsonu::vec3_at(m["scaler"]["half_extent"], "scaler.half_extent"));
  return p;
}

}  // namespace stitch::agents
