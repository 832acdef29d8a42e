#include "stitch/agents/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "stitch/error.hpp"
#include "stitch/json_util.hpp"

namespace stitch::agents {

using nlohmann::json;

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train." + m); };
  if (total_steps < 0) fail("total_steps: must be >= 0");
  if (warmup_steps < 0) fail("warmup_steps: must be >= 0");
  if (update_every < 1 || updates_per_burst < 0) fail("update_every/updates_per_burst: out of range");
  if (log_every < 1) fail("log_every: must be >= 1");
  if (eval_every < 0 || checkpoint_every < 0) fail("eval_every/checkpoint_every: must be >= 0");
  if (eval_episodes < 1) fail("eval_episodes: must be >= 1");
  if (buffer_capacity < 1) fail("buffer_capacity: must be >= 1");
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
  jsonu::check_keys(j, path,
                    {"total_steps", "warmup_steps", "update_every", "updates_per_burst", "log_every", "eval_every",
                     "eval_episodes", "checkpoint_every", "buffer_capacity", "seed"});
  TrainConfig c;
  auto i64 = [&](const char* k, auto& dst) {
    if (!j.contains(k)) return;
    if (!j[k].is_number_integer()) throw ConfigError(path + "." + k + ": expected an integer");
    dst = j[k].get<std::remove_reference_t<decltype(dst)>>();
  };
  i64("total_steps", c.total_steps);
  i64("warmup_steps", c.warmup_steps);
  i64("update_every", c.update_every);
  i64("updates_per_burst", c.updates_per_burst);
  i64("log_every", c.log_every);
  i64("eval_every", c.eval_every);
  i64("eval_episodes", c.eval_episodes);
  i64("checkpoint_every", c.checkpoint_every);
  i64("buffer_capacity", c.buffer_capacity);
  i64("seed", c.seed);
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"total_steps", c.total_steps},       {"warmup_steps", c.warmup_steps},
          {"update_every", c.update_every},     {"updates_per_burst", c.updates_per_burst},
          {"log_every", c.log_every},           {"eval_every", c.eval_every},
          {"eval_episodes", c.eval_episodes},   {"checkpoint_every", c.checkpoint_every},
          {"buffer_capacity", c.buffer_capacity}, {"seed", c.seed}};
}

json LogRecord::to_json() const {
  json j = {{"step", step},
            {"episodes", episodes},
            {"updates", updates},
            {"critic_loss", critic_loss},
            {"actor_loss", actor_loss},
            {"bc_loss", bc_loss},
            {"filter_pass_rate", filter_pass_rate},
            {"train_success", train_success}};
  j["eval_success"] = eval_success ? json(*eval_success) : json(nullptr);
  return j;
}

double rollout_success(const PolicyFn& policy, const EnvSpec& spec, int episodes, std::uint64_t seed) {
  std::mt19937_64 seeds(seed);
  int wins = 0;
  for (int e = 0; e < episodes; ++e) {
    SutureEnv env = spec.make();
    Observation obs = env.reset(seeds());
    for (;;) {
      const Action a = policy(env, obs);
      const StepResult r = env.step(a);
      obs = r.obs;
      if (r.terminated) {
        ++wins;
        break;
      }
      if (r.truncated) break;
    }
  }
  return episodes > 0 ? static_cast<double>(wins) / episodes : 0.0;
}

namespace {

struct Window {
  double critic = 0, actor = 0, bc = 0, pass = 0;
  int critic_n = 0, actor_n = 0, bc_n = 0;
  int episodes = 0, wins = 0;

  void add(const UpdateStats& s, bool has_demo) {
    critic += s.critic_loss;
    ++critic_n;
    if (s.actor) {
      actor += s.actor->actor_loss;
      ++actor_n;
      if (has_demo) {
        bc += s.actor->bc_loss;
        pass += s.actor->filter_pass_rate;
        ++bc_n;
      }
    }
  }
};

// Independent generators for each consumer so that, e.g., changing the eval
// schedule never perturbs the training trajectory.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

Batch sample_batch(const ReplayBuffer& buf, std::size_t n, const InputScaler& scaler, std::mt19937_64& rng) {
  const auto idx = buf.sample_indices(n, rng);
  std::vector<const Transition*> ptrs(n);
  for (std::size_t i = 0; i < n; ++i) ptrs[i] = &buf.at(idx[i]);
  return make_batch(ptrs, scaler);
}

Batch sample_demo(const DemoDataset& demo, std::size_t n, const InputScaler& scaler, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> u(0, demo.transitions.size() - 1);
  std::vector<const Transition*> ptrs(n);
  for (auto& p : ptrs) p = &demo.transitions[u(rng)];
  return make_batch(ptrs, scaler);
}

}  // namespace

TrainResult train_loop(const EnvSpec& spec, const TD3Config& agent_cfg, const TrainConfig& cfg,
                       const DemoDataset* demos, const TrainHooks& hooks) {
  cfg.validate();
  SutureEnv env = spec.make();
  const InputScaler scaler(spec.goal_config().workspace);
  TrainResult result{TD3Agent(agent_cfg, scaler, stream(cfg.seed, 1)()), {}, 0};
  TD3Agent& agent = result.agent;
  agent.value_bounds = env.value_bounds(agent_cfg.gamma);

  const bool has_demo = demos != nullptr && !demos->transitions.empty() && agent_cfg.demo_batch_size > 0;
  if (has_demo) demos->validate();

  std::mt19937_64 episode_rng = stream(cfg.seed, 2);
  std::mt19937_64 act_rng = stream(cfg.seed, 3);
  std::mt19937_64 update_rng = stream(cfg.seed, 4);
  std::mt19937_64 her_rng = stream(cfg.seed, 5);
  const std::uint64_t eval_seed = stream(cfg.seed, 6)();

  ReplayBuffer buffer(cfg.buffer_capacity);
  const RewardFn reward_fn = [&env](const Goal& a, const Goal& d) { return env.goal_reward(a, d); };
  const SuccessFn success_fn = [&env](const Goal& a, const Goal& d) { return env.goal_success(a, d); };

  Window window;
  std::vector<Transition> episode;
  Observation obs = env.reset(episode_rng());
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  auto evaluate_now = [&](std::int64_t step) {
    if (hooks.eval) return hooks.eval(agent, step);
    const ActorPolicy policy{agent.actor, agent.scaler};
    return rollout_success(policy, spec, cfg.eval_episodes, eval_seed);
  };

  for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
    Action a{};
    if (step <= cfg.warmup_steps) {
      for (auto& x : a) x = uniform(act_rng);
    } else {
      a = select_action(agent.actor, scaler, obs, agent_cfg.explore_noise, false, act_rng);
    }
    const StepResult r = env.step(a);
    Transition t;
    t.obs = obs.vector;
    t.action = a;
    t.reward = r.reward;
    t.next_obs = r.obs.vector;
    t.done = r.terminated;
    t.truncated = r.truncated;
    t.achieved_goal = r.obs.achieved_goal;
    t.desired_goal = obs.desired_goal;
    episode.push_back(t);
    obs = r.obs;

    if (r.terminated || r.truncated) {
      buffer.add_episode(episode);
      if (agent_cfg.use_her)
        for (const auto& v : her_relabel(episode, agent_cfg.her_k, reward_fn, success_fn, her_rng)) buffer.add(v);
      ++result.episodes;
      ++window.episodes;
      if (r.terminated) ++window.wins;
      episode.clear();
      obs = env.reset(episode_rng());
    }

    const bool can_update = step > cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(agent_cfg.batch_size);
    if (can_update && step % cfg.update_every == 0) {
      for (int u = 0; u < cfg.updates_per_burst; ++u) {
        const Batch rollout = sample_batch(buffer, agent_cfg.batch_size, scaler, update_rng);
        std::optional<Batch> demo;
        if (has_demo) demo = sample_demo(*demos, agent_cfg.demo_batch_size, scaler, update_rng);
        const UpdateStats s = td3_update(rollout, demo ? &*demo : nullptr, agent, update_rng);
        if (!std::isfinite(s.critic_loss))
          throw TrainingError("non-finite critic loss at step " + std::to_string(step));
        if (s.actor && !(std::isfinite(s.actor->actor_loss) && std::isfinite(s.actor->bc_loss)))
          throw TrainingError("non-finite actor loss at step " + std::to_string(step));
        window.add(s, has_demo);
      }
    }

    if (cfg.checkpoint_every > 0 && !hooks.checkpoint_dir.empty() && step % cfg.checkpoint_every == 0)
      save_agent(agent, hooks.checkpoint_dir / ("step_" + std::to_string(step)), spec.fingerprint());

    const bool eval_due = cfg.eval_every > 0 && step % cfg.eval_every == 0;
    if (step % cfg.log_every == 0 || eval_due || step == cfg.total_steps) {
      LogRecord rec;
      rec.step = step;
      rec.episodes = result.episodes;
      rec.updates = agent.critic_updates;
      if (window.critic_n) rec.critic_loss = window.critic / window.critic_n;
      if (window.actor_n) rec.actor_loss = window.actor / window.actor_n;
      if (window.bc_n) {
        rec.bc_loss = window.bc / window.bc_n;
        rec.filter_pass_rate = window.pass / window.bc_n;
      }
      if (window.episodes) rec.train_success = static_cast<double>(window.wins) / window.episodes;
      if (eval_due) rec.eval_success = evaluate_now(step);
      if (hooks.log) *hooks.log << rec.to_json().dump() << std::endl;
      result.log.push_back(rec);
      window = Window{};
    }
  }
  return result;
}

std::vector<double> bc_train(const DemoDataset& demo, Net& actor, const InputScaler& scaler, const BCConfig& cfg) {
  if (demo.transitions.empty()) throw TrainingError("bc_train: empty demonstration set");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ConfigError("bc: epochs >= 0 and batch_size >= 1 required");
  std::mt19937_64 rng(cfg.seed);
  nn::AdamState<Real> opt(actor.params(), cfg.lr);
  const std::size_t n = demo.transitions.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Transition*> ptrs;
      for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&demo.transitions[order[i]]);
      const Batch b = make_batch(ptrs, scaler);
      Net::Cache cache;
      const Mat diff = actor.forward(b.state, cache) - b.action;
      total += static_cast<double>(diff.squaredNorm());
      const Mat up = (Real(2) / static_cast<Real>(b.size())) * diff;
      nn::adam_step(actor.params(), actor.backward(cache, up), opt);
    }
    const double loss = total / static_cast<double>(n);
    if (!std::isfinite(loss)) throw TrainingError("bc_train: non-finite loss at epoch " + std::to_string(epoch));
    losses.push_back(loss);
  }
  return losses;
}

}  // namespace stitch::agents
