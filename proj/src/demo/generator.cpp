#include "stitch/demo/generator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "stitch/env/expert.hpp"
#include "stitch/env/needle.hpp"
#include "stitch/error.hpp"
#include "stitch/json_util.hpp"

namespace stitch::demo {

namespace {

using jsonu::json;

// Tolerance for "the arm sits on the planned goal".
constexpr double kReachedMm = 1e-6;
constexpr double kReachedDeg = 1e-6;
// Extra servo steps spent settling on a plan's goal.
constexpr int kSettleSteps = 10;

Frame frame_of(Subtask stage, int phase) {
  if ((stage == Subtask::Insert && phase == 1) || (stage == Subtask::Pullout && phase == 0)) return Frame::Needle;
  return Frame::EndEffector;
}

double arc_lo(Subtask stage) { return stage == Subtask::Insert ? -90.0 : 180.0; }

bool holds_needle(Subtask stage) { return stage != Subtask::Grasp && stage != Subtask::Handoff; }

// Largest step of `traj`, as a fraction of the step limits.
double max_step_ratio(const DemoTrajectory& traj, const StepLimits& limits) {
  double m = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const DeltaAction d = relative_delta(traj.pose[i - 1], traj.pose[i]);
    m = std::max(m, d.dpos.cwiseAbs().cwiseQuotient(limits.dpos).maxCoeff());
    m = std::max(m, d.drot.cwiseAbs().cwiseQuotient(limits.drot).maxCoeff());
  }
  return m;
}

agents::Transition make_transition(const Observation& before, const Action& a, const StepResult& r) {
  agents::Transition t;
  t.obs = before.vector;
  t.action = a;
  t.reward = r.reward;
  t.next_obs = r.obs.vector;
  t.done = r.terminated;
  t.truncated = r.truncated;
  t.achieved_goal = r.obs.achieved_goal;
  t.desired_goal = before.desired_goal;
  return t;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t episode, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32),
                    static_cast<std::uint32_t>(attempt)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

ExpertRecording record_expert(const EnvSpec& chain_spec, std::uint64_t seed) {
  SutureEnv env = chain_spec.make();
  env.reset(seed);
  const ScriptedExpert expert;
  const double dt = env.stage_config(env.first_stage()).control_period_s;

  ExpertRecording rec;
  auto record = [&](int step) {
    const Subtask stage = env.current_stage();
    const ArmState& arm = env.state().arms[active_arm(stage)];
    rec.ee.push_back(step * dt, arm.ee, arm.jaw, static_cast<int>(stage));
    rec.phase.push_back(expert.phase(env));
    rec.needle.push_back(env.state().needle);
  };
  for (int step = 0;; ++step) {
    record(step);
    const StepResult r = env.step(expert.act(env));
    if (r.terminated) {
      // The end pose of the last motion, still labeled with the final stage.
      const ArmState& arm = env.state().arms[active_arm(env.last_stage())];
      rec.ee.push_back((step + 1) * dt, arm.ee, arm.jaw, static_cast<int>(env.last_stage()));
      rec.phase.push_back(rec.phase.back());
      rec.needle.push_back(env.state().needle);
      return rec;
    }
    if (r.truncated)
      throw VerificationError("record_expert: expert did not finish the chain within " +
                              std::to_string(env.max_episode_steps()) + " steps (seed " + std::to_string(seed) + ")");
  }
}

DMPLibrary DMPLibrary::fit(const ExpertRecording& rec, const std::array<ScenarioConfig, kNumSubtasks>& stages,
                           const DMPParams& params) {
  params.validate();
  // Checks label order; the finer (stage, phase) split happens below.
  segment(rec.ee);

  DMPLibrary lib;
  const std::size_t n = rec.ee.size();
  std::size_t begin = 0;
  while (begin + 1 < n) {
    const int label = rec.ee.label[begin];
    const int phase = rec.phase[begin];
    std::size_t end = begin;
    while (end + 1 < n && rec.ee.label[end + 1] == label && rec.phase[end + 1] == phase) ++end;
    // Include the state reached by the segment's last action.
    const std::size_t last = std::min(end + 1, n - 1);

    Primitive p;
    p.stage = static_cast<Subtask>(label);
    p.phase = phase;
    p.frame = frame_of(p.stage, phase);
    const SceneGeometry& g = stages[label].scene;
    DemoTrajectory seg;
    for (std::size_t i = begin; i <= last; ++i) {
      Pose pose = rec.ee.pose[i];
      // Arc motions are stored on the ideal arc at the recorded progress.
      if (p.frame == Frame::Needle)
        pose = needle::at_progress(g, needle::progress_of(g, rec.needle[i], arc_lo(p.stage)));
      seg.push_back(rec.ee.t[i] - rec.ee.t[begin], pose, rec.ee.jaw[i]);
    }
    p.duration = seg.duration();
    try {
      p.model = dmp_fit(velocity_filter(seg), params);
    } catch (const FormatError&) {
      p.model.reset();
    }
    if (std::none_of(lib.prims_.begin(), lib.prims_.end(),
                     [&](const Primitive& q) { return q.stage == p.stage && q.phase == p.phase; }))
      lib.prims_.push_back(std::move(p));
    begin = end + 1;
  }
  return lib;
}

const Primitive& DMPLibrary::find(Subtask stage, int phase) const {
  for (const Primitive& p : prims_)
    if (p.stage == stage && p.phase == phase) return p;
  throw ConfigError("DMPLibrary: no primitive for " + std::string(to_string(stage)) + " phase " +
                    std::to_string(phase));
}

DemoTrajectory min_jerk(const Pose& start, const Pose& goal, double duration, double dt) {
  if (!(dt > 0.0) || duration < dt) throw ConfigError("min_jerk: need duration >= dt > 0");
  const int steps = static_cast<int>(std::ceil(duration / dt - 1e-9));
  DemoTrajectory out;
  for (int k = 0; k <= steps; ++k) {
    const double s = std::min(1.0, k * dt / duration);
    const double m = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    Pose p;
    p.position = start.position + m * (goal.position - start.position);
    p.orientation = start.orientation.slerp(m, goal.orientation).normalized();
    out.push_back(k * dt, p, 1.0);
  }
  out.pose.front() = start;
  out.pose.back() = goal;
  return out;
}

std::vector<agents::Transition> traj_to_transitions(const DemoTrajectory& traj, SutureEnv& env) {
  traj.validate();
  std::vector<agents::Transition> out;
  Observation obs = env.observe();
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const Subtask stage = env.current_stage();
    const ScenarioConfig& c = env.stage_config(stage);
    DeltaAction d = relative_delta(env.state().arms[active_arm(stage)].ee, traj.pose[i]);
    d.jaw = traj.jaw[i] >= 0.5 ? 1.0 : 0.0;
    if (!c.step_limits.admits(d, 1e-6))
      throw VerificationError("traj_to_transitions: sample " + std::to_string(i) + " exceeds the step limits");
    const Action a = delta_to_action(d, c.step_limits);
    const StepResult r = env.step(a);
    out.push_back(make_transition(obs, a, r));
    obs = r.obs;
    if (r.terminated || r.truncated) break;
  }
  return out;
}

DemoTrajectory plan_motion(const SutureEnv& env, const DMPLibrary& lib, double speed_margin) {
  const ScriptedExpert expert;
  const EnvState& s = env.state();
  const Subtask stage = env.current_stage();
  const int phase = expert.phase(env);
  const ScenarioConfig& c = env.stage_config(stage);
  const SceneGeometry& g = c.scene;
  const Primitive& prim = lib.find(stage, phase);
  const Pose ee = s.arms[active_arm(stage)].ee;
  const Pose holder_from_needle = s.needle_in_holder.inverse();

  Pose start = ee;
  Pose goal;
  switch (stage) {
    case Subtask::Grasp: goal = s.needle * needle::grasp_frame(g); break;
    case Subtask::Handoff: goal = s.needle * needle::handoff_frame(g); break;
    case Subtask::Place:
      goal = needle::place_goal(g) * needle::tip_frame(g).inverse() * holder_from_needle;
      break;
    case Subtask::Insert:
      if (phase == 0) {
        goal = needle::at_progress(g, -expert.pre_entry_deg) * holder_from_needle;
      } else {
        start = s.needle;
        goal = needle::at_progress(g, needle::insert_progress_deg(g));
      }
      break;
    case Subtask::Pullout:
      if (phase == 1) {
        goal = needle::pullout_needle_pose(g) * holder_from_needle;
      } else {
        start = s.needle;
        goal = needle::at_progress(g, needle::pullout_progress_deg(g));
      }
      break;
  }

  const double dt = c.control_period_s;
  const double demo_tau = prim.model ? prim.model->tau : std::max(prim.duration, dt);
  auto rollout = [&](double k) {
    const double duration = std::max(k * demo_tau, 2.0 * dt);
    DemoTrajectory t = prim.model ? dmp_rollout(*prim.model, start, goal, duration, dt, duration)
                                  : min_jerk(start, goal, duration, dt);
    if (prim.frame == Frame::Needle)
      for (Pose& p : t.pose) p = p * holder_from_needle;
    return t;
  };

  // Time-scale the primitive until every step fits inside the margin.
  double k = 1.0;
  DemoTrajectory plan = rollout(k);
  for (int it = 0; it < 8; ++it) {
    const double m = max_step_ratio(plan, c.step_limits);
    if (m <= speed_margin && (it > 0 || m > 0.5 * speed_margin)) break;
    k *= std::max(m, 1e-3) / speed_margin * (m > speed_margin ? 1.02 : 1.0);
    plan = rollout(k);
  }

  // The rollout stops at tau; the exact goal follows.
  const Pose ee_goal = prim.frame == Frame::Needle ? goal * holder_from_needle : goal;
  plan.push_back(plan.t.back() + dt, ee_goal, 1.0);
  const bool closes = stage == Subtask::Grasp || stage == Subtask::Handoff;
  if (closes) plan.push_back(plan.t.back() + dt, ee_goal, 0.0);
  if (holds_needle(stage)) std::fill(plan.jaw.begin(), plan.jaw.end(), 0.0);
  return plan;
}

std::vector<agents::Transition> generate_episode(SutureEnv& env, const DMPLibrary& lib, double speed_margin,
                                                 double* length_mm) {
  const ScriptedExpert expert;
  std::vector<agents::Transition> out;
  Observation obs = env.observe();
  for (;;) {
    const Subtask stage = env.current_stage();
    const int phase = expert.phase(env);
    const DemoTrajectory plan = plan_motion(env, lib, speed_margin);
    const ScenarioConfig& c = env.stage_config(stage);
    const Pose& goal = plan.pose.back();
    bool replan = false;
    for (std::size_t i = 1; i < plan.size() && !replan; ++i) {
      const bool settle = plan.pose[i] == goal;
      for (int tries = 0; tries < (settle ? kSettleSteps : 1); ++tries) {
        const Pose& ee = env.state().arms[active_arm(stage)].ee;
        const Action a = servo_action(ee, plan.pose[i], c.step_limits, plan.jaw[i] >= 0.5);
        const StepResult r = env.step(a);
        out.push_back(make_transition(obs, a, r));
        obs = r.obs;
        if (length_mm) *length_mm += r.info.applied_translation_mm;
        if (r.terminated || r.truncated) return out;
        if (env.current_stage() != stage || expert.phase(env) != phase) {
          replan = true;
          break;
        }
        const Pose& now = env.state().arms[active_arm(stage)].ee;
        if (translation_error(now, plan.pose[i]) <= kReachedMm && rotation_error(now, plan.pose[i]) <= kReachedDeg)
          break;
      }
    }
  }
}

void TransitionFile::check(const EnvSpec& expected) const {
  if (fingerprint != expected.fingerprint())
    throw VerificationError("transition file fingerprint " + hex(fingerprint) + " does not match scenario " +
                            hex(expected.fingerprint()));
}

TransitionFile generate_demo_set(const EnvSpec& spec, int n, std::uint64_t seed, const GeneratorConfig& cfg) {
  if (n < 0) throw ConfigError("generate_demo_set: negative episode count");
  if (cfg.max_attempts < 1) throw ConfigError("generate_demo_set: max_attempts must be >= 1");
  if (!(cfg.speed_margin > 0.0 && cfg.speed_margin <= 1.0))
    throw ConfigError("generate_demo_set: speed_margin must be in (0, 1]");

  TransitionFile file;
  file.spec = spec;
  file.fingerprint = spec.fingerprint();
  const int first = spec.chain ? 0 : static_cast<int>(spec.last);
  for (int k = first; k <= static_cast<int>(spec.last); ++k)
    file.thresholds.emplace_back(spec.stages[k].success_trans_mm, spec.stages[k].success_angle_deg);
  file.data.source = agents::DemoSource::Heuristic;
  if (n == 0) return file;

  const EnvSpec reference = EnvSpec::chained(spec.stages, Subtask::Pullout);
  const DMPLibrary lib = DMPLibrary::fit(record_expert(reference, cfg.reference_seed), spec.stages, cfg.dmp);

  std::vector<std::vector<agents::Transition>> episodes(static_cast<std::size_t>(n));
  std::vector<double> lengths(static_cast<std::size_t>(n), 0.0);
  std::vector<std::string> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, cfg.workers))
  for (int i = 0; i < n; ++i) {
    try {
      SutureEnv env = spec.make();
      for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        env.reset(derive_seed(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt)));
        double length = 0.0;
        std::vector<agents::Transition> ep = generate_episode(env, lib, cfg.speed_margin, &length);
        if (!ep.empty() && ep.back().done) {
          episodes[i] = std::move(ep);
          lengths[i] = length;
          break;
        }
      }
      if (episodes[i].empty())
        errors[i] = "episode " + std::to_string(i) + " failed verification in " + std::to_string(cfg.max_attempts) +
                    " attempts";
    } catch (const std::exception& e) {
      errors[i] = "episode " + std::to_string(i) + ": " + e.what();
    }
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw VerificationError("generate_demo_set: " + e);
  for (const auto& ep : episodes) file.data.add_episode(ep);
  file.data.validate();
  file.length_mm = std::move(lengths);
  return file;
}

namespace {

json vec_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

template <std::size_t N>
std::array<double, N> vec_at(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != N)
    throw FormatError(std::string("transition record: '") + key + "' must have " + std::to_string(N) + " entries");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
  return out;
}

}  // namespace

void write_transitions(std::ostream& out, const TransitionFile& file) {
  json stages = json::array();
  for (const ScenarioConfig& c : file.spec.stages) stages.push_back(json::parse(scenario_to_json_text(c)));
  json thresholds = json::array();
  for (const auto& [mm, deg] : file.thresholds) thresholds.push_back({{"trans_mm", mm}, {"angle_deg", deg}});
  const json header = {{"format", "stitch-transitions"},
                       {"version", TransitionFile::kVersion},
                       {"subtask", std::string(to_string(file.spec.last))},
                       {"chain", file.spec.chain},
                       {"thresholds", thresholds},
                       {"fingerprint", hex(file.fingerprint)},
                       {"episodes", file.data.episode_count()},
                       {"source", std::string(agents::to_string(file.data.source))},
                       {"scenarios", stages}};
  out << header.dump() << '\n';
  for (std::size_t e = 0; e < file.data.episode_count(); ++e) {
    for (const agents::Transition& t : file.data.episode(e)) {
      const json rec = {{"episode", e},
                        {"obs", vec_json(t.obs)},
                        {"action", vec_json(t.action)},
                        {"reward", t.reward},
                        {"next_obs", vec_json(t.next_obs)},
                        {"done", t.done},
                        {"truncated", t.truncated},
                        {"achieved_goal", vec_json(t.achieved_goal)},
                        {"desired_goal", vec_json(t.desired_goal)}};
      out << rec.dump() << '\n';
    }
  }
}

TransitionFile read_transitions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("transition file: missing header");
  TransitionFile file;
  std::size_t episodes = 0;
  try {
    const json h = json::parse(line);
    if (h.at("format").get<std::string>() != "stitch-transitions")
      throw FormatError("transition file: unknown format '" + h.at("format").get<std::string>() + "'");
    if (h.at("version").get<int>() != TransitionFile::kVersion)
      throw FormatError("transition file: unsupported version " + std::to_string(h.at("version").get<int>()));
    const json& stages = h.at("scenarios");
    if (!stages.is_array() || stages.size() != kNumSubtasks)
      throw FormatError("transition file: 'scenarios' must list five stages");
    for (int k = 0; k < kNumSubtasks; ++k) file.spec.stages[k] = scenario_from_json_text(stages[k].dump());
    file.spec.last = subtask_from_string(h.at("subtask").get<std::string>());
    file.spec.chain = h.at("chain").get<bool>();
    for (const json& t : h.at("thresholds"))
      file.thresholds.emplace_back(t.at("trans_mm").get<double>(), t.at("angle_deg").get<double>());
    file.fingerprint = std::stoull(h.at("fingerprint").get<std::string>(), nullptr, 16);
    file.data.source = agents::demo_source_from_string(h.at("source").get<std::string>());
    episodes = h.at("episodes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("transition file header: ") + e.what());
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("transition file header: ") + e.what());
  }
  if (file.fingerprint != file.spec.fingerprint())
    throw VerificationError("transition file: header fingerprint does not match its scenarios");

  std::vector<agents::Transition> current;
  std::size_t current_ep = 0;
  std::size_t lineno = 1;
  auto flush = [&] {
    if (!current.empty()) file.data.add_episode(current);
    current.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json r = json::parse(line);
      const std::size_t ep = r.at("episode").get<std::size_t>();
      if (ep != current_ep) {
        if (ep != current_ep + 1 || current.empty())
          throw FormatError("episode indices must be contiguous from 0");
        flush();
        current_ep = ep;
      }
      agents::Transition t;
      t.obs = vec_at<kObsDim>(r, "obs");
      t.action = vec_at<kActionDim>(r, "action");
      t.reward = r.at("reward").get<double>();
      t.next_obs = vec_at<kObsDim>(r, "next_obs");
      t.done = r.at("done").get<bool>();
      t.truncated = r.at("truncated").get<bool>();
      t.achieved_goal = vec_at<kGoalDim>(r, "achieved_goal");
      t.desired_goal = vec_at<kGoalDim>(r, "desired_goal");
      current.push_back(t);
    } catch (const json::exception& e) {
      throw FormatError("transition file line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("transition file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  flush();
  if (file.data.episode_count() != episodes)
    throw FormatError("transition file: header lists " + std::to_string(episodes) + " episodes, found " +
                      std::to_string(file.data.episode_count()));
  return file;
}

void save_transitions(const TransitionFile& file, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_transitions(out, file);
}

TransitionFile load_transitions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  return read_transitions(in);
}

}  // namespace stitch::demo
