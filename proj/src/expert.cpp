#include "palo/expert.hpp"

#include <cmath>

#include "palo/normalize.hpp"

namespace palo {

ScriptedExpert::ScriptedExpert(const TaskSpec& task, const WorldConfig& cfg)
    : task_(task), cfg_(cfg) {
  if (task.stages.empty()) throw DataError("task has no stages: " + task.id);
}

bool ScriptedExpert::stage_done(const Stage& st, const State& s) const {
  switch (st.kind) {
    case Stage::Kind::kReach:
      return (s.gripper_pos - s.object(st.object).position).norm() <= cfg_.reach_tol;
    case Stage::Kind::kGrasp:
      return s.held_object && *s.held_object == st.object;
    case Stage::Kind::kTransport: {
      const Vec3 target = st.anchor.empty()
                              ? st.abs_target
                              : s.object(st.anchor).position + Vec3(0, 0, cfg_.hover);
      return (s.object(st.object).position - target).norm() <= cfg_.reach_tol;
    }
    case Stage::Kind::kRelease:
      return !s.held_object.has_value();
    case Stage::Kind::kRotateAlign: {
      const double err = wrap_angle(s.object(st.anchor).yaw + st.yaw_offset -
                                    s.object(st.object).yaw);
      return std::abs(err) <= 0.6 * cfg_.yaw_tol;
    }
  }
  return false;
}

Eigen::VectorXd ScriptedExpert::control(const State& s) {
  while (!done() && stage_done(task_.stages[static_cast<std::size_t>(stage_)], s)) ++stage_;

  Eigen::VectorXd raw = Eigen::VectorXd::Zero(kActionDim);
  const double hold_grip = s.held_object ? cfg_.grip_cmd : -cfg_.grip_cmd;
  if (done()) {
    raw[kActionDim - 1] = hold_grip;
    return raw;
  }

  const Stage& st = task_.stages[static_cast<std::size_t>(stage_)];
  switch (st.kind) {
    case Stage::Kind::kReach:
      raw.segment<3>(0) = cfg_.kp * (s.object(st.object).position - s.gripper_pos);
      raw[kActionDim - 1] = -cfg_.grip_cmd;
      break;
    case Stage::Kind::kGrasp:
      raw.segment<3>(0) = cfg_.kp * (s.object(st.object).position - s.gripper_pos);
      raw[kActionDim - 1] = cfg_.grip_cmd;
      break;
    case Stage::Kind::kTransport: {
      const Vec3 target = st.anchor.empty()
                              ? st.abs_target
                              : s.object(st.anchor).position + Vec3(0, 0, cfg_.hover);
      raw.segment<3>(0) = cfg_.kp * (target - s.object(st.object).position);
      raw[kActionDim - 1] = cfg_.grip_cmd;
      break;
    }
    case Stage::Kind::kRelease:
      raw[kActionDim - 1] = -cfg_.grip_cmd;
      break;
    case Stage::Kind::kRotateAlign: {
      const double err = wrap_angle(s.object(st.anchor).yaw + st.yaw_offset -
                                    s.object(st.object).yaw);
      raw[3] = cfg_.kr * err;
      raw[kActionDim - 1] = cfg_.grip_cmd;
      break;
    }
  }
  return raw;
}

ExpertEpisode run_expert_episode(const TaskSpec& task, const WorldConfig& cfg, Rng& rng) {
  ExpertEpisode ep;
  ep.traj.instruction = task.instruction;
  ep.traj.task = task.id;
  const NormStats stats = cfg.canonical_norm_stats();
  State s = sample_initial_state(cfg, rng);
  ScriptedExpert expert(task, cfg);

  for (int t = 0; t < cfg.max_expert_steps; ++t) {
    if (task.succeeded(s)) {
      ep.success = true;
      break;
    }
    Eigen::VectorXd raw = expert.control(s);
    ep.reference_actions.push_back(normalize_action(raw, stats));
    for (int i = 0; i < 3; ++i) raw[i] += rng.normal(0, cfg.wobble_trans);
    for (int i = 3; i < 6; ++i) raw[i] += rng.normal(0, cfg.wobble_rot);
    raw[kActionDim - 1] += rng.normal(0, cfg.wobble_grip);
    Step step;
    step.state = s;
    step.action = normalize_action(raw, stats);
    s = palo::step(s, step.action, cfg);
    ep.traj.steps.push_back(std::move(step));
  }
  if (!ep.success) ep.success = task.succeeded(s);
  return ep;
}

Dataset generate_dataset(const std::vector<TaskSpec>& tasks, int n_per_task,
                         const WorldConfig& cfg, std::uint64_t seed, DatasetRole role) {
  if (n_per_task < 1) throw DataError("generate_dataset: n_per_task must be >= 1");
  constexpr int kMaxAttempts = 25;
  Dataset d;
  d.role = role;
  d.norm_stats = cfg.canonical_norm_stats();
  for (const auto& task : tasks) {
    for (int e = 0; e < n_per_task; ++e) {
      bool ok = false;
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng = derive_stream(seed, task.id, static_cast<std::uint64_t>(e),
                                static_cast<std::uint64_t>(attempt));
        ExpertEpisode ep = run_expert_episode(task, cfg, rng);
        if (ep.success) {
          d.trajectories.push_back(std::move(ep.traj));
          ok = true;
          break;
        }
      }
      if (!ok)
        throw DataError("generate_dataset: no successful episode for task " + task.id +
                        " after " + std::to_string(kMaxAttempts) + " attempts");
    }
  }
  d.validate();
  return d;
}

}  // namespace palo
