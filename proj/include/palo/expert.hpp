#pragma once

#include "palo/tasks.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// Waypoint proportional controller scripted from a task's stages. Stage
// progress is monotone; control() is deterministic given the state.
class ScriptedExpert {
 public:
  ScriptedExpert(const TaskSpec& task, const WorldConfig& cfg);

  // Raw-unit action (no noise, no normalization) for the current state;
  // advances past any stages the state already satisfies.
  Eigen::VectorXd control(const State& s);
  int stage_index() const { return stage_; }
  bool done() const { return stage_ >= static_cast<int>(task_.stages.size()); }

 private:
  bool stage_done(const Stage& st, const State& s) const;
  TaskSpec task_;
  WorldConfig cfg_;
  int stage_ = 0;
};

struct ExpertEpisode {
  Trajectory traj;
  // Noise-free expert actions at the visited states; the behaviour-policy
  // reference for regret measurements.
  std::vector<Action> reference_actions;
  bool success = false;
};

// One wobbled expert episode from a fresh initial state. Fails (success =
// false) only if the horizon runs out.
ExpertEpisode run_expert_episode(const TaskSpec& task, const WorldConfig& cfg, Rng& rng);

// n_per_task successful episodes per task, deterministic in seed; infeasible
// episodes are re-drawn a bounded number of times before DataError.
Dataset generate_dataset(const std::vector<TaskSpec>& tasks, int n_per_task,
                         const WorldConfig& cfg, std::uint64_t seed,
                         DatasetRole role = DatasetRole::kPrior);

}  // namespace palo
