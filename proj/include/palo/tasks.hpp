#pragma once

#include <string>
#include <vector>

#include "palo/grammar.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// One phase of a scripted behaviour. Stages double as the ground-truth
// curriculum: the expert advances through them in order and decompositions
// are rendered from them.
struct Stage {
  enum class Kind { kReach, kGrasp, kTransport, kRelease, kRotateAlign };
  Kind kind = Kind::kReach;
  std::string object;          // what to reach / grasp / carry
  std::string anchor;          // destination object ("" = absolute target)
  Vec3 abs_target = Vec3::Zero();
  double yaw_offset = 0.0;     // rotate target = anchor yaw + offset
};

// Grouping of stages into ground-truth subtasks, phrased like the prior
// corpus so subtask conditioning stays in-distribution.
struct SubtaskTemplate {
  std::string high;
  int stage_begin = 0;  // [begin, end) into TaskSpec::stages
  int stage_end = 0;
};

struct TaskSpec {
  std::string id;
  std::string family;  // "prior" | "long_horizon" | "unseen_skill"
  std::string instruction;
  std::vector<Stage> stages;
  std::vector<SubtaskTemplate> subtasks;
  std::vector<Predicate> success;
  int eval_horizon = 150;

  bool succeeded(const State& s) const { return all_hold(success, s); }
};

// The eight built-in target tasks (four long-horizon, four unseen-skill).
std::vector<TaskSpec> target_tasks(const WorldConfig& cfg);
TaskSpec find_task(const std::string& id, const WorldConfig& cfg);

// Single-subtask template tasks the prior corpus is generated from. Object /
// destination combinations used by the target tasks are held out.
std::vector<TaskSpec> prior_tasks(const WorldConfig& cfg);

// Renders the task's subtask templates into skill sentences using nominal
// (mean) geometry: direction words come from the dominant axes of the mean
// displacement, rotation words from the sign of the mean yaw error.
Decomposition ground_truth_decomposition(const TaskSpec& task, const WorldConfig& cfg);

// Movement-word helper shared with the mock proposer.
std::vector<MoveDir> nominal_move_words(const Vec3& delta, double secondary_ratio = 0.8);

}  // namespace palo
