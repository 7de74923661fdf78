#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "palo/tasks.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// Policy under evaluation: state and 0-based step index -> normalized action.
using PolicyFn = std::function<Action(const State&, int)>;

struct Rollout {
  std::vector<State> states;  // visited states, size = steps + 1
  std::vector<Action> actions;
  bool success = false;
  int success_step = -1;  // first step whose post-state satisfied the task
};

// Success is sticky: the episode counts as solved once the predicate holds,
// and the loop stops there.
Rollout rollout_policy(const PolicyFn& policy, const TaskSpec& task,
                       const WorldConfig& cfg, int horizon, Rng& rng);

// (high, low) conditioning pairs executed for a fixed number of steps each,
// holding the last pair for the rest of the horizon.
struct Schedule {
  std::vector<std::pair<std::string, std::string>> pairs;
  int steps_per_pair = kExecChunkLen;

  const std::pair<std::string, std::string>& pair_at(int t) const;
};

}  // namespace palo
