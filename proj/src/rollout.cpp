#include "palo/rollout.hpp"

namespace palo {

const std::pair<std::string, std::string>& Schedule::pair_at(int t) const {
  if (pairs.empty()) throw DataError("empty schedule");
  const int idx =
      std::min(t / steps_per_pair, static_cast<int>(pairs.size()) - 1);
  return pairs[static_cast<std::size_t>(std::max(idx, 0))];
}

Rollout rollout_policy(const PolicyFn& policy, const TaskSpec& task,
                       const WorldConfig& cfg, int horizon, Rng& rng) {
  Rollout r;
  State s = sample_initial_state(cfg, rng);
  r.states.push_back(s);
  for (int t = 0; t < horizon; ++t) {
    const Action a = policy(s, t);
    s = step(s, a, cfg);
    r.actions.push_back(a);
    r.states.push_back(s);
    if (task.succeeded(s)) {
      r.success = true;
      r.success_step = t;
      break;
    }
  }
  return r;
}

}  // namespace palo
