#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "palo/policy.hpp"
#include "palo/proposer.hpp"
#include "palo/rng.hpp"
#include "palo/rollout.hpp"
#include "palo/types.hpp"

namespace palo {

// Uniform draw over the C(H-1, K-1) partitions of {1..H} into K contiguous
// nonempty segments. Requires 1 <= K <= H.
Partition sample_partition(int horizon, int K, Rng& rng);

// All partitions, lexicographic by cut vector.
std::vector<Partition> enumerate_partitions(int horizon, int K);

// C(H-1, K-1). Throws DataError when the count exceeds `limit`, naming the
// count, so exhaustive mode fails loudly instead of thrashing.
std::uint64_t count_partitions(int horizon, int K,
                               std::uint64_t limit = 1000000);

// Segment index of timestep t (1-based) under u: min{k : t in u_k}.
int subtask_index(int t, const Partition& u);

// Deterministic equal-split baseline: cuts at floor(l*H/K), l = 1..K-1.
// Requires K <= H so the cuts are strictly increasing.
Partition fixed_times_partition(int horizon, int K);

// Conditioning pairs of a decomposition in execution order, one per
// cost-bearing skill. Neutral skills carry no conditioning signal and are
// skipped unless include_neutral is set.
std::vector<std::pair<std::string, std::string>> schedule_pairs(
    const Decomposition& d, bool include_neutral = false);

// Reference fit cost of (decomposition, partition) against one demo: each
// segment k is split into equal consecutive blocks, one per cost-bearing
// skill of subtask k (block j of m over a length-L segment covers offsets
// floor((j-1)L/m)..floor(jL/m)-1), and every in-block step contributes the
// squared error of the action predicted under (high_k, skill_j). Steps past
// traj.length() contribute exactly zero, so a padded horizon is harmless.
// A subtask with no cost-bearing skill is costed under (high_k, masked low).
double cost(const Decomposition& c, const Partition& u, const Trajectory& traj,
            const PolicyModel& model, bool include_neutral = false);

// Batched evaluator: per-pair squared errors are precomputed once with prefix
// sums, so eval() is O(#pairs) per partition. Agrees with cost() up to
// floating-point summation order.
class CostTable {
 public:
  CostTable(const Decomposition& c, const Trajectory& traj,
            const PolicyModel& model, bool include_neutral = false);

  // u.horizon may exceed the trajectory length; masked steps contribute 0.
  double eval(const Partition& u) const;

  int length() const { return length_; }
  int pairs() const { return static_cast<int>(prefix_.rows()); }

 private:
  std::vector<std::vector<int>> block_rows_;  // [segment][block] -> pair row
  Eigen::MatrixXd prefix_;                    // pairs x (length + 1)
  int length_ = 0;
};

enum class AdaptMode {
  kFull,        // sampled partitions, argmin over all candidates
  kFixedTimes,  // equal-split partition only, no sampling
  kSinglePlan,  // candidate set of one (selection is vacuous); set by the
                // harness together with a 1-proposal batch
  kMaskHigh,    // adapt as kFull, blank the high slot at rollout
  kMaskLow,     // adapt as kFull, blank the low slot at rollout
};

std::string to_string(AdaptMode m);
AdaptMode adapt_mode_from_string(const std::string& s);

struct AdaptConfig {
  int n_samples = 20000;
  std::uint64_t seed = 0;
  // Enumerate every partition instead of sampling (guarded by
  // count_partitions; only viable for small horizons).
  bool exhaustive = false;
  // Reuse one sampled pool per (horizon, K) across candidates instead of
  // fresh draws per (candidate, trajectory).
  bool shared_partition_pool = false;
  bool include_neutral = false;
  AdaptMode mode = AdaptMode::kFull;
  int workers = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct TrajectoryFit {
  int horizon = 0;
  Partition best;
  double cost = 0.0;
};

struct AdaptationResult {
  Decomposition chosen;
  int chosen_index = -1;
  double total_cost = 0.0;
  std::vector<double> candidate_costs;  // summed best-partition cost, per candidate
  std::vector<TrajectoryFit> fits;      // per demo, for the chosen candidate
  AdaptMode mode = AdaptMode::kFull;
  int n_samples = 0;
  std::uint64_t seed = 0;
  std::string provenance;  // forwarded from the proposal batch
  double wall_seconds = 0.0;
};

// Joint selection: for every candidate, the best partition per demo is found
// independently (fresh samples per candidate-demo cell, stream derived from
// (seed, candidate, demo)), candidates are ranked by the summed minima, and
// ties go to the lowest index. Deterministic for a fixed config, regardless
// of worker count.
AdaptationResult adapt(const ProposalBatch& batch, const Dataset& target,
                       const PolicyModel& model, const AdaptConfig& cfg);

// Rollout-time policy: the chosen pairs play in order, each for
// kExecChunkLen steps, the last pair holding to the end. kMaskHigh and
// kMaskLow blank the corresponding conditioning slot at inference.
PolicyFn adapted_policy(const AdaptationResult& result,
                        const PolicyModel& model);

// Instruction-only conditioning (high = raw instruction, low masked); the
// zero-shot baseline.
PolicyFn instruction_policy(const PolicyModel& model,
                            const std::string& instruction);

std::string format_adaptation_report(const AdaptationResult& r);
void save_adaptation_result(const AdaptationResult& r, const std::string& path);
AdaptationResult load_adaptation_result(const std::string& path);

}  // namespace palo
