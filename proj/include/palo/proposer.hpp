#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "palo/chat_backend.hpp"
#include "palo/rng.hpp"
#include "palo/tasks.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// Throws DataError unless every subtask has a nonempty description and at
// least one grammar-valid skill. Everything the adaptation optimizer
// consumes passes through this.
void validate_decomposition(const Decomposition& d);

struct ProposalBatch {
  std::vector<Decomposition> candidates;
  // duplicate[i] marks candidates identical to an earlier one; they stay in
  // the batch (sampling with repetition is legitimate) but are flagged.
  std::vector<bool> duplicate;
  std::string provenance;  // "mock" or "remote:<model>"
  std::vector<std::pair<std::string, std::string>> transcripts;
};

struct MockProposerConfig {
  int M = 15;
  // Exactly one candidate is the scripted ground truth when set; the rest
  // are perturbed decoys.
  bool plant_truth = true;
  int truth_index = -1;  // -1 = random position
  std::uint64_t seed = 0;
};

ProposalBatch propose_mock(const TaskSpec& task, const State& s0,
                           const WorldConfig& world, const MockProposerConfig& cfg);

// Which edits a decoy went through; the coverage test asserts every op
// appears in the sampling support.
enum PerturbOp : unsigned {
  kRetarget = 1u << 0,
  kRedirect = 1u << 1,
  kRotFlip = 1u << 2,
  kDropSkill = 1u << 3,
  kInsertSkill = 1u << 4,
  kMergeSubtasks = 1u << 5,
  kSplitSubtask = 1u << 6,
  kReorderSubtasks = 1u << 7,
  kGripperSwap = 1u << 8,
};

Decomposition perturb_decomposition(const Decomposition& truth, const WorldConfig& world,
                                    Rng& rng, unsigned* ops_applied = nullptr);

// Stands in for the camera image: a deterministic textual rendering of the
// start state.
std::string describe_scene(const State& s0, const WorldConfig& world);

// Bracket-extracts the JSON object from a planning reply (prose around it is
// tolerated), preserves key order, and validates every skill string.
Decomposition parse_planning_reply(const std::string& reply);

struct RemoteProposerConfig {
  int M = 15;
  // Validation retries per candidate, on top of the transport retries inside
  // the chat backend.
  int max_retries = 2;
  std::string model = "remote";
  std::string prompt_template;  // empty = built-in planning template
};

// Requests M candidate plans through the chat backend; invalid replies are
// re-requested up to max_retries then dropped. Throws RemoteError when no
// candidate survives.
ProposalBatch propose_remote(const State& s0, const std::string& instruction,
                             const WorldConfig& world, ChatBackend& chat,
                             const RemoteProposerConfig& cfg);

}  // namespace palo
