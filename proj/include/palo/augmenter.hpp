#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "palo/chat_backend.hpp"
#include "palo/grammar.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// Extracted target words for an instruction; "" is the N/A sentinel.
struct Keywords {
  std::string object;
  std::string destination;
};

struct HeuristicConfig {
  int chunk_len = kChunkLen;
  double tau_z = 0.1;            // winning |z| below this marks the chunk ambiguous
  double grip_threshold = 0.5;   // gripper-channel crossing level (normalized)
  bool allow_two_dirs = true;
  double secondary_ratio = 0.8;  // second direction joins within this of the max

  void validate() const;
};

struct ChunkLabel {
  int chunk = 0;
  std::optional<MoveDir> dir;
  std::optional<MoveDir> dir2;
  std::optional<RotDir> rot;
  int grip_event = 0;  // +1 close, -1 open
  Keywords keywords;
  std::string rendered;  // empty iff ambiguous
  bool ambiguous = false;
};

// Proprioception labeling of one trajectory: per chunk, gripper-channel
// crossings win; otherwise the axis with the largest cumulative-delta
// z-score against the dataset stats, or an ambiguous (empty) label when
// even that is weak. Target words come from the extracted keywords, picking
// the destination once the gripper is carrying.
std::vector<ChunkLabel> label_chunks(const Trajectory& traj, const NormStats& stats,
                                     const HeuristicConfig& cfg, const Keywords& kw);

class KeywordBackend {
 public:
  virtual ~KeywordBackend() = default;
  virtual Keywords extract(const std::string& instruction) = 0;
};

// Deterministic emulation of keyword extraction: template matches over the
// built-in instruction forms, then a token scan against the world
// vocabulary, then the sentinel.
class MockKeywordBackend : public KeywordBackend {
 public:
  explicit MockKeywordBackend(const WorldConfig& world);
  MockKeywordBackend(std::vector<std::string> items, std::vector<std::string> destinations);
  Keywords extract(const std::string& instruction) override;

 private:
  std::vector<std::string> items_;
  std::vector<std::string> destinations_;
};

// Sends the keyword prompt through a chat backend. Transport failure after
// retries and malformed replies both degrade to the sentinel, so labeling
// falls back to proprioception-only strings.
class RemoteKeywordBackend : public KeywordBackend {
 public:
  RemoteKeywordBackend(ChatBackend& chat, std::string prompt_template);
  Keywords extract(const std::string& instruction) override;

 private:
  ChatBackend* chat_;
  std::string template_;
};

// "a, b" -> {a, b}; "N/A" halves and refusal-style replies map to "".
Keywords parse_keyword_reply(const std::string& reply);

// Hook for context-free rephrasing of high-level labels.
class Rephraser {
 public:
  virtual ~Rephraser() = default;
  virtual std::string rephrase(const std::string& instruction, int variant) = 0;
};

struct AugmentConfig {
  HeuristicConfig heuristic;
  bool overwrite = false;
  Rephraser* rephraser = nullptr;  // identity when unset
  std::ostream* log = nullptr;
};

// Fills low_labels from the heuristics and high_labels from the trajectory
// instruction. Labeled trajectories are left alone unless cfg.overwrite.
Dataset augment_dataset(const Dataset& data, KeywordBackend& kw,
                        const AugmentConfig& cfg = {});

}  // namespace palo
