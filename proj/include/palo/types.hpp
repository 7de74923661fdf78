#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "palo/errors.hpp"

namespace palo {

inline constexpr int kActionDim = 7;  // xyz deltas, yaw/pitch/roll deltas, gripper
inline constexpr int kChunkLen = 4;   // label chunk length
inline constexpr int kExecChunkLen = 8;  // steps per (high, low) pair at inference

using Action = Eigen::Matrix<double, kActionDim, 1>;
using Vec3 = Eigen::Vector3d;

// Per-dimension affine stats backing the (0,1) action normalization.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  void validate() const {
    if (mean.size() != kActionDim || stddev.size() != kActionDim)
      throw DataError("norm stats must have " + std::to_string(kActionDim) + " dimensions");
    for (int i = 0; i < stddev.size(); ++i)
      if (!(stddev[i] > 0.0))
        throw DataError("norm stats stddev must be positive in every dimension");
  }
};

struct ObjectPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

struct State {
  Vec3 gripper_pos = Vec3::Zero();
  Vec3 gripper_rot = Vec3::Zero();  // yaw, pitch, roll (radians)
  double gripper_open = 1.0;        // 1 open, 0 closed
  std::map<std::string, ObjectPose> objects;
  std::optional<std::string> held_object;

  const ObjectPose& object(const std::string& id) const {
    auto it = objects.find(id);
    if (it == objects.end()) throw DataError("unknown object id: " + id);
    return it->second;
  }
};

struct Step {
  State state;
  Action action = Action::Constant(0.5);
};

inline int chunk_count(int length) { return (length + kChunkLen - 1) / kChunkLen; }

// One expert episode. Labels, when present, are per length-4 chunk and
// parallel: low_labels[k] / high_labels[k] cover steps [4k, 4k+4).
struct Trajectory {
  std::string instruction;
  std::string task;  // task id the episode came from, "" if unknown
  std::vector<Step> steps;
  std::vector<std::string> low_labels;
  std::vector<std::string> high_labels;

  int length() const { return static_cast<int>(steps.size()); }
  bool labeled() const { return !low_labels.empty(); }

  void validate() const {
    if (steps.empty()) throw DataError("trajectory must have at least one step");
    for (const auto& s : steps)
      for (int i = 0; i < kActionDim; ++i)
        if (!(s.action[i] > 0.0) || !(s.action[i] < 1.0))
          throw DataError("action components must lie strictly inside (0,1)");
    const auto chunks = static_cast<std::size_t>(chunk_count(length()));
    if (!low_labels.empty() && low_labels.size() != chunks)
      throw DataError("low_labels must have one entry per 4-step chunk");
    if (!high_labels.empty() && high_labels.size() != chunks)
      throw DataError("high_labels must have one entry per 4-step chunk");
  }
};

enum class DatasetRole { kPrior, kTarget };

struct Dataset {
  DatasetRole role = DatasetRole::kPrior;
  NormStats norm_stats;
  std::vector<Trajectory> trajectories;

  void validate() const {
    norm_stats.validate();
    for (const auto& t : trajectories) t.validate();
    if (role == DatasetRole::kTarget && !trajectories.empty()) {
      const std::string& instr = trajectories.front().instruction;
      for (const auto& t : trajectories)
        if (t.instruction != instr)
          throw DataError("target dataset must share a single task instruction");
    }
  }
};

// A candidate language decomposition: K subtasks, each with a high-level
// instruction and an ordered list of low-level skill strings.
struct Subtask {
  std::string high;
  std::vector<std::string> skills;
};

struct Decomposition {
  std::vector<Subtask> subtasks;

  int K() const { return static_cast<int>(subtasks.size()); }

  bool operator==(const Decomposition& other) const {
    if (subtasks.size() != other.subtasks.size()) return false;
    for (std::size_t i = 0; i < subtasks.size(); ++i)
      if (subtasks[i].high != other.subtasks[i].high ||
          subtasks[i].skills != other.subtasks[i].skills)
        return false;
    return true;
  }
};

// Contiguous partition of timesteps 1..horizon into K non-empty segments,
// stored as the K-1 strictly increasing cut points in [1, horizon-1].
// Segment k (1-based) covers (cuts[k-2], cuts[k-1]] with sentinels 0 and H.
struct Partition {
  int horizon = 0;
  std::vector<int> cuts;

  int K() const { return static_cast<int>(cuts.size()) + 1; }
  // Inclusive 1-based bounds of segment k in [1, K].
  int seg_begin(int k) const { return k == 1 ? 1 : cuts[k - 2] + 1; }
  int seg_end(int k) const { return k == K() ? horizon : cuts[k - 1]; }

  void validate() const {
    if (horizon < 1) throw DataError("partition horizon must be positive");
    if (static_cast<int>(cuts.size()) > horizon - 1)
      throw DataError("partition has more segments than timesteps");
    int prev = 0;
    for (int c : cuts) {
      if (c <= prev || c > horizon - 1)
        throw DataError("partition cuts must be strictly increasing within [1, horizon-1]");
      prev = c;
    }
  }

  bool operator==(const Partition& o) const {
    return horizon == o.horizon && cuts == o.cuts;
  }
};

// Fixed-horizon view of a trajectory: steps past the true length are masked
// out rather than materialised.
struct PaddedTrajectory {
  const Trajectory* traj = nullptr;
  int horizon = 0;

  int true_length() const { return traj->length(); }
  // t is 1-based to match partition indexing.
  bool valid(int t) const { return t >= 1 && t <= traj->length(); }
};

inline PaddedTrajectory pad_length(const Trajectory& traj, int horizon) {
  if (horizon < traj.length())
    throw DataError("pad_length: horizon shorter than trajectory");
  return PaddedTrajectory{&traj, horizon};
}

}  // namespace palo
