#pragma once

#include <string>
#include <vector>

#include "palo/rng.hpp"
#include "palo/types.hpp"

namespace palo {

struct ObjectSpec {
  std::string id;
  Vec3 mean_pos = Vec3::Zero();
  double pos_jitter = 0.04;  // uniform per-axis (x, y only; z fixed to table)
  double mean_yaw = 0.0;
  double yaw_jitter = 0.0;
  bool graspable = true;
  bool is_destination = false;  // placement / alignment anchor
};

// Tabletop kinematics: no contact, no gravity; a closing gripper rigidly
// attaches the nearest object within grasp_radius.
struct WorldConfig {
  Vec3 workspace_min = Vec3(-0.5, -0.5, 0.0);
  Vec3 workspace_max = Vec3(0.5, 0.5, 0.5);
  double table_z = 0.02;
  double grasp_radius = 0.08;
  double min_object_gap = 0.12;
  Vec3 gripper_start = Vec3(-0.45, 0.0, 0.25);

  // Raw per-channel action scale; doubles as the canonical normalization
  // stddev (mean 0), so the all-0.5 action is exactly "do nothing".
  Eigen::VectorXd action_scale;

  // Scripted-expert gains and noise (raw units). kp is deliberately low so
  // each manipulation phase spans a couple of execution chunks.
  double kp = 0.15;
  double kr = 0.15;
  double reach_tol = 0.05;
  double grip_cmd = 1.5;
  double wobble_trans = 0.004;
  double wobble_rot = 0.010;
  double wobble_grip = 0.15;
  int max_expert_steps = 220;
  // Hold-in-place steps recorded after the task predicates first hold, so the
  // terminal grip state fills out the final label chunk.
  int settle_steps = 4;

  double region_radius = 0.16;
  double yaw_tol = 0.30;
  double hover = 0.05;

  std::vector<ObjectSpec> objects;

  WorldConfig();

  const ObjectSpec& object_spec(const std::string& id) const;
  NormStats canonical_norm_stats() const;
  void validate() const;
};

// The built-in tabletop: eight graspable items and five destinations at
// fixed nominal positions.
WorldConfig default_world();

// All object ids in config order.
std::vector<std::string> object_ids(const WorldConfig& cfg);
// Objects flagged as destinations, config order.
std::vector<std::string> destination_ids(const WorldConfig& cfg);
// Graspable non-destination objects: the things instructions move around.
std::vector<std::string> item_ids(const WorldConfig& cfg);

double wrap_angle(double a);  // into (-pi, pi]

// Checks workspace bounds (objects get grasp_radius slack while carried) and
// that held_object names a real object.
void validate_state(const State& s, const WorldConfig& cfg);

// Draw a start state: objects jittered around nominal poses, re-drawn until
// all pairwise gaps clear min_object_gap. Throws DataError if max_tries
// placements all clash.
State sample_initial_state(const WorldConfig& cfg, Rng& rng, int max_tries = 100);

// Apply one normalized action. Total on valid states: clamps instead of
// faulting, holds are rigid, gripper command > 0.5 closes.
State step(const State& s, const Action& a, const WorldConfig& cfg);

// Success predicates are conjunctions over this closed vocabulary.
struct Predicate {
  enum class Kind {
    kObjectNearObject,   // |obj - anchor| <= radius
    kObjectInRegion,     // |obj - center| <= radius
    kGripperNearObject,  // |gripper - obj| <= radius
    kYawAligned,         // |wrap(obj.yaw - anchor.yaw - offset)| <= tol
    kHeld,
    kNotHeldAny,
  };
  Kind kind = Kind::kObjectNearObject;
  std::string object;
  std::string anchor;
  Vec3 center = Vec3::Zero();
  double radius = 0.16;
  double yaw_offset = 0.0;
  double yaw_tol = 0.30;
};

bool predicate_holds(const Predicate& p, const State& s);
bool all_hold(const std::vector<Predicate>& ps, const State& s);

}  // namespace palo
