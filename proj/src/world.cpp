#include "palo/world.hpp"

#include <cmath>

#include "palo/normalize.hpp"

namespace palo {

WorldConfig::WorldConfig() {
  action_scale.resize(kActionDim);
  action_scale << 0.12, 0.12, 0.12, 0.30, 0.30, 0.30, 1.0;
}

const ObjectSpec& WorldConfig::object_spec(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return o;
  throw DataError("world config has no object: " + id);
}

NormStats WorldConfig::canonical_norm_stats() const {
  NormStats s;
  s.mean = Eigen::VectorXd::Zero(kActionDim);
  s.stddev = action_scale;
  return s;
}

void WorldConfig::validate() const {
  if (action_scale.size() != kActionDim)
    throw DataError("action_scale must have one entry per action dimension");
  for (int i = 0; i < kActionDim; ++i)
    if (!(action_scale[i] > 0)) throw DataError("action_scale entries must be positive");
  for (int i = 0; i < 3; ++i)
    if (!(workspace_min[i] < workspace_max[i]))
      throw DataError("workspace bounds are inverted");
  for (const auto& o : objects)
    if (o.id.empty()) throw DataError("object ids must be non-empty");
}

WorldConfig default_world() {
  WorldConfig cfg;
  auto item = [](const std::string& id, double x, double y) {
    ObjectSpec o;
    o.id = id;
    o.mean_pos = Vec3(x, y, 0.0);  // z filled at sampling time
    o.yaw_jitter = 0.6;
    return o;
  };
  auto dest = [](const std::string& id, double x, double y, double yaw) {
    ObjectSpec o;
    o.id = id;
    o.mean_pos = Vec3(x, y, 0.0);
    o.mean_yaw = yaw;
    o.yaw_jitter = 0.3;
    o.graspable = false;
    o.is_destination = true;
    return o;
  };
  cfg.objects = {
      item("beet", -0.25, 0.30),
      item("corn", -0.25, 0.10),
      item("ladle", -0.25, -0.10),
      item("marker", -0.25, -0.30),
      item("mushroom", 0.00, 0.35),
      item("scoop", 0.00, 0.15),
      item("spoon", 0.00, -0.15),
      item("towel", 0.00, -0.35),
      dest("bin", 0.30, -0.35, -0.5),
      dest("bowl", 0.30, -0.12, 0.3),
      dest("box", 0.30, 0.12, 0.7),
      dest("pot", 0.30, 0.35, -0.3),
      dest("drawer", 0.15, 0.0, 0.0),
  };
  // The drawer is a handle the expert pulls open.
  for (auto& o : cfg.objects)
    if (o.id == "drawer") o.graspable = true;
  return cfg;
}

std::vector<std::string> object_ids(const WorldConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& o : cfg.objects) out.push_back(o.id);
  return out;
}

std::vector<std::string> destination_ids(const WorldConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& o : cfg.objects)
    if (o.is_destination) out.push_back(o.id);
  return out;
}

std::vector<std::string> item_ids(const WorldConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& o : cfg.objects)
    if (o.graspable && !o.is_destination) out.push_back(o.id);
  return out;
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2 * M_PI;
  while (a <= -M_PI) a += 2 * M_PI;
  return a;
}

void validate_state(const State& s, const WorldConfig& cfg) {
  for (int i = 0; i < 3; ++i) {
    if (s.gripper_pos[i] < cfg.workspace_min[i] - 1e-9 ||
        s.gripper_pos[i] > cfg.workspace_max[i] + 1e-9)
      throw DataError("gripper outside workspace");
  }
  const double slack = cfg.grasp_radius + 1e-9;
  for (const auto& [id, pose] : s.objects) {
    for (int i = 0; i < 3; ++i) {
      if (pose.position[i] < cfg.workspace_min[i] - slack ||
          pose.position[i] > cfg.workspace_max[i] + slack)
        throw DataError("object outside workspace: " + id);
    }
  }
  if (s.held_object && !s.objects.count(*s.held_object))
    throw DataError("held_object names a missing object");
  if (!(s.gripper_open >= 0.0 && s.gripper_open <= 1.0))
    throw DataError("gripper_open must lie in [0,1]");
}

State sample_initial_state(const WorldConfig& cfg, Rng& rng, int max_tries) {
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    State s;
    s.gripper_pos = cfg.gripper_start;
    s.gripper_open = 1.0;
    for (const auto& spec : cfg.objects) {
      ObjectPose p;
      p.position =
          Vec3(spec.mean_pos.x() + rng.uniform(-spec.pos_jitter, spec.pos_jitter),
               spec.mean_pos.y() + rng.uniform(-spec.pos_jitter, spec.pos_jitter),
               cfg.table_z);
      p.yaw = wrap_angle(spec.mean_yaw + rng.uniform(-spec.yaw_jitter, spec.yaw_jitter));
      s.objects[spec.id] = p;
    }
    bool ok = true;
    for (auto it = s.objects.begin(); ok && it != s.objects.end(); ++it) {
      auto jt = it;
      for (++jt; jt != s.objects.end(); ++jt) {
        if ((it->second.position - jt->second.position).norm() < cfg.min_object_gap) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return s;
  }
  throw DataError("sample_initial_state: could not place objects after " +
                  std::to_string(max_tries) + " tries");
}

State step(const State& s, const Action& a, const WorldConfig& cfg) {
  for (int i = 0; i < kActionDim; ++i)
    if (!(a[i] > 0.0) || !(a[i] < 1.0))
      throw DataError("step: action components must lie strictly inside (0,1)");

  const Eigen::VectorXd raw = denormalize_action(a, cfg.canonical_norm_stats());
  State out = s;

  out.gripper_pos += raw.segment<3>(0);
  for (int i = 0; i < 3; ++i) {
    out.gripper_pos[i] =
        std::clamp(out.gripper_pos[i], cfg.workspace_min[i], cfg.workspace_max[i]);
  }
  const Vec3 moved = out.gripper_pos - s.gripper_pos;
  out.gripper_rot += raw.segment<3>(3);
  out.gripper_rot[0] = wrap_angle(out.gripper_rot[0]);
  const double yaw_delta = raw[3];

  const bool close_cmd = a[kActionDim - 1] > 0.5;
  if (s.held_object) {
    if (close_cmd) {
      // Rigid carry: the grasp offset is preserved exactly.
      auto& pose = out.objects.at(*s.held_object);
      pose.position += moved;
      pose.yaw = wrap_angle(pose.yaw + yaw_delta);
    } else {
      out.held_object.reset();
    }
  } else if (close_cmd) {
    double best = cfg.grasp_radius;
    std::string grabbed;
    for (const auto& [id, pose] : out.objects) {
      if (!cfg.object_spec(id).graspable) continue;
      const double d = (pose.position - out.gripper_pos).norm();
      if (d < best) {
        best = d;
        grabbed = id;
      }
    }
    if (!grabbed.empty()) out.held_object = grabbed;
  }
  out.gripper_open = close_cmd ? 0.0 : 1.0;
  return out;
}

bool predicate_holds(const Predicate& p, const State& s) {
  switch (p.kind) {
    case Predicate::Kind::kObjectNearObject:
      return (s.object(p.object).position - s.object(p.anchor).position).norm() <=
             p.radius;
    case Predicate::Kind::kObjectInRegion:
      return (s.object(p.object).position - p.center).norm() <= p.radius;
    case Predicate::Kind::kGripperNearObject:
      return (s.gripper_pos - s.object(p.object).position).norm() <= p.radius;
    case Predicate::Kind::kYawAligned:
      return std::abs(wrap_angle(s.object(p.object).yaw - s.object(p.anchor).yaw -
                                 p.yaw_offset)) <= p.yaw_tol;
    case Predicate::Kind::kHeld:
      return s.held_object && *s.held_object == p.object;
    case Predicate::Kind::kNotHeldAny:
      return !s.held_object.has_value();
  }
  return false;
}

bool all_hold(const std::vector<Predicate>& ps, const State& s) {
  for (const auto& p : ps)
    if (!predicate_holds(p, s)) return false;
  return true;
}

}  // namespace palo
