#include "palo/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "palo/grammar.hpp"

namespace palo {

namespace {

constexpr double kPourYawOffset = 0.9;
const Vec3 kDrawerOpenTarget(-0.05, 0.0, 0.02);
constexpr double kDrawerOpenRadius = 0.13;
// Nominal travel above which the ground truth repeats the movement command.
// One move-skill copy per this much nominal travel; execution grants each
// scheduled skill a fixed-length chunk, so plans must scale with distance.
constexpr double kDupDistance = 0.25;

int move_copies(const Vec3& delta) {
  return std::max(1, static_cast<int>(std::ceil(delta.norm() / kDupDistance)));
}

struct StageSeq {
  std::vector<Stage> stages;

  StageSeq& reach(const std::string& obj) {
    stages.push_back({Stage::Kind::kReach, obj, "", Vec3::Zero(), 0.0});
    return *this;
  }
  StageSeq& grasp(const std::string& obj) {
    stages.push_back({Stage::Kind::kGrasp, obj, "", Vec3::Zero(), 0.0});
    return *this;
  }
  StageSeq& transport(const std::string& obj, const std::string& anchor) {
    stages.push_back({Stage::Kind::kTransport, obj, anchor, Vec3::Zero(), 0.0});
    return *this;
  }
  StageSeq& transport_abs(const std::string& obj, const Vec3& target) {
    stages.push_back({Stage::Kind::kTransport, obj, "", target, 0.0});
    return *this;
  }
  StageSeq& release(const std::string& obj) {
    stages.push_back({Stage::Kind::kRelease, obj, "", Vec3::Zero(), 0.0});
    return *this;
  }
  StageSeq& rotate(const std::string& obj, const std::string& anchor, double offset) {
    stages.push_back({Stage::Kind::kRotateAlign, obj, anchor, Vec3::Zero(), offset});
    return *this;
  }
};

Predicate near_pred(const std::string& obj, const std::string& anchor, double r) {
  Predicate p;
  p.kind = Predicate::Kind::kObjectNearObject;
  p.object = obj;
  p.anchor = anchor;
  p.radius = r;
  return p;
}

Predicate region_pred(const std::string& obj, const Vec3& center, double r) {
  Predicate p;
  p.kind = Predicate::Kind::kObjectInRegion;
  p.object = obj;
  p.center = center;
  p.radius = r;
  return p;
}

Predicate aligned_pred(const std::string& obj, const std::string& anchor, double offset,
                       double tol) {
  Predicate p;
  p.kind = Predicate::Kind::kYawAligned;
  p.object = obj;
  p.anchor = anchor;
  p.yaw_offset = offset;
  p.yaw_tol = tol;
  return p;
}

Predicate held_pred(const std::string& obj) {
  Predicate p;
  p.kind = Predicate::Kind::kHeld;
  p.object = obj;
  return p;
}

Predicate empty_hand_pred() {
  Predicate p;
  p.kind = Predicate::Kind::kNotHeldAny;
  return p;
}

Predicate gripper_near_pred(const std::string& obj, double r) {
  Predicate p;
  p.kind = Predicate::Kind::kGripperNearObject;
  p.object = obj;
  p.radius = r;
  return p;
}

// Pick-place stage quad with its prior-corpus phrasing.
void append_pick_place(TaskSpec& t, const std::string& item, const std::string& dest) {
  const int b = static_cast<int>(t.stages.size());
  StageSeq seq;
  seq.reach(item).grasp(item).transport(item, dest).release(item);
  t.stages.insert(t.stages.end(), seq.stages.begin(), seq.stages.end());
  t.subtasks.push_back({"put the " + item + " in the " + dest, b, b + 4});
}

const std::vector<std::string> kItems = {"beet", "corn",  "ladle", "marker",
                                         "mushroom", "scoop", "spoon", "towel"};
const std::vector<std::string> kAlignDests = {"bin", "bowl", "box", "pot"};

// Object/destination combinations reserved for the target tasks; the prior
// corpus never contains them.
bool combo_held_out(const std::string& item, const std::string& dest) {
  static const std::vector<std::pair<std::string, std::string>> held = {
      {"beet", "drawer"},  {"corn", "bowl"},   {"mushroom", "bowl"},
      {"mushroom", "pot"}, {"towel", "bin"},   {"mushroom", "box"},
      {"spoon", "bin"},    {"ladle", "pot"},   {"scoop", "bowl"},
      {"marker", "box"},
  };
  return std::find(held.begin(), held.end(), std::make_pair(item, dest)) != held.end();
}

}  // namespace

std::vector<TaskSpec> target_tasks(const WorldConfig& cfg) {
  std::vector<TaskSpec> out;
  const double r = cfg.region_radius;

  {
    TaskSpec t;
    t.id = "put_in";
    t.family = "long_horizon";
    t.instruction = "open the drawer and put the beet toy inside";
    StageSeq seq;
    seq.reach("drawer").grasp("drawer").transport_abs("drawer", kDrawerOpenTarget +
                                                                    Vec3(0, 0, cfg.hover));
    seq.release("drawer").reach("beet").grasp("beet").transport("beet", "drawer")
        .release("beet");
    t.stages = seq.stages;
    t.subtasks = {{"open the drawer", 0, 4}, {"put the beet in the drawer", 4, 8}};
    t.success = {region_pred("drawer", kDrawerOpenTarget, kDrawerOpenRadius),
                 near_pred("beet", "drawer", r), empty_hand_pred()};
    t.eval_horizon = 200;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "salad";
    t.family = "long_horizon";
    t.instruction = "make a salad bowl with the corn and the mushroom";
    append_pick_place(t, "corn", "bowl");
    append_pick_place(t, "mushroom", "bowl");
    t.success = {near_pred("corn", "bowl", r), near_pred("mushroom", "bowl", r),
                 empty_hand_pred()};
    t.eval_horizon = 200;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "sweep_mints";
    t.family = "long_horizon";
    t.instruction =
        "sweep the mints into the bin with the towel after putting the mushroom in the pot";
    append_pick_place(t, "mushroom", "pot");
    append_pick_place(t, "towel", "bin");
    t.success = {near_pred("mushroom", "pot", r), near_pred("towel", "bin", r),
                 empty_hand_pred()};
    t.eval_horizon = 200;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "sweep_skittles";
    t.family = "long_horizon";
    t.instruction =
        "sweep the skittles into the bin with the spoon after putting the mushroom in the box";
    append_pick_place(t, "mushroom", "box");
    append_pick_place(t, "spoon", "bin");
    t.success = {near_pred("mushroom", "box", r), near_pred("spoon", "bin", r),
                 empty_hand_pred()};
    t.eval_horizon = 200;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "pry_pot";
    t.family = "unseen_skill";
    t.instruction = "pry the pot out using the ladle";
    StageSeq seq;
    seq.reach("ladle").grasp("ladle").transport("ladle", "pot");
    t.stages = seq.stages;
    t.subtasks = {{"put the ladle in the pot", 0, 3}};
    t.success = {near_pred("ladle", "pot", r), held_pred("ladle")};
    t.eval_horizon = 150;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "pour_scoop";
    t.family = "unseen_skill";
    t.instruction = "pour the contents of the scoop into the bowl";
    StageSeq seq;
    seq.reach("scoop").grasp("scoop").transport("scoop", "bowl").rotate(
        "scoop", "bowl", kPourYawOffset);
    t.stages = seq.stages;
    t.subtasks = {{"put the scoop in the bowl", 0, 3},
                  {"turn the scoop to match the bowl", 3, 4}};
    t.success = {near_pred("scoop", "bowl", r),
                 aligned_pred("scoop", "bowl", kPourYawOffset, cfg.yaw_tol),
                 held_pred("scoop")};
    t.eval_horizon = 150;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "rotate_marker";
    t.family = "unseen_skill";
    t.instruction = "put the marker into the box while aligning it";
    StageSeq seq;
    seq.reach("marker").grasp("marker").rotate("marker", "box", 0.0)
        .transport("marker", "box").release("marker");
    t.stages = seq.stages;
    t.subtasks = {{"turn the marker to match the box", 0, 3},
                  {"put the marker in the box", 3, 5}};
    t.success = {near_pred("marker", "box", r), aligned_pred("marker", "box", 0.0, cfg.yaw_tol),
                 empty_hand_pred()};
    t.eval_horizon = 150;
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "rotate_spoon";
    t.family = "unseen_skill";
    t.instruction = "put the spoon into the bin while aligning it";
    StageSeq seq;
    seq.reach("spoon").grasp("spoon").rotate("spoon", "bin", 0.0)
        .transport("spoon", "bin").release("spoon");
    t.stages = seq.stages;
    t.subtasks = {{"turn the spoon to match the bin", 0, 3},
                  {"put the spoon in the bin", 3, 5}};
    t.success = {near_pred("spoon", "bin", r), aligned_pred("spoon", "bin", 0.0, cfg.yaw_tol),
                 empty_hand_pred()};
    t.eval_horizon = 150;
    out.push_back(std::move(t));
  }
  return out;
}

TaskSpec find_task(const std::string& id, const WorldConfig& cfg) {
  for (auto& t : target_tasks(cfg))
    if (t.id == id) return t;
  for (auto& t : prior_tasks(cfg))
    if (t.id == id) return t;
  throw DataError("unknown task: " + id);
}

std::vector<TaskSpec> prior_tasks(const WorldConfig& cfg) {
  std::vector<TaskSpec> out;
  const double r = cfg.region_radius;
  const std::vector<std::string> dests = {"bin", "bowl", "box", "pot", "drawer"};

  for (const auto& item : kItems) {
    for (const auto& dest : dests) {
      if (combo_held_out(item, dest)) continue;
      TaskSpec t;
      t.id = "prior_put_" + item + "_" + dest;
      t.family = "prior";
      t.instruction = "put the " + item + " in the " + dest;
      append_pick_place(t, item, dest);
      t.success = {near_pred(item, dest, r), empty_hand_pred()};
      out.push_back(std::move(t));
    }
  }
  for (std::size_t i = 0; i < kItems.size(); ++i) {
    int taken = 0;
    for (std::size_t k = 0; k < kAlignDests.size() && taken < 2; ++k) {
      const auto& dest = kAlignDests[(i + k) % kAlignDests.size()];
      if (combo_held_out(kItems[i], dest)) continue;
      TaskSpec t;
      t.id = "prior_turn_" + kItems[i] + "_" + dest;
      t.family = "prior";
      t.instruction = "turn the " + kItems[i] + " to match the " + dest;
      StageSeq seq;
      seq.reach(kItems[i]).grasp(kItems[i]).rotate(kItems[i], dest, 0.0);
      t.stages = seq.stages;
      t.subtasks = {{t.instruction, 0, 3}};
      t.success = {aligned_pred(kItems[i], dest, 0.0, cfg.yaw_tol), held_pred(kItems[i])};
      out.push_back(std::move(t));
      ++taken;
    }
  }
  for (const auto& item : kItems) {
    TaskSpec t;
    t.id = "prior_reach_" + item;
    t.family = "prior";
    t.instruction = "move the gripper to the " + item;
    StageSeq seq;
    seq.reach(item);
    t.stages = seq.stages;
    t.subtasks = {{t.instruction, 0, 1}};
    t.success = {gripper_near_pred(item, 0.07)};
    out.push_back(std::move(t));
  }
  {
    TaskSpec t;
    t.id = "prior_open_drawer";
    t.family = "prior";
    t.instruction = "open the drawer";
    StageSeq seq;
    seq.reach("drawer").grasp("drawer").transport_abs("drawer", kDrawerOpenTarget +
                                                                    Vec3(0, 0, cfg.hover));
    seq.release("drawer");
    t.stages = seq.stages;
    t.subtasks = {{t.instruction, 0, 4}};
    t.success = {region_pred("drawer", kDrawerOpenTarget, kDrawerOpenRadius),
                 empty_hand_pred()};
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<MoveDir> nominal_move_words(const Vec3& delta, double secondary_ratio) {
  Vec3 mag = delta.cwiseAbs();
  int a1 = 0;
  mag.maxCoeff(&a1);
  std::vector<MoveDir> words = {move_dir_for_axis(a1, delta[a1])};
  int a2 = -1;
  double best = 0;
  for (int i = 0; i < 3; ++i) {
    if (i == a1) continue;
    if (mag[i] > best) {
      best = mag[i];
      a2 = i;
    }
  }
  if (a2 >= 0 && best >= secondary_ratio * mag[a1] && best > 0)
    words.push_back(move_dir_for_axis(a2, delta[a2]));
  return words;
}

Decomposition ground_truth_decomposition(const TaskSpec& task, const WorldConfig& cfg) {
  if (task.subtasks.empty())
    throw DataError("task has no subtask templates: " + task.id);

  auto nominal_of = [&](const std::string& id) {
    const auto& spec = cfg.object_spec(id);
    return Vec3(spec.mean_pos.x(), spec.mean_pos.y(), cfg.table_z);
  };

  Decomposition d;
  Vec3 pos = cfg.gripper_start;
  for (const auto& st : task.subtasks) {
    Subtask sub;
    sub.high = st.high;
    for (int si = st.stage_begin; si < st.stage_end; ++si) {
      const Stage& stage = task.stages[static_cast<std::size_t>(si)];
      switch (stage.kind) {
        case Stage::Kind::kReach: {
          const Vec3 target = nominal_of(stage.object);
          const Vec3 delta = target - pos;
          SkillPrimitive m;
          m.kind = SkillKind::kMove;
          auto words = nominal_move_words(delta);
          m.dir = words[0];
          if (words.size() > 1) m.dir2 = words[1];
          m.target = stage.object;
          for (int c = 0; c < move_copies(delta); ++c)
            sub.skills.push_back(render_skill(m));
          pos = target;
          break;
        }
        case Stage::Kind::kGrasp: {
          SkillPrimitive g;
          g.kind = SkillKind::kClose;
          g.target = stage.object;
          sub.skills.push_back(render_skill(g));
          break;
        }
        case Stage::Kind::kTransport: {
          const Vec3 target = stage.anchor.empty()
                                  ? stage.abs_target
                                  : nominal_of(stage.anchor) + Vec3(0, 0, cfg.hover);
          const Vec3 delta = target - pos;
          SkillPrimitive m;
          m.kind = SkillKind::kMove;
          auto words = nominal_move_words(delta);
          m.dir = words[0];
          if (words.size() > 1) m.dir2 = words[1];
          m.target = stage.anchor;  // absolute targets render targetless
          for (int c = 0; c < move_copies(delta); ++c)
            sub.skills.push_back(render_skill(m));
          pos = target;
          break;
        }
        case Stage::Kind::kRelease: {
          SkillPrimitive g;
          g.kind = SkillKind::kOpen;
          g.target = stage.object;
          sub.skills.push_back(render_skill(g));
          break;
        }
        case Stage::Kind::kRotateAlign: {
          const auto& anchor = cfg.object_spec(stage.anchor);
          const auto& obj = cfg.object_spec(stage.object);
          const double err = wrap_angle(anchor.mean_yaw + stage.yaw_offset - obj.mean_yaw);
          SkillPrimitive rot;
          rot.kind = SkillKind::kRotate;
          rot.rot = rot_dir_for_axis(0, err >= 0 ? 1.0 : -1.0);
          sub.skills.push_back(render_skill(rot));
          break;
        }
      }
    }
    d.subtasks.push_back(std::move(sub));
  }
  return d;
}

}  // namespace palo
