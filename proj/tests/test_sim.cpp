#include <doctest.h>

#include <cmath>
#include <set>

#include "palo/expert.hpp"
#include "palo/normalize.hpp"
#include "palo/rng.hpp"
#include "palo/world.hpp"

using namespace palo;

namespace {

Action raw_to_action(const Eigen::VectorXd& raw, const WorldConfig& cfg) {
  return normalize_action(raw, cfg.canonical_norm_stats());
}

Action noop_action() {
  Action a;
  a.setConstant(0.5);
  return a;
}

// raw translation delta + grip command, zero rotation.
Action move_action(const Vec3& delta, double grip, const WorldConfig& cfg) {
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(kActionDim);
  raw.segment<3>(0) = delta;
  raw[kActionDim - 1] = grip;
  return raw_to_action(raw, cfg);
}

State fresh_state(const WorldConfig& cfg, std::uint64_t seed = 3) {
  Rng rng = derive_stream(seed, "sim-test");
  return sample_initial_state(cfg, rng);
}

}  // namespace

TEST_CASE("wrap_angle maps onto the half-open interval (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(M_PI) == M_PI);
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(2 * M_PI) == doctest::Approx(0.0));
  CHECK(wrap_angle(3.5 * M_PI) == doctest::Approx(-0.5 * M_PI));
  CHECK(wrap_angle(-7.25 * M_PI) == doctest::Approx(0.75 * M_PI));
  for (double a : {-9.4, -2.0, 0.3, 5.1, 14.8}) {
    const double w = wrap_angle(a);
    CHECK(w > -M_PI);
    CHECK(w <= M_PI);
    CHECK(wrap_angle(w) == w);
    CHECK(std::remainder(a - w, 2 * M_PI) == doctest::Approx(0.0));
  }
}

TEST_CASE("default world lists items, destinations and a graspable drawer") {
  const WorldConfig cfg = default_world();
  cfg.validate();
  CHECK(cfg.objects.size() == 13);
  CHECK(item_ids(cfg).size() == 8);
  CHECK(destination_ids(cfg).size() == 5);
  CHECK(cfg.object_spec("drawer").graspable);
  CHECK(cfg.object_spec("drawer").is_destination);
  CHECK_FALSE(cfg.object_spec("bin").graspable);
  CHECK_FALSE(cfg.object_spec("beet").is_destination);
  CHECK_THROWS_AS((void)cfg.object_spec("anvil"), DataError);

  const NormStats stats = cfg.canonical_norm_stats();
  CHECK(stats.mean.isZero(0.0));
  CHECK((stats.stddev - cfg.action_scale).norm() == 0.0);
}

TEST_CASE("world config validation rejects malformed setups") {
  WorldConfig cfg = default_world();
  cfg.action_scale = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(cfg.validate(), DataError);

  cfg = default_world();
  cfg.action_scale[2] = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DataError);

  cfg = default_world();
  cfg.workspace_min[1] = cfg.workspace_max[1] + 0.1;
  CHECK_THROWS_AS(cfg.validate(), DataError);

  cfg = default_world();
  cfg.objects[0].id = "";
  CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("state validation enforces workspace, held id and gripper range") {
  const WorldConfig cfg = default_world();
  State s = fresh_state(cfg);
  CHECK_NOTHROW(validate_state(s, cfg));

  State bad = s;
  bad.gripper_pos[0] = cfg.workspace_max[0] + 0.01;
  CHECK_THROWS_AS(validate_state(bad, cfg), DataError);

  // Objects get grasp_radius of slack beyond the workspace before they count
  // as out of bounds (a carried object can poke out by the grasp offset).
  bad = s;
  bad.objects["beet"].position[0] = cfg.workspace_max[0] + cfg.grasp_radius - 0.01;
  CHECK_NOTHROW(validate_state(bad, cfg));
  bad.objects["beet"].position[0] = cfg.workspace_max[0] + cfg.grasp_radius + 0.01;
  CHECK_THROWS_AS(validate_state(bad, cfg), DataError);

  bad = s;
  bad.held_object = "anvil";
  CHECK_THROWS_AS(validate_state(bad, cfg), DataError);

  bad = s;
  bad.gripper_open = 1.5;
  CHECK_THROWS_AS(validate_state(bad, cfg), DataError);
}

TEST_CASE("initial states are deterministic, separated and on the table") {
  const WorldConfig cfg = default_world();
  Rng a = derive_stream(11, "scene");
  Rng b = derive_stream(11, "scene");
  const State sa = sample_initial_state(cfg, a);
  const State sb = sample_initial_state(cfg, b);

  CHECK((sa.gripper_pos - cfg.gripper_start).norm() == 0.0);
  CHECK(sa.gripper_open == 1.0);
  CHECK_FALSE(sa.held_object.has_value());
  for (const auto& [id, pose] : sa.objects) {
    const ObjectSpec& spec = cfg.object_spec(id);
    CHECK(pose.position.z() == cfg.table_z);
    CHECK(std::abs(pose.position.x() - spec.mean_pos.x()) <= spec.pos_jitter);
    CHECK(std::abs(pose.position.y() - spec.mean_pos.y()) <= spec.pos_jitter);
    CHECK(std::abs(wrap_angle(pose.yaw - spec.mean_yaw)) <= spec.yaw_jitter + 1e-12);
    CHECK((pose.position - sb.objects.at(id).position).norm() == 0.0);
    CHECK(pose.yaw == sb.objects.at(id).yaw);
  }
  for (auto it = sa.objects.begin(); it != sa.objects.end(); ++it) {
    auto jt = it;
    for (++jt; jt != sa.objects.end(); ++jt)
      CHECK((it->second.position - jt->second.position).norm() >= cfg.min_object_gap);
  }

  WorldConfig impossible = default_world();
  impossible.min_object_gap = 10.0;
  Rng c = derive_stream(11, "scene");
  CHECK_THROWS_AS((void)sample_initial_state(impossible, c, 5), DataError);
}

TEST_CASE("step rejects actions on or outside the open unit interval") {
  const WorldConfig cfg = default_world();
  const State s = fresh_state(cfg);
  Action a = noop_action();
  a[0] = 0.0;
  CHECK_THROWS_AS((void)step(s, a, cfg), DataError);
  a[0] = 1.0;
  CHECK_THROWS_AS((void)step(s, a, cfg), DataError);
  a[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)step(s, a, cfg), DataError);
}

TEST_CASE("step translates by the denormalized delta and clamps to workspace") {
  const WorldConfig cfg = default_world();
  const State s = fresh_state(cfg);

  const State still = step(s, noop_action(), cfg);
  CHECK((still.gripper_pos - s.gripper_pos).norm() == 0.0);
  CHECK((still.gripper_rot - s.gripper_rot).norm() == 0.0);
  // gripper_open snaps to the commanded binary level every step.
  CHECK(still.gripper_open == 1.0);

  const Vec3 delta(0.05, -0.03, 0.01);
  const State moved = step(s, move_action(delta, -1.5, cfg), cfg);
  CHECK((moved.gripper_pos - (s.gripper_pos + delta)).norm() ==
        doctest::Approx(0.0).epsilon(1e-9));

  State edge = s;
  edge.gripper_pos = Vec3(cfg.workspace_max[0] - 0.01, 0.0, 0.25);
  const State clamped = step(edge, move_action(Vec3(0.1, 0, 0), -1.5, cfg), cfg);
  CHECK(clamped.gripper_pos[0] == cfg.workspace_max[0]);
}

TEST_CASE("step wraps gripper yaw") {
  const WorldConfig cfg = default_world();
  State s = fresh_state(cfg);
  s.gripper_rot[0] = M_PI - 0.05;
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(kActionDim);
  raw[3] = 0.2;
  raw[kActionDim - 1] = -1.5;
  const State out = step(s, raw_to_action(raw, cfg), cfg);
  CHECK(out.gripper_rot[0] == doctest::Approx(-M_PI + 0.15));
}

TEST_CASE("closing the gripper grasps the nearest graspable object in range") {
  const WorldConfig cfg = default_world();
  State s = fresh_state(cfg);
  const Vec3 beet = s.objects.at("beet").position;

  // Just outside the grasp radius: nothing happens.
  s.gripper_pos = beet + Vec3(cfg.grasp_radius + 0.005, 0, 0);
  State out = step(s, move_action(Vec3::Zero(), 1.5, cfg), cfg);
  CHECK_FALSE(out.held_object.has_value());
  CHECK(out.gripper_open == 0.0);

  // In range: the beet is picked up.
  s.gripper_pos = beet + Vec3(cfg.grasp_radius - 0.01, 0, 0);
  out = step(s, move_action(Vec3::Zero(), 1.5, cfg), cfg);
  REQUIRE(out.held_object.has_value());
  CHECK(*out.held_object == "beet");

  // A still-closed empty gripper keeps trying: approaching while closed
  // grasps on the step that enters the radius (motion happens first).
  s.gripper_pos = beet + Vec3(cfg.grasp_radius + 0.06, 0, 0);
  State mid = step(s, move_action(Vec3(-0.04, 0, 0), 1.5, cfg), cfg);
  CHECK_FALSE(mid.held_object.has_value());
  State close = step(mid, move_action(Vec3(-0.04, 0, 0), 1.5, cfg), cfg);
  CHECK(close.held_object.has_value());

  // Destinations are not graspable: hovering over the bin grabs nothing.
  s = fresh_state(cfg);
  s.gripper_pos = s.objects.at("bin").position + Vec3(0.01, 0, 0);
  out = step(s, move_action(Vec3::Zero(), 1.5, cfg), cfg);
  CHECK_FALSE(out.held_object.has_value());

  // Two objects in range: the nearer one wins.
  s = fresh_state(cfg);
  s.objects["beet"].position = Vec3(0.0, 0.0, cfg.table_z);
  s.objects["corn"].position = Vec3(0.05, 0.0, cfg.table_z);
  s.gripper_pos = Vec3(0.04, 0.0, cfg.table_z);
  out = step(s, move_action(Vec3::Zero(), 1.5, cfg), cfg);
  REQUIRE(out.held_object.has_value());
  CHECK(*out.held_object == "corn");
}

TEST_CASE("a held object moves rigidly and drops when the gripper opens") {
  const WorldConfig cfg = default_world();
  State s = fresh_state(cfg);
  s.gripper_pos = s.objects.at("beet").position + Vec3(0.03, -0.02, 0.0);
  State held = step(s, move_action(Vec3::Zero(), 1.5, cfg), cfg);
  REQUIRE(held.held_object.has_value());

  const Vec3 offset = held.objects.at("beet").position - held.gripper_pos;
  State carried = held;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(kActionDim);
    raw.segment<3>(0) = Vec3(0.05, 0.02, 0.01);
    raw[3] = 0.1;
    raw[kActionDim - 1] = 1.5;
    const double yaw_before = carried.objects.at("beet").yaw;
    carried = step(carried, raw_to_action(raw, cfg), cfg);
    REQUIRE(carried.held_object.has_value());
    // Rigid up to one rounding step: gripper and object add the same
    // displacement but round independently.
    CHECK((carried.objects.at("beet").position - carried.gripper_pos - offset)
              .norm() <= 1e-12);
    CHECK(carried.objects.at("beet").yaw ==
          doctest::Approx(wrap_angle(yaw_before + 0.1)));
  }

  // Clamping at the workspace boundary must not separate the pair.
  State edge = carried;
  edge.gripper_pos = Vec3(cfg.workspace_max[0] - 0.005, 0.0, 0.25);
  edge.objects["beet"].position = edge.gripper_pos + offset;
  const State pushed = step(edge, move_action(Vec3(0.2, 0, 0), 1.5, cfg), cfg);
  CHECK((pushed.objects.at("beet").position - pushed.gripper_pos - offset).norm() <=
        1e-12);

  const State dropped = step(carried, move_action(Vec3::Zero(), -1.5, cfg), cfg);
  CHECK_FALSE(dropped.held_object.has_value());
  CHECK(dropped.gripper_open == 1.0);
  CHECK((dropped.objects.at("beet").position - carried.objects.at("beet").position)
            .norm() == 0.0);

  // Reopening without a grasp leaves the object untouched by later motion.
  const State after = step(dropped, move_action(Vec3(0.05, 0, 0), -1.5, cfg), cfg);
  CHECK((after.objects.at("beet").position - dropped.objects.at("beet").position)
            .norm() == 0.0);
}

TEST_CASE("predicates cover containment, alignment and possession") {
  const WorldConfig cfg = default_world();
  State s = fresh_state(cfg);
  s.objects["beet"].position = Vec3(0.30, -0.35, cfg.table_z);
  s.objects["bin"].position = Vec3(0.32, -0.33, cfg.table_z);

  Predicate p;
  p.kind = Predicate::Kind::kObjectNearObject;
  p.object = "beet";
  p.anchor = "bin";
  p.radius = 0.05;
  CHECK(predicate_holds(p, s));
  p.radius = 0.01;
  CHECK_FALSE(predicate_holds(p, s));

  p = Predicate{};
  p.kind = Predicate::Kind::kObjectInRegion;
  p.object = "beet";
  p.center = Vec3(0.30, -0.30, cfg.table_z);
  p.radius = 0.06;
  CHECK(predicate_holds(p, s));
  p.radius = 0.04;
  CHECK_FALSE(predicate_holds(p, s));

  p = Predicate{};
  p.kind = Predicate::Kind::kGripperNearObject;
  p.object = "beet";
  p.radius = 0.1;
  s.gripper_pos = s.objects.at("beet").position + Vec3(0.05, 0, 0);
  CHECK(predicate_holds(p, s));
  s.gripper_pos = s.objects.at("beet").position + Vec3(0.2, 0, 0);
  CHECK_FALSE(predicate_holds(p, s));

  // Yaw alignment is evaluated on the wrapped difference.
  p = Predicate{};
  p.kind = Predicate::Kind::kYawAligned;
  p.object = "beet";
  p.anchor = "bin";
  p.yaw_offset = 0.0;
  p.yaw_tol = 0.2;
  s.objects["beet"].yaw = M_PI - 0.05;
  s.objects["bin"].yaw = -M_PI + 0.05;
  CHECK(predicate_holds(p, s));
  s.objects["bin"].yaw = -M_PI + 0.35;
  CHECK_FALSE(predicate_holds(p, s));

  p = Predicate{};
  p.kind = Predicate::Kind::kHeld;
  p.object = "beet";
  CHECK_FALSE(predicate_holds(p, s));
  s.held_object = "corn";
  CHECK_FALSE(predicate_holds(p, s));
  s.held_object = "beet";
  CHECK(predicate_holds(p, s));

  Predicate q;
  q.kind = Predicate::Kind::kNotHeldAny;
  CHECK_FALSE(predicate_holds(q, s));

  CHECK_FALSE(all_hold({p, q}, s));
  s.held_object.reset();
  CHECK(all_hold({q}, s));
  CHECK(all_hold({}, s));
}

TEST_CASE("the scripted expert completes a reach task within the step budget") {
  const WorldConfig cfg = default_world();
  const TaskSpec task = find_task("prior_reach_beet", cfg);
  Rng rng = derive_stream(5, "expert-test");
  const ExpertEpisode ep = run_expert_episode(task, cfg, rng);

  CHECK(ep.success);
  CHECK(ep.traj.length() <= cfg.max_expert_steps);
  CHECK(ep.reference_actions.size() == ep.traj.steps.size());
  CHECK(ep.traj.instruction == task.instruction);
  CHECK(ep.traj.task == task.id);

  State s = ep.traj.steps.front().state;
  bool any_noise = false;
  for (std::size_t t = 0; t < ep.traj.steps.size(); ++t) {
    const Action& a = ep.traj.steps[t].action;
    for (int i = 0; i < kActionDim; ++i) {
      CHECK(a[i] > 0.0);
      CHECK(a[i] < 1.0);
    }
    if ((a - ep.reference_actions[t]).norm() > 1e-9) any_noise = true;
    CHECK((ep.traj.steps[t].state.gripper_pos - s.gripper_pos).norm() == 0.0);
    s = step(s, a, cfg);
    CHECK_NOTHROW(validate_state(s, cfg));
  }
  // The recorded episode is wobbled; the reference stream is the clean one.
  CHECK(any_noise);
  CHECK((s.gripper_pos - s.objects.at("beet").position).norm() <= 0.07);
}

TEST_CASE("the scripted expert completes a pick-and-place end to end") {
  const WorldConfig cfg = default_world();
  const TaskSpec task = find_task("prior_put_beet_bin", cfg);
  Rng rng = derive_stream(6, "expert-test");
  const ExpertEpisode ep = run_expert_episode(task, cfg, rng);
  CHECK(ep.success);

  // Replay to the terminal state and check task predicates directly.
  State s = ep.traj.steps.front().state;
  bool ever_held = false;
  for (const auto& st : ep.traj.steps) {
    s = step(s, st.action, cfg);
    ever_held = ever_held || s.held_object.has_value();
  }
  CHECK(ever_held);
  CHECK_FALSE(s.held_object.has_value());
  CHECK(task.succeeded(s));
  CHECK((s.objects.at("beet").position - s.objects.at("bin").position).norm() <=
        cfg.region_radius);
}

TEST_CASE("dataset generation is deterministic and typed per chunk") {
  const WorldConfig cfg = default_world();
  const std::vector<TaskSpec> tasks = {find_task("prior_reach_beet", cfg),
                                       find_task("prior_reach_corn", cfg)};
  const Dataset d1 = generate_dataset(tasks, 2, cfg, 99);
  const Dataset d2 = generate_dataset(tasks, 2, cfg, 99);

  CHECK(d1.role == DatasetRole::kPrior);
  REQUIRE(d1.trajectories.size() == 4);
  CHECK(d1.trajectories[0].task == "prior_reach_beet");
  CHECK(d1.trajectories[3].task == "prior_reach_corn");
  for (std::size_t i = 0; i < d1.trajectories.size(); ++i) {
    const Trajectory& t = d1.trajectories[i];
    CHECK_NOTHROW(t.validate());
    CHECK_FALSE(t.labeled());
    CHECK(t.length() > 0);
    const Trajectory& u = d2.trajectories[i];
    REQUIRE(u.length() == t.length());
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      CHECK((t.steps[k].action - u.steps[k].action).norm() == 0.0);
      CHECK((t.steps[k].state.gripper_pos - u.steps[k].state.gripper_pos).norm() ==
            0.0);
    }
  }

  const Dataset target =
      generate_dataset({find_task("prior_reach_beet", cfg)}, 2, cfg, 99,
                       DatasetRole::kTarget);
  CHECK(target.role == DatasetRole::kTarget);
  CHECK_NOTHROW(target.validate());
}
