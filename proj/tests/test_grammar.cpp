#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "palo/errors.hpp"
#include "palo/grammar.hpp"

using namespace palo;

TEST_CASE("render and parse are inverse over the full grammar") {
  const std::vector<std::string> targets = {"beet", "pot lid", "sweet potato"};
  const auto all = enumerate_skills(targets);
  CHECK(all.size() > 100);
  std::set<std::string> distinct;
  for (const auto& s : all) {
    CAPTURE(s);
    const SkillPrimitive p = parse_skill(s);
    CHECK(render_skill(p) == s);
    distinct.insert(s);
  }
  // No sentence is produced twice.
  CHECK(distinct.size() == all.size());
}

TEST_CASE("expected sentence count for the enumerated grammar") {
  // 6 moves x (1 bare + T targets) x (1 + 5 second directions),
  // 6 rotations, close/open each bare + per target, 1 neutral.
  const std::size_t T = 3;
  const auto all = enumerate_skills({"a", "b", "c"});
  const std::size_t moves = 6 * (1 + T) * 6;
  CHECK(all.size() == moves + 6 + 2 * (1 + T) + 1);
}

TEST_CASE("parser ignores case, punctuation and extra whitespace") {
  const SkillPrimitive a = parse_skill("  Move the GRIPPER up, towards the Beet. ");
  CHECK(a.kind == SkillKind::kMove);
  CHECK(a.dir == MoveDir::kUp);
  CHECK(a.target == "beet");

  // "toward" works as well as "towards"; the article is optional.
  const SkillPrimitive b = parse_skill("move the gripper down toward pot lid");
  CHECK(b.target == "pot lid");

  const SkillPrimitive c = parse_skill("CLOSE THE GRIPPER");
  CHECK(c.kind == SkillKind::kClose);
  CHECK(c.target.empty());
}

TEST_CASE("multiword targets survive the round trip") {
  SkillPrimitive s;
  s.kind = SkillKind::kOpen;
  s.target = "sweet potato";
  const SkillPrimitive back = parse_skill(render_skill(s));
  CHECK(back == s);
}

TEST_CASE("neutral terminator parses and renders exactly") {
  const SkillPrimitive s = parse_skill("move the gripper back to neutral");
  CHECK(s.kind == SkillKind::kNeutral);
  CHECK(render_skill(s) == "move the gripper back to neutral");
}

TEST_CASE("malformed sentences throw naming the offending token") {
  CHECK_THROWS_WITH_AS(parse_skill("move the gripper sideways"),
                       doctest::Contains("sideways"), DataError);
  CHECK_THROWS_WITH_AS(parse_skill("wiggle the gripper up"),
                       doctest::Contains("wiggle"), DataError);
  CHECK_THROWS_WITH_AS(parse_skill("rotate the gripper clockwise extra"),
                       doctest::Contains("extra"), DataError);
  CHECK_THROWS_AS(parse_skill("close the gripper to pick up the"), DataError);
  CHECK_THROWS_AS(parse_skill(""), DataError);
  CHECK_FALSE(is_valid_skill("move the gripper"));
  CHECK(is_valid_skill("open the gripper to release the beet"));
}

TEST_CASE("axis conventions match the documented frame") {
  CHECK(move_dir_for_axis(0, +1) == MoveDir::kForward);
  CHECK(move_dir_for_axis(0, -1) == MoveDir::kBackward);
  CHECK(move_dir_for_axis(1, +1) == MoveDir::kLeft);
  CHECK(move_dir_for_axis(1, -1) == MoveDir::kRight);
  CHECK(move_dir_for_axis(2, +1) == MoveDir::kUp);
  CHECK(move_dir_for_axis(2, -1) == MoveDir::kDown);
  CHECK(rot_dir_for_axis(0, +1) == RotDir::kCounterclockwise);
  CHECK(rot_dir_for_axis(0, -1) == RotDir::kClockwise);
  CHECK(rot_dir_for_axis(1, +1) == RotDir::kUp);
  CHECK(rot_dir_for_axis(2, -1) == RotDir::kLeft);
  CHECK_THROWS_AS(move_dir_for_axis(3, 1), std::invalid_argument);
  CHECK_THROWS_AS(rot_dir_for_axis(-1, 1), std::invalid_argument);
}

TEST_CASE("cost accounting separates neutral from working skills") {
  SkillPrimitive move;
  move.kind = SkillKind::kMove;
  SkillPrimitive rot;
  rot.kind = SkillKind::kRotate;
  SkillPrimitive close;
  close.kind = SkillKind::kClose;
  SkillPrimitive open;
  open.kind = SkillKind::kOpen;
  SkillPrimitive neutral;
  neutral.kind = SkillKind::kNeutral;

  for (const auto& s : {move, rot, close, open}) {
    CHECK(bears_cost(s, false));
    CHECK(bears_cost(s, true));
  }
  CHECK_FALSE(bears_cost(neutral, false));
  CHECK(bears_cost(neutral, true));
}
