#pragma once

#include <optional>
#include <string>
#include <vector>

#include "palo/types.hpp"

namespace palo {

// Low-level skill sentences. The closed grammar:
//   "move the gripper D [and D2] [towards the T]"
//   "rotate the gripper R"
//   "close the gripper [to pick up the T]"
//   "open the gripper [to release the T]"
//   "move the gripper back to neutral"
// D in {forward, backward, left, right, up, down};
// R in {left, right, up, down, clockwise, counterclockwise};
// T is a free object phrase.

enum class SkillKind { kMove, kRotate, kClose, kOpen, kNeutral };

enum class MoveDir { kForward, kBackward, kLeft, kRight, kUp, kDown };
enum class RotDir { kLeft, kRight, kUp, kDown, kClockwise, kCounterclockwise };

struct SkillPrimitive {
  SkillKind kind = SkillKind::kNeutral;
  MoveDir dir = MoveDir::kForward;
  std::optional<MoveDir> dir2;
  RotDir rot = RotDir::kClockwise;
  std::string target;  // empty when the sentence names no object

  bool operator==(const SkillPrimitive&) const = default;
};

// Axis/sign conventions shared by the labeler, the scripted experts and the
// ground-truth decompositions:
//   +x forward / -x backward, +y left / -y right, +z up / -z down;
//   yaw+ counterclockwise / yaw- clockwise, pitch+ up / pitch- down,
//   roll+ right / roll- left.
MoveDir move_dir_for_axis(int axis, double sign);
RotDir rot_dir_for_axis(int axis, double sign);

std::string to_word(MoveDir d);
std::string to_word(RotDir r);

std::string render_skill(const SkillPrimitive& s);

// Throws DataError naming the offending token. Case and surrounding
// whitespace are ignored; trailing punctuation is dropped.
SkillPrimitive parse_skill(const std::string& sentence);

bool is_valid_skill(const std::string& sentence);

// Every sentence the grammar admits over the given target phrases. Finite;
// used by round-trip and embedding-distinctness tests.
std::vector<std::string> enumerate_skills(const std::vector<std::string>& targets);

// Skills that bear cost during adaptation; the neutral terminator is parsed
// but excluded unless include_neutral is set.
bool bears_cost(const SkillPrimitive& s, bool include_neutral);

}  // namespace palo
