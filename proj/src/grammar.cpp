#include "palo/grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace palo {

namespace {

const std::array<std::string, 6> kMoveWords = {"forward", "backward", "left",
                                               "right",   "up",       "down"};
const std::array<std::string, 6> kRotWords = {"left", "right", "up",
                                              "down", "clockwise", "counterclockwise"};

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::optional<MoveDir> move_dir_from_word(const std::string& w) {
  for (std::size_t i = 0; i < kMoveWords.size(); ++i)
    if (kMoveWords[i] == w) return static_cast<MoveDir>(i);
  return std::nullopt;
}

std::optional<RotDir> rot_dir_from_word(const std::string& w) {
  for (std::size_t i = 0; i < kRotWords.size(); ++i)
    if (kRotWords[i] == w) return static_cast<RotDir>(i);
  return std::nullopt;
}

[[noreturn]] void fail(const std::string& sentence, const std::string& token,
                       const std::string& why) {
  throw DataError("cannot parse skill \"" + sentence + "\": " + why + " at token \"" +
                  token + "\"");
}

std::string join_from(const std::vector<std::string>& toks, std::size_t i) {
  std::string out;
  for (; i < toks.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace

MoveDir move_dir_for_axis(int axis, double sign) {
  switch (axis) {
    case 0: return sign >= 0 ? MoveDir::kForward : MoveDir::kBackward;
    case 1: return sign >= 0 ? MoveDir::kLeft : MoveDir::kRight;
    case 2: return sign >= 0 ? MoveDir::kUp : MoveDir::kDown;
  }
  throw std::invalid_argument("move axis must be 0..2");
}

RotDir rot_dir_for_axis(int axis, double sign) {
  switch (axis) {
    case 0: return sign >= 0 ? RotDir::kCounterclockwise : RotDir::kClockwise;
    case 1: return sign >= 0 ? RotDir::kUp : RotDir::kDown;
    case 2: return sign >= 0 ? RotDir::kRight : RotDir::kLeft;
  }
  throw std::invalid_argument("rotation axis must be 0..2");
}

std::string to_word(MoveDir d) { return kMoveWords[static_cast<int>(d)]; }
std::string to_word(RotDir r) { return kRotWords[static_cast<int>(r)]; }

std::string render_skill(const SkillPrimitive& s) {
  std::ostringstream out;
  switch (s.kind) {
    case SkillKind::kNeutral:
      return "move the gripper back to neutral";
    case SkillKind::kMove:
      out << "move the gripper " << to_word(s.dir);
      if (s.dir2) out << " and " << to_word(*s.dir2);
      if (!s.target.empty()) out << " towards the " << s.target;
      return out.str();
    case SkillKind::kRotate:
      return "rotate the gripper " + to_word(s.rot);
    case SkillKind::kClose:
      if (s.target.empty()) return "close the gripper";
      return "close the gripper to pick up the " + s.target;
    case SkillKind::kOpen:
      if (s.target.empty()) return "open the gripper";
      return "open the gripper to release the " + s.target;
  }
  throw std::invalid_argument("unknown skill kind");
}

SkillPrimitive parse_skill(const std::string& sentence) {
  const auto toks = tokenize(sentence);
  if (toks.empty()) throw DataError("cannot parse skill: empty sentence");
  auto expect = [&](std::size_t i, const std::string& word) {
    if (i >= toks.size()) fail(sentence, "<end>", "expected \"" + word + "\"");
    if (toks[i] != word) fail(sentence, toks[i], "expected \"" + word + "\"");
  };

  SkillPrimitive s;
  if (toks[0] == "move") {
    expect(1, "the");
    expect(2, "gripper");
    if (toks.size() >= 4 && toks[3] == "back") {
      expect(4, "to");
      expect(5, "neutral");
      if (toks.size() > 6) fail(sentence, toks[6], "unexpected trailing words");
      s.kind = SkillKind::kNeutral;
      return s;
    }
    if (toks.size() < 4) fail(sentence, "<end>", "expected a direction");
    auto d1 = move_dir_from_word(toks[3]);
    if (!d1) fail(sentence, toks[3], "expected a direction");
    s.kind = SkillKind::kMove;
    s.dir = *d1;
    std::size_t i = 4;
    if (i < toks.size() && toks[i] == "and") {
      if (i + 1 >= toks.size()) fail(sentence, "<end>", "expected a second direction");
      auto d2 = move_dir_from_word(toks[i + 1]);
      if (!d2) fail(sentence, toks[i + 1], "expected a second direction");
      s.dir2 = *d2;
      i += 2;
    }
    if (i < toks.size()) {
      if (toks[i] != "towards" && toks[i] != "toward")
        fail(sentence, toks[i], "expected \"towards\"");
      ++i;
      if (i < toks.size() && toks[i] == "the") ++i;
      s.target = join_from(toks, i);
      if (s.target.empty()) fail(sentence, "<end>", "expected a target object");
    }
    return s;
  }
  if (toks[0] == "rotate") {
    expect(1, "the");
    expect(2, "gripper");
    if (toks.size() < 4) fail(sentence, "<end>", "expected a rotation direction");
    auto r = rot_dir_from_word(toks[3]);
    if (!r) fail(sentence, toks[3], "expected a rotation direction");
    if (toks.size() > 4) fail(sentence, toks[4], "unexpected trailing words");
    s.kind = SkillKind::kRotate;
    s.rot = *r;
    return s;
  }
  if (toks[0] == "close" || toks[0] == "open") {
    const bool closing = toks[0] == "close";
    expect(1, "the");
    expect(2, "gripper");
    s.kind = closing ? SkillKind::kClose : SkillKind::kOpen;
    if (toks.size() == 3) return s;
    expect(3, "to");
    std::size_t i;
    if (closing) {
      expect(4, "pick");
      expect(5, "up");
      i = 6;
    } else {
      expect(4, "release");
      i = 5;
    }
    if (i < toks.size() && toks[i] == "the") ++i;
    s.target = join_from(toks, i);
    if (s.target.empty()) fail(sentence, "<end>", "expected an object");
    return s;
  }
  fail(sentence, toks[0], "unknown skill verb");
}

bool is_valid_skill(const std::string& sentence) {
  try {
    parse_skill(sentence);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

std::vector<std::string> enumerate_skills(const std::vector<std::string>& targets) {
  std::vector<std::string> out;
  auto push = [&](const SkillPrimitive& s) { out.push_back(render_skill(s)); };

  for (int d1 = 0; d1 < 6; ++d1) {
    SkillPrimitive m;
    m.kind = SkillKind::kMove;
    m.dir = static_cast<MoveDir>(d1);
    push(m);
    for (const auto& t : targets) {
      m.target = t;
      push(m);
      m.target.clear();
    }
    for (int d2 = 0; d2 < 6; ++d2) {
      if (d2 == d1) continue;
      m.dir2 = static_cast<MoveDir>(d2);
      push(m);
      for (const auto& t : targets) {
        m.target = t;
        push(m);
        m.target.clear();
      }
      m.dir2.reset();
    }
  }
  for (int r = 0; r < 6; ++r) {
    SkillPrimitive s;
    s.kind = SkillKind::kRotate;
    s.rot = static_cast<RotDir>(r);
    push(s);
  }
  for (bool closing : {true, false}) {
    SkillPrimitive s;
    s.kind = closing ? SkillKind::kClose : SkillKind::kOpen;
    push(s);
    for (const auto& t : targets) {
      s.target = t;
      push(s);
      s.target.clear();
    }
  }
  SkillPrimitive neutral;
  neutral.kind = SkillKind::kNeutral;
  push(neutral);
  return out;
}

bool bears_cost(const SkillPrimitive& s, bool include_neutral) {
  return s.kind != SkillKind::kNeutral || include_neutral;
}

}  // namespace palo
