#include "palo/proposer.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "palo/grammar.hpp"
#include "palo/prompts.hpp"

namespace palo {

using ordered_json = nlohmann::ordered_json;

void validate_decomposition(const Decomposition& d) {
  if (d.subtasks.empty()) throw DataError("decomposition has no subtasks");
  for (const Subtask& st : d.subtasks) {
    if (st.high.empty()) throw DataError("subtask description must be non-empty");
    if (st.skills.empty())
      throw DataError("subtask '" + st.high + "' has no skills");
    for (const std::string& s : st.skills) parse_skill(s);
  }
}

namespace {

void flag_duplicates(ProposalBatch& batch) {
  batch.duplicate.assign(batch.candidates.size(), false);
  for (std::size_t i = 1; i < batch.candidates.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (batch.candidates[i] == batch.candidates[j]) {
        batch.duplicate[i] = true;
        break;
      }
}

MoveDir random_dir(Rng& rng) { return static_cast<MoveDir>(rng.below_int(6)); }
RotDir random_rot(Rng& rng) { return static_cast<RotDir>(rng.below_int(6)); }

std::string random_target(const WorldConfig& world, Rng& rng) {
  const auto ids = object_ids(world);
  return ids[static_cast<std::size_t>(rng.below_int(static_cast<int>(ids.size())))];
}

SkillPrimitive random_skill(const WorldConfig& world, Rng& rng) {
  SkillPrimitive s;
  switch (rng.below_int(5)) {
    case 0:
      s.kind = SkillKind::kMove;
      s.dir = random_dir(rng);
      if (rng.below_int(3) == 0) s.dir2 = random_dir(rng);
      if (rng.below_int(2) == 0) s.target = random_target(world, rng);
      break;
    case 1:
      s.kind = SkillKind::kRotate;
      s.rot = random_rot(rng);
      break;
    case 2:
      s.kind = SkillKind::kClose;
      if (rng.below_int(2) == 0) s.target = random_target(world, rng);
      break;
    case 3:
      s.kind = SkillKind::kOpen;
      if (rng.below_int(2) == 0) s.target = random_target(world, rng);
      break;
    default:
      s.kind = SkillKind::kNeutral;
      break;
  }
  return s;
}

using OpFn = bool (*)(Decomposition&, const WorldConfig&, Rng&);

bool op_retarget(Decomposition& d, const WorldConfig& world, Rng& rng) {
  std::vector<std::pair<int, int>> slots;
  for (int k = 0; k < d.K(); ++k)
    for (int i = 0; i < static_cast<int>(d.subtasks[k].skills.size()); ++i)
      if (!parse_skill(d.subtasks[k].skills[i]).target.empty()) slots.emplace_back(k, i);
  if (slots.empty()) return false;
  const auto [k, i] = slots[static_cast<std::size_t>(
      rng.below_int(static_cast<int>(slots.size())))];
  SkillPrimitive s = parse_skill(d.subtasks[k].skills[i]);
  const std::string old = s.target;
  for (int tries = 0; tries < 8 && s.target == old; ++tries)
    s.target = random_target(world, rng);
  if (s.target == old) return false;
  d.subtasks[k].skills[i] = render_skill(s);
  return true;
}

bool op_redirect(Decomposition& d, const WorldConfig&, Rng& rng) {
  std::vector<std::pair<int, int>> slots;
  for (int k = 0; k < d.K(); ++k)
    for (int i = 0; i < static_cast<int>(d.subtasks[k].skills.size()); ++i)
      if (parse_skill(d.subtasks[k].skills[i]).kind == SkillKind::kMove)
        slots.emplace_back(k, i);
  if (slots.empty()) return false;
  const auto [k, i] = slots[static_cast<std::size_t>(
      rng.below_int(static_cast<int>(slots.size())))];
  SkillPrimitive s = parse_skill(d.subtasks[k].skills[i]);
  const MoveDir old = s.dir;
  for (int tries = 0; tries < 8 && s.dir == old; ++tries) s.dir = random_dir(rng);
  if (s.dir == old) return false;
  if (s.dir2 && *s.dir2 == s.dir) s.dir2.reset();
  d.subtasks[k].skills[i] = render_skill(s);
  return true;
}

bool op_rot_flip(Decomposition& d, const WorldConfig&, Rng& rng) {
  std::vector<std::pair<int, int>> slots;
  for (int k = 0; k < d.K(); ++k)
    for (int i = 0; i < static_cast<int>(d.subtasks[k].skills.size()); ++i)
      if (parse_skill(d.subtasks[k].skills[i]).kind == SkillKind::kRotate)
        slots.emplace_back(k, i);
  if (slots.empty()) return false;
  const auto [k, i] = slots[static_cast<std::size_t>(
      rng.below_int(static_cast<int>(slots.size())))];
  SkillPrimitive s = parse_skill(d.subtasks[k].skills[i]);
  const RotDir old = s.rot;
  for (int tries = 0; tries < 8 && s.rot == old; ++tries) s.rot = random_rot(rng);
  if (s.rot == old) return false;
  d.subtasks[k].skills[i] = render_skill(s);
  return true;
}

bool op_drop(Decomposition& d, const WorldConfig&, Rng& rng) {
  std::vector<int> slots;
  for (int k = 0; k < d.K(); ++k)
    if (d.subtasks[k].skills.size() >= 2) slots.push_back(k);
  if (slots.empty()) return false;
  const int k = slots[static_cast<std::size_t>(
      rng.below_int(static_cast<int>(slots.size())))];
  auto& skills = d.subtasks[k].skills;
  skills.erase(skills.begin() + rng.below_int(static_cast<int>(skills.size())));
  return true;
}

bool op_insert(Decomposition& d, const WorldConfig& world, Rng& rng) {
  const int k = rng.below_int(d.K());
  auto& skills = d.subtasks[k].skills;
  const int pos = rng.below_int(static_cast<int>(skills.size()) + 1);
  skills.insert(skills.begin() + pos, render_skill(random_skill(world, rng)));
  return true;
}

bool op_merge(Decomposition& d, const WorldConfig&, Rng& rng) {
  if (d.K() < 2) return false;
  const int k = rng.below_int(d.K() - 1);
  auto& first = d.subtasks[k];
  auto& second = d.subtasks[k + 1];
  first.skills.insert(first.skills.end(), second.skills.begin(), second.skills.end());
  d.subtasks.erase(d.subtasks.begin() + k + 1);
  return true;
}

bool op_split(Decomposition& d, const WorldConfig&, Rng& rng) {
  std::vector<int> slots;
  for (int k = 0; k < d.K(); ++k)
    if (d.subtasks[k].skills.size() >= 2) slots.push_back(k);
  if (slots.empty()) return false;
  const int k = slots[static_cast<std::size_t>(
      rng.below_int(static_cast<int>(slots.size())))];
  auto& skills = d.subtasks[k].skills;
  const int cut = 1 + rng.below_int(static_cast<int>(skills.size()) - 1);
  Subtask tail;
  tail.high = d.subtasks[k].high;
  tail.skills.assign(skills.begin() + cut, skills.end());
  skills.erase(skills.begin() + cut, skills.end());
  d.subtasks.insert(d.subtasks.begin() + k + 1, std::move(tail));
  return true;
}

bool op_reorder(Decomposition& d, const WorldConfig&, Rng& rng) {
  if (d.K() < 2) return false;
  const int k = rng.below_int(d.K() - 1);
  std::swap(d.subtasks[k], d.subtasks[k + 1]);
  return true;
}

bool op_gripper_swap(Decomposition& d, const WorldConfig&, Rng& rng) {
  std::vector<std::pair<int, int>> slots;
  for (int k = 0; k < d.K(); ++k)
    for (int i = 0; i < static_cast<int>(d.subtasks[k].skills.size()); ++i) {
      const SkillKind kind = parse_skill(d.subtasks[k].skills[i]).kind;
      if (kind == SkillKind::kClose || kind == SkillKind::kOpen) slots.emplace_back(k, i);
    }
  if (slots.empty()) return false;
  const auto [k, i] = slots[static_cast<std::size_t>(
      rng.below_int(static_cast<int>(slots.size())))];
  SkillPrimitive s = parse_skill(d.subtasks[k].skills[i]);
  s.kind = s.kind == SkillKind::kClose ? SkillKind::kOpen : SkillKind::kClose;
  d.subtasks[k].skills[i] = render_skill(s);
  return true;
}

struct OpEntry {
  PerturbOp tag;
  OpFn fn;
};

constexpr OpEntry kOps[] = {
    {kRetarget, op_retarget},   {kRedirect, op_redirect},
    {kRotFlip, op_rot_flip},    {kDropSkill, op_drop},
    {kInsertSkill, op_insert},  {kMergeSubtasks, op_merge},
    {kSplitSubtask, op_split},  {kReorderSubtasks, op_reorder},
    {kGripperSwap, op_gripper_swap},
};

}  // namespace

Decomposition perturb_decomposition(const Decomposition& truth, const WorldConfig& world,
                                    Rng& rng, unsigned* ops_applied) {
  Decomposition d = truth;
  unsigned applied = 0;
  const int want = 1 + rng.below_int(3);
  // Up to 3x over-draw: ops refused for lack of a precondition do not count.
  for (int attempts = 0, done = 0; done < want && attempts < 3 * want; ++attempts) {
    const OpEntry& op =
        kOps[static_cast<std::size_t>(rng.below_int(static_cast<int>(std::size(kOps))))];
    if (op.fn(d, world, rng)) {
      applied |= op.tag;
      ++done;
    }
  }
  if (ops_applied) *ops_applied = applied;
  return d;
}

ProposalBatch propose_mock(const TaskSpec& task, const State& s0,
                           const WorldConfig& world, const MockProposerConfig& cfg) {
  (void)s0;  // the mock plans from nominal geometry, not the sampled scene
  if (cfg.M < 1) throw UsageError("proposal count must be >= 1");
  Rng rng = derive_stream(cfg.seed, task.id);
  const Decomposition truth = ground_truth_decomposition(task, world);
  validate_decomposition(truth);

  int truth_at = -1;
  if (cfg.plant_truth)
    truth_at = cfg.truth_index >= 0 ? std::min(cfg.truth_index, cfg.M - 1)
                                    : rng.below_int(cfg.M);

  ProposalBatch batch;
  batch.provenance = "mock";
  for (int i = 0; i < cfg.M; ++i) {
    if (i == truth_at) {
      batch.candidates.push_back(truth);
      continue;
    }
    Decomposition decoy = perturb_decomposition(truth, world, rng);
    validate_decomposition(decoy);
    batch.candidates.push_back(std::move(decoy));
  }
  flag_duplicates(batch);
  return batch;
}

std::string describe_scene(const State& s0, const WorldConfig& world) {
  char buf[160];
  std::ostringstream out;
  std::snprintf(buf, sizeof(buf), "The gripper is at (%.2f, %.2f, %.2f), fingers %s.",
                s0.gripper_pos.x(), s0.gripper_pos.y(), s0.gripper_pos.z(),
                s0.gripper_open > 0.5 ? "open" : "closed");
  out << buf;
  if (s0.held_object) out << " It is holding the " << *s0.held_object << ".";
  out << " On the table:";
  for (const auto& spec : world.objects) {
    const ObjectPose& pose = s0.object(spec.id);
    std::snprintf(buf, sizeof(buf), " the %s at (%.2f, %.2f), yaw %.2f;", spec.id.c_str(),
                  pose.position.x(), pose.position.y(), pose.yaw);
    out << buf;
  }
  std::string text = out.str();
  text.back() = '.';
  return text;
}

Decomposition parse_planning_reply(const std::string& reply) {
  const std::size_t open = reply.find('{');
  if (open == std::string::npos) throw DataError("planning reply contains no JSON object");
  // Bracket matching that honours JSON string syntax, so prose after the
  // object and braces inside quoted text cannot confuse extraction.
  std::size_t close = std::string::npos;
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < reply.size(); ++i) {
    const char ch = reply[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (ch == '\\')
        escaped = true;
      else if (ch == '"')
        in_string = false;
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '{') {
      ++depth;
    } else if (ch == '}') {
      if (--depth == 0) {
        close = i;
        break;
      }
    }
  }
  if (close == std::string::npos) throw DataError("planning reply JSON is unbalanced");

  ordered_json j;
  try {
    j = ordered_json::parse(reply.substr(open, close - open + 1));
  } catch (const ordered_json::parse_error& e) {
    throw DataError(std::string("planning reply JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("planning reply must be a JSON dictionary");

  Decomposition d;
  for (const auto& [key, value] : j.items()) {
    Subtask st;
    st.high = key;
    if (!value.is_array()) throw DataError("subtask '" + key + "' value must be a list");
    for (const auto& item : value) {
      if (!item.is_string())
        throw DataError("subtask '" + key + "' has a non-string skill");
      st.skills.push_back(item.get<std::string>());
    }
    d.subtasks.push_back(std::move(st));
  }
  validate_decomposition(d);
  return d;
}

ProposalBatch propose_remote(const State& s0, const std::string& instruction,
                             const WorldConfig& world, ChatBackend& chat,
                             const RemoteProposerConfig& cfg) {
  if (cfg.M < 1) throw UsageError("proposal count must be >= 1");
  if (cfg.max_retries < 0) throw UsageError("max_retries must be >= 0");
  const std::string& tmpl =
      cfg.prompt_template.empty() ? planning_prompt_template() : cfg.prompt_template;
  const std::string prompt = render_prompt(tmpl, "instrs", instruction) +
                             "\n\nNo image is attached. The scene, described textually:\n" +
                             describe_scene(s0, world) + "\n";

  ProposalBatch batch;
  batch.provenance = "remote:" + cfg.model;
  std::string last_error;
  for (int i = 0; i < cfg.M; ++i) {
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      const std::string reply = chat.complete(prompt);
      batch.transcripts.emplace_back(prompt, reply);
      try {
        batch.candidates.push_back(parse_planning_reply(reply));
        break;
      } catch (const DataError& e) {
        last_error = e.what();
      }
    }
  }
  if (batch.candidates.empty())
    throw RemoteError("no valid proposals out of " + std::to_string(cfg.M) +
                      " requests; last error: " + last_error);
  flag_duplicates(batch);
  return batch;
}

}  // namespace palo
