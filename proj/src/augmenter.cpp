#include "palo/augmenter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "palo/embed.hpp"
#include "palo/normalize.hpp"
#include "palo/prompts.hpp"

namespace palo {

void HeuristicConfig::validate() const {
  if (chunk_len < 1) throw UsageError("chunk length must be >= 1");
  if (!(tau_z > 0.0)) throw UsageError("tau_z must be positive");
  if (!(grip_threshold > 0.0) || !(grip_threshold < 1.0))
    throw UsageError("gripper threshold must lie in (0,1)");
  if (!(secondary_ratio > 0.0) || secondary_ratio > 1.0)
    throw UsageError("secondary ratio must lie in (0,1]");
}

std::vector<ChunkLabel> label_chunks(const Trajectory& traj, const NormStats& stats,
                                     const HeuristicConfig& cfg, const Keywords& kw) {
  cfg.validate();
  stats.validate();
  const int H = traj.length();
  const int n_chunks = (H + cfg.chunk_len - 1) / cfg.chunk_len;
  std::vector<ChunkLabel> out;
  out.reserve(static_cast<std::size_t>(n_chunks));

  // Commanded-open before the first action, so an opening trajectory start
  // cannot fake a close event.
  double prev_grip = 0.0;
  for (int c = 0; c < n_chunks; ++c) {
    const int lo = c * cfg.chunk_len;
    const int hi = std::min(H, lo + cfg.chunk_len);
    const int m = hi - lo;
    ChunkLabel label;
    label.chunk = c;
    label.keywords = kw;

    int event = 0;
    double g_prev = prev_grip;
    for (int t = lo; t < hi; ++t) {
      const double g = traj.steps[static_cast<std::size_t>(t)].action[kActionDim - 1];
      if (event == 0) {
        if (g_prev <= cfg.grip_threshold && g > cfg.grip_threshold)
          event = +1;
        else if (g_prev > cfg.grip_threshold && g <= cfg.grip_threshold)
          event = -1;
      }
      g_prev = g;
    }
    prev_grip = g_prev;

    if (event != 0) {
      label.grip_event = event;
      SkillPrimitive s;
      s.kind = event > 0 ? SkillKind::kClose : SkillKind::kOpen;
      s.target = kw.object;
      label.rendered = render_skill(s);
      out.push_back(std::move(label));
      continue;
    }

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(kActionDim);
    for (int t = lo; t < hi; ++t)
      sum += denormalize_action(traj.steps[static_cast<std::size_t>(t)].action, stats);
    // z-score of the cumulative delta: sums of m unit-variance steps have
    // stddev sqrt(m).
    Eigen::Matrix<double, 6, 1> z;
    for (int a = 0; a < 6; ++a)
      z[a] = (sum[a] - m * stats.mean[a]) / (stats.stddev[a] * std::sqrt(double(m)));

    int best = 0;
    for (int a = 1; a < 6; ++a)
      if (std::abs(z[a]) > std::abs(z[best])) best = a;
    if (std::abs(z[best]) < cfg.tau_z) {
      label.ambiguous = true;
      out.push_back(std::move(label));
      continue;
    }

    SkillPrimitive s;
    if (best < 3) {
      s.kind = SkillKind::kMove;
      s.dir = move_dir_for_axis(best, z[best]);
      label.dir = s.dir;
      if (cfg.allow_two_dirs) {
        int second = best == 0 ? 1 : 0;
        for (int a = 0; a < 3; ++a)
          if (a != best && std::abs(z[a]) > std::abs(z[second])) second = a;
        if (second != best &&
            std::abs(z[second]) >= cfg.secondary_ratio * std::abs(z[best])) {
          s.dir2 = move_dir_for_axis(second, z[second]);
          label.dir2 = s.dir2;
        }
      }
      // Carrying at chunk start: the move heads for the destination.
      const bool carrying =
          traj.steps[static_cast<std::size_t>(lo)].state.gripper_open < 0.5;
      s.target = carrying ? kw.destination : kw.object;
      label.rendered = render_skill(s);
    } else {
      s.kind = SkillKind::kRotate;
      s.rot = rot_dir_for_axis(best - 3, z[best]);
      label.rot = s.rot;
      label.rendered = render_skill(s);
    }
    out.push_back(std::move(label));
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string strip_decoration(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = trim(s.substr(1, s.size() - 2));
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
  return trim(s);
}

}  // namespace

Keywords parse_keyword_reply(const std::string& reply) {
  const std::string low = lower(reply);
  static constexpr const char* kRefusals[] = {
      "i cannot", "i can't", "i am sorry", "i'm sorry", "as an ai", "unable to"};
  for (const char* r : kRefusals)
    if (low.find(r) != std::string::npos) return {};

  const std::string body = strip_decoration(reply);
  const auto comma = body.find(',');
  if (comma == std::string::npos) return {};
  Keywords kw;
  kw.object = strip_decoration(body.substr(0, comma));
  kw.destination = strip_decoration(body.substr(comma + 1));
  if (lower(kw.object) == "n/a") kw.object.clear();
  if (lower(kw.destination) == "n/a") kw.destination.clear();
  return kw;
}

MockKeywordBackend::MockKeywordBackend(const WorldConfig& world)
    : MockKeywordBackend(item_ids(world), destination_ids(world)) {}

MockKeywordBackend::MockKeywordBackend(std::vector<std::string> items,
                                       std::vector<std::string> destinations)
    : items_(std::move(items)), destinations_(std::move(destinations)) {}

Keywords MockKeywordBackend::extract(const std::string& instruction) {
  static const std::regex put_re(R"(put the (.+?) (?:in|into) the (.+?)( while .*)?\.?)",
                                 std::regex::icase);
  static const std::regex turn_re(R"(turn the (.+?) to match the (.+?)\.?)",
                                  std::regex::icase);
  static const std::regex reach_re(R"(move the gripper to the (.+?)\.?)",
                                   std::regex::icase);
  static const std::regex open_re(R"(open the (\w+)\.?)", std::regex::icase);
  static const std::regex move_re(R"(move the (.+?)\.?)", std::regex::icase);

  std::smatch m;
  if (std::regex_match(instruction, m, put_re)) return {m[1].str(), m[2].str()};
  if (std::regex_match(instruction, m, turn_re)) return {m[1].str(), m[2].str()};
  if (std::regex_match(instruction, m, reach_re)) return {m[1].str(), ""};
  if (std::regex_match(instruction, m, open_re)) return {m[1].str(), ""};
  if (std::regex_match(instruction, m, move_re)) return {m[1].str(), ""};

  // Token scan against the world vocabulary; earliest mention wins.
  Keywords kw;
  for (const std::string& tok : tokenize_words(instruction)) {
    if (kw.object.empty() &&
        std::find(items_.begin(), items_.end(), tok) != items_.end())
      kw.object = tok;
    if (kw.destination.empty() &&
        std::find(destinations_.begin(), destinations_.end(), tok) != destinations_.end())
      kw.destination = tok;
  }
  return kw;
}

RemoteKeywordBackend::RemoteKeywordBackend(ChatBackend& chat, std::string prompt_template)
    : chat_(&chat), template_(std::move(prompt_template)) {}

Keywords RemoteKeywordBackend::extract(const std::string& instruction) {
  try {
    const std::string prompt = render_prompt(template_, "instruction", instruction);
    return parse_keyword_reply(chat_->complete(prompt));
  } catch (const RemoteError&) {
    return {};
  }
}

Dataset augment_dataset(const Dataset& data, KeywordBackend& kw, const AugmentConfig& cfg) {
  cfg.heuristic.validate();
  if (cfg.heuristic.chunk_len != kChunkLen)
    throw UsageError("datasets store labels per " + std::to_string(kChunkLen) +
                     "-step chunk; custom chunk lengths only work with label_chunks");
  Dataset out = data;
  for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
    Trajectory& traj = out.trajectories[i];
    if (traj.labeled() && !cfg.overwrite) continue;
    Keywords words;
    try {
      words = kw.extract(traj.instruction);
    } catch (const std::exception& e) {
      if (cfg.log)
        *cfg.log << "keyword extraction failed for trajectory " << i << ": " << e.what()
                 << "; labeling from proprioception only\n";
    }
    const std::vector<ChunkLabel> labels =
        label_chunks(traj, out.norm_stats, cfg.heuristic, words);
    const std::string high =
        cfg.rephraser ? cfg.rephraser->rephrase(traj.instruction, static_cast<int>(i))
                      : traj.instruction;
    traj.low_labels.clear();
    traj.high_labels.clear();
    for (const ChunkLabel& l : labels) {
      traj.low_labels.push_back(l.rendered);
      traj.high_labels.push_back(high);
    }
  }
  out.validate();
  return out;
}

}  // namespace palo
