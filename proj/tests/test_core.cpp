#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "palo/embed.hpp"
#include "palo/errors.hpp"
#include "palo/features.hpp"
#include "palo/grammar.hpp"
#include "palo/normalize.hpp"
#include "palo/tasks.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

using namespace palo;

namespace {

NormStats stats_of(const WorldConfig& w) { return w.canonical_norm_stats(); }

State sample_state(const WorldConfig& w) {
  Rng rng = derive_stream(99, "core-state");
  return sample_initial_state(w, rng);
}

}  // namespace

TEST_CASE("tokenizer lowercases and strips punctuation") {
  const auto t = tokenize_words("  Put the Beet, in the BIN!  ");
  CHECK(t == std::vector<std::string>{"put", "the", "beet", "in", "the", "bin"});
  CHECK(tokenize_words("").empty());
}

TEST_CASE("embedding is unit length, deterministic and masks to zero") {
  const Eigen::VectorXd e = embed_instruction("put the beet in the bin");
  CHECK(e.size() == kEmbedDim);
  CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((e - embed_instruction("put the beet in the bin")).norm() == 0.0);
  CHECK(embed_instruction("").norm() == 0.0);
  CHECK(embed_instruction("   ").norm() == 0.0);
}

TEST_CASE("function words are invisible to the embedding") {
  CHECK(is_function_word("the"));
  CHECK(is_function_word("and"));
  CHECK_FALSE(is_function_word("up"));
  CHECK_FALSE(is_function_word("towards"));
  CHECK(embed_instruction("the a an to and in").norm() == 0.0);
  const Eigen::VectorXd bare = embed_instruction("pick up beet");
  CHECK((embed_instruction("pick up the beet") - bare).norm() == 0.0);
  CHECK((embed_instruction("close the gripper to pick up the beet") - bare).norm() >
        1e-9);
}

TEST_CASE("closed-grammar words map to distinct buckets") {
  // The salt guarantees injectivity for the grammar's own vocabulary.
  const std::vector<std::string> words = {
      "move",    "the",     "gripper",  "back",     "to",    "neutral",
      "and",     "towards", "rotate",   "close",    "open",  "pick",
      "up",      "release", "forward",  "backward", "left",  "right",
      "down",    "clockwise", "counterclockwise"};
  std::set<int> buckets;
  EmbeddingConfig cfg;
  for (const auto& word : words) {
    const int b = embed_bucket(word, cfg);
    CHECK(b >= 0);
    CHECK(b < cfg.dim);
    buckets.insert(b);
  }
  CHECK(buckets.size() == words.size());
}

namespace {

std::vector<std::string> sorted_tokens(const std::string& s) {
  std::vector<std::string> t;
  for (const auto& w : tokenize_words(s))
    if (!is_function_word(w)) t.push_back(w);
  std::sort(t.begin(), t.end());
  return t;
}

// Sentences whose content-word multisets differ must embed differently; word
// order and function words are deliberately invisible to the bag-of-words.
void check_multiset_distinct(const std::vector<std::string>& sentences) {
  std::vector<Eigen::VectorXd> embs;
  std::vector<std::vector<std::string>> toks;
  embs.reserve(sentences.size());
  for (const auto& s : sentences) {
    embs.push_back(embed_instruction(s));
    toks.push_back(sorted_tokens(s));
  }
  for (std::size_t i = 0; i < embs.size(); ++i)
    for (std::size_t j = i + 1; j < embs.size(); ++j) {
      CAPTURE(sentences[i]);
      CAPTURE(sentences[j]);
      if (toks[i] == toks[j])
        CHECK((embs[i] - embs[j]).norm() == 0.0);
      else
        CHECK((embs[i] - embs[j]).norm() > 1e-9);
    }
}

}  // namespace

TEST_CASE("skill sentences with distinct token multisets embed distinctly") {
  const WorldConfig w = default_world();
  check_multiset_distinct(enumerate_skills(object_ids(w)));
}

TEST_CASE("all task instructions embed distinctly") {
  const WorldConfig w = default_world();
  std::vector<std::string> instr;
  for (const auto& t : prior_tasks(w)) instr.push_back(t.instruction);
  for (const auto& t : target_tasks(w)) instr.push_back(t.instruction);
  check_multiset_distinct(instr);
}

TEST_CASE("normalization round-trips and centers the mean at one half") {
  const WorldConfig w = default_world();
  const NormStats st = stats_of(w);
  Eigen::VectorXd raw(kActionDim);
  raw << 0.04, -0.1, 0.0, 0.2, -0.3, 0.01, 1.5;
  const Action a = normalize_action(raw, st);
  for (int i = 0; i < kActionDim; ++i) {
    CHECK(a[i] > 0.0);
    CHECK(a[i] < 1.0);
  }
  const Eigen::VectorXd back = denormalize_action(a, st);
  CHECK((back - raw).norm() == doctest::Approx(0.0).epsilon(1e-9));

  const Action mid = normalize_action(st.mean, st);
  for (int i = 0; i < kActionDim; ++i)
    CHECK(mid[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalization clamps extreme raw values inside the open interval") {
  const WorldConfig w = default_world();
  const NormStats st = stats_of(w);
  Eigen::VectorXd raw = Eigen::VectorXd::Constant(kActionDim, 1e9);
  const Action a = normalize_action(raw, st);
  for (int i = 0; i < kActionDim; ++i) {
    CHECK(a[i] < 1.0);
    CHECK(a[i] >= 1.0 - 1e-9);
  }
}

TEST_CASE("state features have the documented layout and gating") {
  const WorldConfig w = default_world();
  const StateFeaturizer feat(default_featurizer(w));
  State s = sample_state(w);
  s.held_object.reset();
  const Eigen::VectorXd f_open = feat.state_features(s);
  CHECK(f_open.size() == feat.state_dim());
  CHECK(f_open[0] == 1.0);  // bias

  // Without a held object every held-gated block is exactly zero.
  s.held_object.reset();
  const Eigen::VectorXd base = feat.state_features(s);
  s.held_object = object_ids(w).front();
  const Eigen::VectorXd held = feat.state_features(s);
  CHECK((base - held).norm() > 0.0);

  int nonzero_gated = 0;
  const int n_obj = static_cast<int>(feat.config().objects.size());
  for (int o = 0; o < n_obj; ++o) {
    // Block layout: rel(3), held_this, held*rel(3), d2, held*d2.
    const int off = 9 + 9 * o;
    for (int k : {3, 4, 5, 6, 8}) {
      CHECK(base[off + k] == 0.0);
      nonzero_gated += held[off + k] != 0.0;
    }
  }
  CHECK(nonzero_gated > 0);
}

TEST_CASE("conditioning stacks bias and the two embeddings") {
  const WorldConfig w = default_world();
  const StateFeaturizer feat(default_featurizer(w));
  const Eigen::VectorXd h = embed_instruction("put the beet in the bin");
  const Eigen::VectorXd l = embed_instruction("close the gripper");
  const Eigen::VectorXd c = feat.conditioning(h, l);
  CHECK(c.size() == 1 + 2 * kEmbedDim);
  CHECK(c[0] == 1.0);
  CHECK((c.segment(1, kEmbedDim) - h).norm() == 0.0);
  CHECK((c.segment(1 + kEmbedDim, kEmbedDim) - l).norm() == 0.0);

  const Eigen::VectorXd sf = feat.state_features(sample_state(w));
  const Eigen::VectorXd phi = feat.features(sf, c);
  CHECK(phi.size() == feat.dim());
  // Block c*state_dim .. holds cond[c] * sf.
  for (int blk : {0, 1, 1 + kEmbedDim}) {
    const Eigen::VectorXd seg = phi.segment(blk * feat.state_dim(), feat.state_dim());
    CHECK((seg - c[blk] * sf).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("partition segment bounds tile the horizon") {
  Partition p;
  p.horizon = 10;
  p.cuts = {3, 7};
  p.validate();
  CHECK(p.K() == 3);
  CHECK(p.seg_begin(1) == 1);
  CHECK(p.seg_end(1) == 3);
  CHECK(p.seg_begin(2) == 4);
  CHECK(p.seg_end(2) == 7);
  CHECK(p.seg_begin(3) == 8);
  CHECK(p.seg_end(3) == 10);

  int covered = 0;
  for (int k = 1; k <= p.K(); ++k) covered += p.seg_end(k) - p.seg_begin(k) + 1;
  CHECK(covered == p.horizon);
}

TEST_CASE("partition validation rejects malformed cuts") {
  Partition p;
  p.horizon = 5;
  p.cuts = {2, 2};
  CHECK_THROWS_AS(p.validate(), DataError);
  p.cuts = {0};
  CHECK_THROWS_AS(p.validate(), DataError);
  p.cuts = {5};
  CHECK_THROWS_AS(p.validate(), DataError);
  p.cuts = {4};
  CHECK_NOTHROW(p.validate());
  p.horizon = 0;
  CHECK_THROWS_AS(p.validate(), DataError);
}

TEST_CASE("trajectory validation enforces open-interval actions and label shape") {
  Trajectory t;
  t.instruction = "put the beet in the bin";
  Step s;
  s.action = Action::Constant(0.5);
  t.steps.assign(9, s);
  CHECK_NOTHROW(t.validate());

  t.low_labels.assign(2, "close the gripper");
  CHECK_THROWS_AS(t.validate(), DataError);  // 9 steps -> 3 chunks
  t.low_labels.assign(3, "close the gripper");
  t.high_labels.assign(3, t.instruction);
  CHECK_NOTHROW(t.validate());

  t.steps[4].action[2] = 1.0;
  CHECK_THROWS_AS(t.validate(), DataError);
}

TEST_CASE("target datasets must share one instruction") {
  const WorldConfig w = default_world();
  Dataset d;
  d.role = DatasetRole::kTarget;
  d.norm_stats = stats_of(w);
  Trajectory t;
  Step s;
  t.steps.assign(4, s);
  t.instruction = "put the beet in the bin";
  d.trajectories.push_back(t);
  t.instruction = "open the drawer";
  d.trajectories.push_back(t);
  CHECK_THROWS_AS(d.validate(), DataError);
  d.role = DatasetRole::kPrior;
  CHECK_NOTHROW(d.validate());
}
