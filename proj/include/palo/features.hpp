#pragma once

#include <Eigen/Dense>

#include "palo/embed.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

struct FeaturizerConfig {
  std::vector<std::string> objects;       // canonical order; states must match
  std::vector<std::string> destinations;  // yaw-alignment anchors
  EmbeddingConfig embedding;
};

FeaturizerConfig default_featurizer(const WorldConfig& cfg);

// Low-order state features crossed with the instruction conditioning.
// Feature vector is kron(cond, sf) with index c * state_dim + s, where
// cond = [1; embed(high); embed(low)]. The leading 1 gives every W column an
// instruction-independent block (and, via sf's own bias entry, a scalar bias).
class StateFeaturizer {
 public:
  explicit StateFeaturizer(FeaturizerConfig cfg);

  int state_dim() const { return state_dim_; }
  int cond_dim() const { return 1 + 2 * cfg_.embedding.dim; }
  int dim() const { return state_dim() * cond_dim(); }

  // Per-object blocks: relative positions, held flags, carried interactions,
  // squared distances; per-destination yaw alignment trig (gated on holding).
  Eigen::VectorXd state_features(const State& s) const;

  Eigen::VectorXd conditioning(const Eigen::VectorXd& high_emb,
                               const Eigen::VectorXd& low_emb) const;

  Eigen::VectorXd features(const Eigen::VectorXd& sf, const Eigen::VectorXd& cond) const;

  const FeaturizerConfig& config() const { return cfg_; }

 private:
  FeaturizerConfig cfg_;
  int state_dim_ = 0;
};

}  // namespace palo
