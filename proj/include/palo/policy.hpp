#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "palo/features.hpp"
#include "palo/types.hpp"

namespace palo {

// Linear-in-features action policy a = sigmoid(W^T kron(cond, sf)) with
// cond = [1; embed(high); embed(low)]. Masking one conditioning level passes
// a zero embedding, which exactly removes that block of W from the output,
// so a single weight matrix serves the joint policy and both marginals.
class PolicyModel {
 public:
  explicit PolicyModel(FeaturizerConfig cfg);

  const StateFeaturizer& featurizer() const { return feat_; }
  const FeaturizerConfig& config() const { return feat_.config(); }

  // dim() x kActionDim; rows follow the kron layout of StateFeaturizer.
  const Eigen::MatrixXd& weights() const { return W_; }
  Eigen::MatrixXd& weights() { return W_; }

  // Zero vector when absent or empty (the masked conditioning).
  Eigen::VectorXd embed(const std::optional<std::string>& text) const;

  Action predict(const State& s, const std::optional<std::string>& high,
                 const std::optional<std::string>& low) const;
  Action predict_embedded(const Eigen::VectorXd& sf,
                          const Eigen::VectorXd& cond) const;

 private:
  StateFeaturizer feat_;
  Eigen::MatrixXd W_;
};

// W contracted against one fixed conditioning vector, so each step costs a
// single (kActionDim x state_dim) product. Rollouts and the adaptation cost
// tables build one of these per (high, low) pair.
class ConditionedPredictor {
 public:
  ConditionedPredictor(const PolicyModel& model,
                       const std::optional<std::string>& high,
                       const std::optional<std::string>& low);
  ConditionedPredictor(const PolicyModel& model, const Eigen::VectorXd& cond);

  Action predict(const State& s) const;
  Action predict_features(const Eigen::VectorXd& sf) const;

  // kActionDim x state_dim.
  const Eigen::MatrixXd& contracted() const { return M_; }

 private:
  const StateFeaturizer* feat_;
  Eigen::MatrixXd M_;
};

// Row-aligned training tensors, one row per demo timestep.
struct TrainBatch {
  Eigen::MatrixXd sf;    // rows x state_dim
  Eigen::MatrixXd high;  // rows x embed_dim
  Eigen::MatrixXd low;   // rows x embed_dim
  Eigen::MatrixXd act;   // rows x kActionDim
  Eigen::Index rows() const { return sf.rows(); }
};

// Every trajectory must carry per-chunk labels; throws DataError naming the
// offenders otherwise.
TrainBatch assemble_batch(const Dataset& data, const StateFeaturizer& feat);

// Batch for instruction-only training: high = embed(trajectory instruction),
// low = 0 on every row.
TrainBatch assemble_instruction_batch(const Dataset& data,
                                      const StateFeaturizer& feat);

// Mean over rows of three equally weighted squared-error terms (fully
// conditioned, high-only, low-only), plus ridge * ||W||_F^2. `terms` gets the
// per-term means in that order.
double masked_bc_loss(const Eigen::MatrixXd& W, const TrainBatch& batch,
                      double ridge, const StateFeaturizer& feat,
                      Eigen::Vector3d* terms = nullptr);
Eigen::MatrixXd masked_bc_grad(const Eigen::MatrixXd& W, const TrainBatch& batch,
                               double ridge, const StateFeaturizer& feat);

struct TrainConfig {
  int steps = 4000;
  int batch = 256;
  double lr = 0.02;
  double ridge = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 17;
};

struct TrainReport {
  std::vector<double> minibatch_loss;           // one entry per step
  double final_loss = 0.0;                      // full-data loss afterwards
  Eigen::Vector3d final_terms = Eigen::Vector3d::Zero();
};

PolicyModel train_masked_bc(const Dataset& data, const FeaturizerConfig& feat,
                            const TrainConfig& cfg,
                            TrainReport* report = nullptr);

struct FinetuneConfig {
  int steps = 800;
  int batch = 128;
  double lr = 0.01;
  double ridge = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 29;
};

// Continues training on the high-only term with the target instruction as
// conditioning; the low-level weight block sees zero gradient and survives
// untouched. Zero steps returns the model bit-identical.
PolicyModel finetune_baseline(PolicyModel model, const Dataset& target,
                              const FinetuneConfig& cfg,
                              TrainReport* report = nullptr);

// Replays the action of the closest stored demo step, distance measured in
// state-feature space. Ties keep the earliest trajectory, then timestep.
class NearestNeighborPolicy {
 public:
  NearestNeighborPolicy(const Dataset& demos, const StateFeaturizer& feat);

  Action action(const State& s) const;
  // (trajectory index, 0-based step) of the winning row.
  std::pair<int, int> nearest(const State& s) const;

 private:
  StateFeaturizer feat_;
  Eigen::MatrixXd sf_;
  Eigen::MatrixXd act_;
  std::vector<std::pair<int, int>> origin_;
};

void save_policy(const PolicyModel& model, const std::string& path);
PolicyModel load_policy(const std::string& path);

}  // namespace palo
