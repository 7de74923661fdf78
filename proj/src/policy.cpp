#include "palo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "palo/normalize.hpp"
#include "palo/rng.hpp"

namespace palo {

using nlohmann::json;

namespace {

// kActionDim x state_dim contraction of W against a fixed conditioning
// vector. Conditioning vectors are sparse (short word bags, or zeros when a
// level is masked), so zero entries skip their whole block.
Eigen::MatrixXd contract_weights(const PolicyModel& model, const Eigen::VectorXd& cond) {
  const StateFeaturizer& feat = model.featurizer();
  const int S = feat.state_dim();
  if (cond.size() != feat.cond_dim())
    throw DataError("conditioning vector has the wrong dimension");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(kActionDim, S);
  for (int c = 0; c < cond.size(); ++c) {
    if (cond[c] == 0.0) continue;
    M.noalias() += cond[c] * model.weights().middleRows(c * S, S).transpose();
  }
  return M;
}

Action squash_clamp(const Action& z) {
  Action y = (1.0 / (1.0 + (-z.array()).exp())).matrix();
  return y.cwiseMax(kOpenEps).cwiseMin(1.0 - kOpenEps);
}

// S x (E * kActionDim) copy of one conditioning block of W: column
// e * kActionDim + j holds W(offset + e * S + s, j). Lets the batched loss
// run on two modest GEMMs instead of materialising kron rows.
Eigen::MatrixXd stack_block(const Eigen::MatrixXd& W, int S, int E, int offset) {
  Eigen::MatrixXd out(S, static_cast<Eigen::Index>(E) * kActionDim);
  for (int e = 0; e < E; ++e)
    out.middleCols(static_cast<Eigen::Index>(e) * kActionDim, kActionDim) =
        W.middleRows(offset + static_cast<Eigen::Index>(e) * S, S);
  return out;
}

void unstack_add(const Eigen::MatrixXd& stacked, double coef, int S, int E,
                 int offset, Eigen::MatrixXd& G) {
  for (int e = 0; e < E; ++e)
    G.middleRows(offset + static_cast<Eigen::Index>(e) * S, S) +=
        coef * stacked.middleCols(static_cast<Eigen::Index>(e) * kActionDim, kActionDim);
}

// Loss with per-term weights (full, high-only, low-only); the joint
// objective uses (1/3, 1/3, 1/3) and finetuning (0, 1, 0). Processes rows in
// blocks so full-dataset evaluations stay within a few MB of scratch.
double weighted_bc_eval(const Eigen::MatrixXd& W, const TrainBatch& batch,
                        double ridge, const StateFeaturizer& feat,
                        const Eigen::Vector3d& wts, Eigen::MatrixXd* grad,
                        Eigen::Vector3d* terms) {
  const int S = feat.state_dim();
  const int E = feat.config().embedding.dim;
  if (W.rows() != feat.dim() || W.cols() != kActionDim)
    throw DataError("weight matrix does not match the featurizer");
  const Eigen::Index N = batch.rows();
  if (N == 0) throw DataError("training batch is empty");
  if (batch.sf.cols() != S || batch.high.cols() != E || batch.low.cols() != E ||
      batch.act.cols() != kActionDim || batch.high.rows() != N ||
      batch.low.rows() != N || batch.act.rows() != N)
    throw DataError("training batch blocks disagree on shape");

  const Eigen::MatrixXd Wh = stack_block(W, S, E, S);
  const Eigen::MatrixXd Wl = stack_block(W, S, E, S + E * S);
  Eigen::MatrixXd G0, Gh, Gl;
  if (grad) {
    G0 = Eigen::MatrixXd::Zero(S, kActionDim);
    Gh = Eigen::MatrixXd::Zero(S, static_cast<Eigen::Index>(E) * kActionDim);
    Gl = Eigen::MatrixXd::Zero(S, static_cast<Eigen::Index>(E) * kActionDim);
  }
  Eigen::Vector3d sums = Eigen::Vector3d::Zero();

  constexpr Eigen::Index kBlock = 4096;
  Eigen::MatrixXd U;
  for (Eigen::Index lo = 0; lo < N; lo += kBlock) {
    const Eigen::Index B = std::min(kBlock, N - lo);
    const auto SF = batch.sf.middleRows(lo, B);
    const auto EH = batch.high.middleRows(lo, B);
    const auto EL = batch.low.middleRows(lo, B);
    const auto A = batch.act.middleRows(lo, B);

    Eigen::MatrixXd Z0 = SF * W.topRows(S);
    Eigen::MatrixXd TH = SF * Wh;
    Eigen::MatrixXd TL = SF * Wl;
    Eigen::MatrixXd ZH = Eigen::MatrixXd::Zero(B, kActionDim);
    Eigen::MatrixXd ZL = Eigen::MatrixXd::Zero(B, kActionDim);
    for (int e = 0; e < E; ++e) {
      const Eigen::Index col = static_cast<Eigen::Index>(e) * kActionDim;
      ZH.noalias() += EH.col(e).asDiagonal() * TH.middleCols(col, kActionDim);
      ZL.noalias() += EL.col(e).asDiagonal() * TL.middleCols(col, kActionDim);
    }

    auto squash = [](const Eigen::MatrixXd& Z) {
      return (1.0 / (1.0 + (-Z.array()).exp())).matrix().eval();
    };
    const Eigen::MatrixXd Yhl = squash(Z0 + ZH + ZL);
    const Eigen::MatrixXd Yh0 = squash(Z0 + ZH);
    const Eigen::MatrixXd Y0l = squash(Z0 + ZL);
    sums[0] += (Yhl - A).squaredNorm();
    sums[1] += (Yh0 - A).squaredNorm();
    sums[2] += (Y0l - A).squaredNorm();

    if (grad) {
      auto resid = [&](const Eigen::MatrixXd& Y) {
        return ((Y - A).array() * Y.array() * (1.0 - Y.array())).matrix().eval();
      };
      const Eigen::MatrixXd Rhl = resid(Yhl);
      const Eigen::MatrixXd Rh0 = resid(Yh0);
      const Eigen::MatrixXd R0l = resid(Y0l);
      const Eigen::MatrixXd R0 = wts[0] * Rhl + wts[1] * Rh0 + wts[2] * R0l;
      const Eigen::MatrixXd Rh = wts[0] * Rhl + wts[1] * Rh0;
      const Eigen::MatrixXd Rl = wts[0] * Rhl + wts[2] * R0l;
      G0.noalias() += SF.transpose() * R0;
      U.resize(B, static_cast<Eigen::Index>(E) * kActionDim);
      for (int e = 0; e < E; ++e)
        U.middleCols(static_cast<Eigen::Index>(e) * kActionDim, kActionDim) =
            EH.col(e).asDiagonal() * Rh;
      Gh.noalias() += SF.transpose() * U;
      for (int e = 0; e < E; ++e)
        U.middleCols(static_cast<Eigen::Index>(e) * kActionDim, kActionDim) =
            EL.col(e).asDiagonal() * Rl;
      Gl.noalias() += SF.transpose() * U;
    }
  }

  const double inv = 1.0 / static_cast<double>(N);
  const Eigen::Vector3d means = sums * inv;
  if (terms) *terms = means;
  if (grad) {
    grad->setZero(W.rows(), kActionDim);
    grad->topRows(S) = (2.0 * inv) * G0;
    unstack_add(Gh, 2.0 * inv, S, E, S, *grad);
    unstack_add(Gl, 2.0 * inv, S, E, S + E * S, *grad);
    *grad += 2.0 * ridge * W;
  }
  return wts.dot(means) + ridge * W.squaredNorm();
}

struct AdamState {
  Eigen::MatrixXd m, v;
  int t = 0;
};

void adam_step(Eigen::MatrixXd& W, const Eigen::MatrixXd& G, AdamState& st,
               double lr, double b1, double b2, double eps) {
  if (st.m.size() == 0) {
    st.m = Eigen::MatrixXd::Zero(W.rows(), W.cols());
    st.v = st.m;
  }
  st.t += 1;
  st.m = b1 * st.m + (1.0 - b1) * G;
  st.v = b2 * st.v + (1.0 - b2) * G.cwiseProduct(G);
  const double c1 = 1.0 - std::pow(b1, st.t);
  const double c2 = 1.0 - std::pow(b2, st.t);
  W.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + eps);
}

void run_adam(Eigen::MatrixXd& W, const TrainBatch& full, const StateFeaturizer& feat,
              const Eigen::Vector3d& wts, int steps, int batch, double lr,
              double ridge, double b1, double b2, double eps, std::uint64_t seed,
              std::vector<double>* curve) {
  const Eigen::Index N = full.rows();
  if (N == 0) throw DataError("cannot train on an empty dataset");
  Rng rng = derive_stream(seed, "policy-train");
  AdamState st;
  TrainBatch mb;
  const Eigen::Index B = std::min<Eigen::Index>(batch, N);
  mb.sf.resize(B, full.sf.cols());
  mb.high.resize(B, full.high.cols());
  mb.low.resize(B, full.low.cols());
  mb.act.resize(B, full.act.cols());
  Eigen::MatrixXd G;
  for (int step = 0; step < steps; ++step) {
    for (Eigen::Index i = 0; i < B; ++i) {
      const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(N)));
      mb.sf.row(i) = full.sf.row(r);
      mb.high.row(i) = full.high.row(r);
      mb.low.row(i) = full.low.row(r);
      mb.act.row(i) = full.act.row(r);
    }
    const double loss = weighted_bc_eval(W, mb, ridge, feat, wts, &G, nullptr);
    if (curve) curve->push_back(loss);
    adam_step(W, G, st, lr, b1, b2, eps);
  }
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

PolicyModel::PolicyModel(FeaturizerConfig cfg)
    : feat_(std::move(cfg)),
      W_(Eigen::MatrixXd::Zero(feat_.dim(), kActionDim)) {}

Eigen::VectorXd PolicyModel::embed(const std::optional<std::string>& text) const {
  if (!text) return Eigen::VectorXd::Zero(feat_.config().embedding.dim);
  return embed_instruction(*text, feat_.config().embedding);
}

Action PolicyModel::predict(const State& s, const std::optional<std::string>& high,
                            const std::optional<std::string>& low) const {
  return ConditionedPredictor(*this, high, low).predict(s);
}

Action PolicyModel::predict_embedded(const Eigen::VectorXd& sf,
                                     const Eigen::VectorXd& cond) const {
  return ConditionedPredictor(*this, cond).predict_features(sf);
}

ConditionedPredictor::ConditionedPredictor(const PolicyModel& model,
                                           const std::optional<std::string>& high,
                                           const std::optional<std::string>& low)
    : ConditionedPredictor(
          model, model.featurizer().conditioning(model.embed(high), model.embed(low))) {}

ConditionedPredictor::ConditionedPredictor(const PolicyModel& model,
                                           const Eigen::VectorXd& cond)
    : feat_(&model.featurizer()), M_(contract_weights(model, cond)) {}

Action ConditionedPredictor::predict(const State& s) const {
  return predict_features(feat_->state_features(s));
}

Action ConditionedPredictor::predict_features(const Eigen::VectorXd& sf) const {
  if (sf.size() != feat_->state_dim())
    throw DataError("state features have the wrong dimension");
  return squash_clamp(M_ * sf);
}

TrainBatch assemble_batch(const Dataset& data, const StateFeaturizer& feat) {
  std::vector<std::string> missing;
  Eigen::Index rows = 0;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const Trajectory& t = data.trajectories[i];
    if (t.low_labels.empty() || t.high_labels.empty())
      missing.push_back(std::to_string(i) + " (" + t.instruction + ")");
    rows += t.length();
  }
  if (!missing.empty())
    throw DataError("trajectories missing chunk labels: " + join(missing, ", ") +
                    "; run the augmenter first");

  const EmbeddingConfig& ecfg = feat.config().embedding;
  std::unordered_map<std::string, Eigen::VectorXd> cache;
  auto embed_cached = [&](const std::string& text) -> const Eigen::VectorXd& {
    auto it = cache.find(text);
    if (it == cache.end()) it = cache.emplace(text, embed_instruction(text, ecfg)).first;
    return it->second;
  };

  TrainBatch b;
  b.sf.resize(rows, feat.state_dim());
  b.high.resize(rows, ecfg.dim);
  b.low.resize(rows, ecfg.dim);
  b.act.resize(rows, kActionDim);
  Eigen::Index r = 0;
  for (const Trajectory& traj : data.trajectories) {
    for (int t = 0; t < traj.length(); ++t) {
      const int chunk = t / kChunkLen;
      b.sf.row(r) = feat.state_features(traj.steps[t].state);
      b.high.row(r) = embed_cached(traj.high_labels[chunk]);
      b.low.row(r) = embed_cached(traj.low_labels[chunk]);
      b.act.row(r) = traj.steps[t].action;
      ++r;
    }
  }
  return b;
}

TrainBatch assemble_instruction_batch(const Dataset& data, const StateFeaturizer& feat) {
  const EmbeddingConfig& ecfg = feat.config().embedding;
  Eigen::Index rows = 0;
  for (const Trajectory& t : data.trajectories) rows += t.length();
  TrainBatch b;
  b.sf.resize(rows, feat.state_dim());
  b.high.resize(rows, ecfg.dim);
  b.low = Eigen::MatrixXd::Zero(rows, ecfg.dim);
  b.act.resize(rows, kActionDim);
  Eigen::Index r = 0;
  for (const Trajectory& traj : data.trajectories) {
    const Eigen::VectorXd emb = embed_instruction(traj.instruction, ecfg);
    for (int t = 0; t < traj.length(); ++t) {
      b.sf.row(r) = feat.state_features(traj.steps[t].state);
      b.high.row(r) = emb;
      b.act.row(r) = traj.steps[t].action;
      ++r;
    }
  }
  return b;
}

double masked_bc_loss(const Eigen::MatrixXd& W, const TrainBatch& batch,
                      double ridge, const StateFeaturizer& feat,
                      Eigen::Vector3d* terms) {
  return weighted_bc_eval(W, batch, ridge, feat, Eigen::Vector3d::Constant(1.0 / 3.0),
                          nullptr, terms);
}

Eigen::MatrixXd masked_bc_grad(const Eigen::MatrixXd& W, const TrainBatch& batch,
                               double ridge, const StateFeaturizer& feat) {
  Eigen::MatrixXd G;
  weighted_bc_eval(W, batch, ridge, feat, Eigen::Vector3d::Constant(1.0 / 3.0), &G,
                   nullptr);
  return G;
}

PolicyModel train_masked_bc(const Dataset& data, const FeaturizerConfig& feat,
                            const TrainConfig& cfg, TrainReport* report) {
  PolicyModel model(feat);
  const TrainBatch full = assemble_batch(data, model.featurizer());
  std::vector<double> curve;
  run_adam(model.weights(), full, model.featurizer(),
           Eigen::Vector3d::Constant(1.0 / 3.0), cfg.steps, cfg.batch, cfg.lr,
           cfg.ridge, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.seed, &curve);
  if (report) {
    report->minibatch_loss = std::move(curve);
    report->final_loss = masked_bc_loss(model.weights(), full, cfg.ridge,
                                        model.featurizer(), &report->final_terms);
  }
  return model;
}

PolicyModel finetune_baseline(PolicyModel model, const Dataset& target,
                              const FinetuneConfig& cfg, TrainReport* report) {
  const Eigen::Vector3d wts(0.0, 1.0, 0.0);
  const TrainBatch full = assemble_instruction_batch(target, model.featurizer());
  std::vector<double> curve;
  if (cfg.steps > 0)
    run_adam(model.weights(), full, model.featurizer(), wts, cfg.steps, cfg.batch,
             cfg.lr, cfg.ridge, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.seed, &curve);
  if (report) {
    report->minibatch_loss = std::move(curve);
    report->final_loss = weighted_bc_eval(model.weights(), full, cfg.ridge,
                                          model.featurizer(), wts, nullptr,
                                          &report->final_terms);
  }
  return model;
}

NearestNeighborPolicy::NearestNeighborPolicy(const Dataset& demos,
                                             const StateFeaturizer& feat)
    : feat_(feat) {
  Eigen::Index rows = 0;
  for (const Trajectory& t : demos.trajectories) rows += t.length();
  if (rows == 0) throw DataError("nearest-neighbor policy needs at least one demo step");
  sf_.resize(rows, feat_.state_dim());
  act_.resize(rows, kActionDim);
  origin_.reserve(static_cast<std::size_t>(rows));
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < demos.trajectories.size(); ++i) {
    const Trajectory& traj = demos.trajectories[i];
    for (int t = 0; t < traj.length(); ++t) {
      sf_.row(r) = feat_.state_features(traj.steps[t].state);
      act_.row(r) = traj.steps[t].action;
      origin_.emplace_back(static_cast<int>(i), t);
      ++r;
    }
  }
}

std::pair<int, int> NearestNeighborPolicy::nearest(const State& s) const {
  const Eigen::VectorXd f = feat_.state_features(s);
  const Eigen::VectorXd d = (sf_.rowwise() - f.transpose()).rowwise().squaredNorm();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < d.size(); ++i)
    if (d[i] < d[best]) best = i;
  return origin_[static_cast<std::size_t>(best)];
}

Action NearestNeighborPolicy::action(const State& s) const {
  const Eigen::VectorXd f = feat_.state_features(s);
  const Eigen::VectorXd d = (sf_.rowwise() - f.transpose()).rowwise().squaredNorm();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < d.size(); ++i)
    if (d[i] < d[best]) best = i;
  return act_.row(best);
}

void save_policy(const PolicyModel& model, const std::string& path) {
  const FeaturizerConfig& cfg = model.config();
  json j;
  j["format"] = "palo.policy";
  j["version"] = 1;
  j["action_dim"] = kActionDim;
  j["embedding"] = {{"dim", cfg.embedding.dim}, {"salt", cfg.embedding.salt}};
  j["objects"] = cfg.objects;
  j["destinations"] = cfg.destinations;
  json rows = json::array();
  for (Eigen::Index r = 0; r < model.weights().rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < kActionDim; ++c) row.push_back(model.weights()(r, c));
    rows.push_back(std::move(row));
  }
  j["weights"] = std::move(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open policy checkpoint for writing: " + path);
  out << j.dump() << "\n";
  if (!out) throw DataError("failed writing policy checkpoint: " + path);
}

PolicyModel load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open policy checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw DataError("policy checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "palo.policy")
      throw DataError("not a policy checkpoint");
    if (j.at("version").get<int>() != 1)
      throw DataError("unsupported checkpoint version");
    if (j.at("action_dim").get<int>() != kActionDim)
      throw DataError("checkpoint action_dim mismatch");
    FeaturizerConfig cfg;
    cfg.embedding.dim = j.at("embedding").at("dim").get<int>();
    cfg.embedding.salt = j.at("embedding").at("salt").get<std::uint64_t>();
    cfg.objects = j.at("objects").get<std::vector<std::string>>();
    cfg.destinations = j.at("destinations").get<std::vector<std::string>>();
    PolicyModel model(std::move(cfg));
    const json& rows = j.at("weights");
    if (!rows.is_array() ||
        static_cast<Eigen::Index>(rows.size()) != model.weights().rows())
      throw DataError("checkpoint weight rows mismatch");
    for (Eigen::Index r = 0; r < model.weights().rows(); ++r) {
      const json& row = rows.at(static_cast<std::size_t>(r));
      if (!row.is_array() || static_cast<int>(row.size()) != kActionDim)
        throw DataError("checkpoint weight row has wrong arity");
      for (int c = 0; c < kActionDim; ++c)
        model.weights()(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError("policy checkpoint " + path + ": " + e.what());
  }
}

}  // namespace palo
