#include "palo/features.hpp"

#include <cmath>

namespace palo {

FeaturizerConfig default_featurizer(const WorldConfig& cfg) {
  FeaturizerConfig f;
  f.objects = object_ids(cfg);
  f.destinations = destination_ids(cfg);
  return f;
}

StateFeaturizer::StateFeaturizer(FeaturizerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.objects.empty()) throw DataError("featurizer needs at least one object");
  state_dim_ = 9 + 9 * static_cast<int>(cfg_.objects.size()) +
               2 * static_cast<int>(cfg_.destinations.size());
}

Eigen::VectorXd StateFeaturizer::state_features(const State& s) const {
  Eigen::VectorXd f(state_dim_);
  int i = 0;
  f[i++] = 1.0;
  f.segment<3>(i) = s.gripper_pos;
  i += 3;
  f.segment<3>(i) = s.gripper_rot;
  i += 3;
  f[i++] = s.gripper_open;
  const double held_any = s.held_object ? 1.0 : 0.0;
  f[i++] = held_any;
  for (const auto& id : cfg_.objects) {
    const auto& pose = s.object(id);
    const Vec3 rel = pose.position - s.gripper_pos;
    const double held_this = (s.held_object && *s.held_object == id) ? 1.0 : 0.0;
    const double d2 = rel.squaredNorm();
    f.segment<3>(i) = rel;
    i += 3;
    f[i++] = held_this;
    f.segment<3>(i) = held_any * rel;
    i += 3;
    f[i++] = d2;
    f[i++] = held_any * d2;
  }
  const double held_yaw = s.held_object ? s.object(*s.held_object).yaw : 0.0;
  for (const auto& id : cfg_.destinations) {
    const double rel_yaw = wrap_angle(held_yaw - s.object(id).yaw);
    f[i++] = held_any * std::sin(rel_yaw);
    f[i++] = held_any * std::cos(rel_yaw);
  }
  return f;
}

Eigen::VectorXd StateFeaturizer::conditioning(const Eigen::VectorXd& high_emb,
                                              const Eigen::VectorXd& low_emb) const {
  const int e = cfg_.embedding.dim;
  if (high_emb.size() != e || low_emb.size() != e)
    throw DataError("conditioning embeddings have the wrong dimension");
  Eigen::VectorXd c(cond_dim());
  c[0] = 1.0;
  c.segment(1, e) = high_emb;
  c.segment(1 + e, e) = low_emb;
  return c;
}

Eigen::VectorXd StateFeaturizer::features(const Eigen::VectorXd& sf,
                                          const Eigen::VectorXd& cond) const {
  if (sf.size() != state_dim() || cond.size() != cond_dim())
    throw DataError("feature blocks have the wrong dimension");
  Eigen::VectorXd phi(dim());
  for (int c = 0; c < cond.size(); ++c)
    phi.segment(c * state_dim(), state_dim()) = cond[c] * sf;
  return phi;
}

}  // namespace palo
