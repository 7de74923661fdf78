#include "palo/normalize.hpp"

#include <cmath>

namespace palo {

Action normalize_action(const Eigen::VectorXd& raw, const NormStats& stats) {
  stats.validate();
  if (raw.size() != kActionDim)
    throw DataError("normalize_action: raw action has wrong dimension");
  Action out;
  for (int i = 0; i < kActionDim; ++i) {
    const double z = (raw[i] - stats.mean[i]) / stats.stddev[i];
    double y = 1.0 / (1.0 + std::exp(-z));
    if (y < kOpenEps) y = kOpenEps;
    if (y > 1.0 - kOpenEps) y = 1.0 - kOpenEps;
    out[i] = y;
  }
  return out;
}

Eigen::VectorXd denormalize_action(const Action& a, const NormStats& stats) {
  stats.validate();
  Eigen::VectorXd out(kActionDim);
  for (int i = 0; i < kActionDim; ++i) {
    const double y = a[i];
    if (!(y > 0.0) || !(y < 1.0))
      throw DataError("denormalize_action: components must lie strictly inside (0,1)");
    out[i] = stats.mean[i] + stats.stddev[i] * std::log(y / (1.0 - y));
  }
  return out;
}

std::vector<Action> normalize_actions(const std::vector<Eigen::VectorXd>& raw,
                                      const NormStats& stats) {
  std::vector<Action> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(normalize_action(r, stats));
  return out;
}

}  // namespace palo
