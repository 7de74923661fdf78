#pragma once

#include "palo/types.hpp"

namespace palo {

// Keeps squashed components representable away from the closed endpoints;
// logit stays finite and round-trips hold for |z| up to ~27.
inline constexpr double kOpenEps = 1e-12;

// Affine-then-logistic squash into the open unit interval. The affine part
// centers at stats.mean (so mean maps to exactly 0.5) and the squash keeps
// every component strictly inside (0,1) regardless of outliers.
Action normalize_action(const Eigen::VectorXd& raw, const NormStats& stats);
Eigen::VectorXd denormalize_action(const Action& a, const NormStats& stats);

std::vector<Action> normalize_actions(const std::vector<Eigen::VectorXd>& raw,
                                      const NormStats& stats);

}  // namespace palo
