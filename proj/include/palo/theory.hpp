#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "palo/optimizer.hpp"
#include "palo/policy.hpp"
#include "palo/rng.hpp"
#include "palo/rollout.hpp"
#include "palo/tasks.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// Exact two-sided binomial (Clopper-Pearson) bounds at the given confidence.
// k = 0 pins the lower bound to 0, k = n the upper to 1.
double binomial_ci_lower(std::uint64_t successes, std::uint64_t trials,
                         double confidence);
double binomial_ci_upper(std::uint64_t successes, std::uint64_t trials,
                         double confidence);

// Regularized incomplete beta I_x(a, b); exposed for its own tests.
double reg_inc_beta(double a, double b, double x);

// Timesteps assigned the same segment index by both partitions. Requires
// matching horizon and segment count.
int overlap_statistic(const Partition& u, const Partition& v);

// One Monte-Carlo cell of the overlap tail check: the probability that two
// independent uniform partitions overlap on at most eps * H timesteps,
// against the analytic tail exp(-2H(1/K - eps)^2). A violation is flagged
// only when the 99% CI lower bound exceeds the analytic value, so sampling
// noise cannot fail the check.
struct OverlapRow {
  int horizon = 0;
  int segments = 0;
  double epsilon = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t hits = 0;
  double tail = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double bound = 0.0;
  bool violated = false;
};

struct OverlapReport {
  std::vector<OverlapRow> rows;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;

  int violations() const;
};

// Deterministic given (horizon, segments, eps, samples, seed); the grid
// driver calls this per cell, so grid reports merge reproducibly no matter
// how many workers run.
OverlapRow overlap_tail_cell(int horizon, int segments, double eps,
                             std::uint64_t samples, std::uint64_t seed);

// Cross-product grid; epsilon values are given as fractions of 1/K so one
// list serves every K. Cells run on a worker pool.
OverlapReport check_overlap_bound(const std::vector<int>& horizons,
                                  const std::vector<int>& segment_counts,
                                  const std::vector<double>& eps_fractions,
                                  std::uint64_t samples, std::uint64_t seed,
                                  int workers = 0);

std::vector<int> default_overlap_horizons();      // 20 50 100 200
std::vector<int> default_overlap_segments();      // 2..8
std::vector<double> default_overlap_fractions();  // 0 0.25 0.5 0.75

// Evaluation of f(eps) = eps + exp(-2H(1/K - eps)^2) at the closed-form
// candidate eps = 1/K - sqrt(log(N)/(N H K)) and at a fine grid minimum over
// [0, 1/K], against the target 1/K + N^(-2/K). The closed-form candidate
// makes the exponential equal N^(-2/(NK)), not N^(-2/K); both quantities are
// recorded and nothing about their relation is asserted.
struct ExpBoundRow {
  int horizon = 0;
  int segments = 0;
  int n_samples = 0;
  double ansatz_eps = 0.0;
  bool ansatz_in_range = false;
  double ansatz_value = 0.0;
  double grid_min_eps = 0.0;
  double grid_min_value = 0.0;
  double target = 0.0;
  bool ansatz_within = false;
  bool grid_min_within = false;
  double ansatz_exp_term = 0.0;  // N^(-2/(NK))
  double target_exp_term = 0.0;  // N^(-2/K)
};

struct ExpBoundReport {
  std::vector<ExpBoundRow> rows;
  int grid_points = 0;
};

ExpBoundReport check_exp_bound(const std::vector<int>& horizons,
                               const std::vector<int>& segment_counts,
                               const std::vector<int>& sample_counts,
                               int grid_points = 10001);

// Mean over episodes of (1 / (H * sqrt(action_dim))) * sum over the horizon
// of the squared action gap between the two policies, along states visited
// by the reference. The reference comes from a factory because reference
// controllers may be stateful; a fresh one drives each episode, full horizon,
// no early stopping.
using PolicyFactory = std::function<PolicyFn()>;
double regret(const PolicyFn& policy, const PolicyFactory& reference,
              const WorldConfig& cfg, int horizon, int episodes,
              std::uint64_t seed);

// sqrt(action_dim): the largest possible regret when both policies emit
// actions in (0, 1)^action_dim.
double regret_ceiling();

struct EmpiricalRegretConfig {
  bool exhaustive = false;
  int n_samples = 1000;
  std::uint64_t seed = 0;
  bool include_neutral = false;
};

// Mean over demos of the partition-min fit cost, each normalized by
// (length * sqrt(action_dim)). Exhaustive mode enumerates and is guarded by
// count_partitions; sampled mode draws a nested stream per demo, so the
// value is nonincreasing in n_samples for a fixed seed.
double empirical_regret(const Decomposition& c, const Dataset& target,
                        const PolicyModel& model,
                        const EmpiricalRegretConfig& cfg);

// Configuration-only part of the final-bound right-hand side:
// 1/M + 1/K + N^(-2/K) + (sqrt(M) + sqrt(n log(M n))) / n.
double sampling_terms(int proposals, int segments, int demos, int n_samples);

struct TheoremInputs {
  double prior_regret = 0.0;   // measured on the pre-training distribution
  int proposals = 0;           // M
  int segments = 0;            // K of the ground-truth decomposition
  int demos = 0;               // n
  int n_samples = 0;           // N
  double proposer_miss = 0.0;  // 1 - rate the batch contained the truth; a
                               // proxy for the unobservable proposer term
  double lhs = 0.0;            // measured regret of the adapted policy
};

struct TheoremRow {
  std::string task;
  TheoremInputs in;
  double term_m = 0.0;
  double term_k = 0.0;
  double term_n = 0.0;
  double term_mn = 0.0;
  double rhs = 0.0;
  bool within = false;  // lhs <= rhs, the only direction the bound promises
};

TheoremRow account_theorem(const std::string& task, const TheoremInputs& in);

// Normal-approximation Mann-Kendall trend statistic with tie correction;
// negative z means a decreasing trend.
double mann_kendall_z(const std::vector<double>& series);

void write_overlap_csv(const OverlapReport& r, const std::string& path);
void write_exp_bound_csv(const ExpBoundReport& r, const std::string& path);
void write_theorem_csv(const std::vector<TheoremRow>& rows,
                       const std::string& path);

}  // namespace palo
