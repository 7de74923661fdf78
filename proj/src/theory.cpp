#include "palo/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace palo {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// Smallest x with I_x(a, b) >= p, by bisection; I_x is monotone in x.
double beta_inv(double p, double a, double b) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (reg_inc_beta(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void require_confidence(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw UsageError("confidence must lie in (0, 1)");
  }
}

double overlap_analytic_bound(int horizon, int segments, double eps) {
  const double gap = 1.0 / segments - eps;
  return std::exp(-2.0 * horizon * gap * gap);
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw UsageError("incomplete beta needs positive shape parameters");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double binomial_ci_lower(std::uint64_t successes, std::uint64_t trials,
                         double confidence) {
  require_confidence(confidence);
  if (trials == 0) throw UsageError("binomial CI needs at least one trial");
  if (successes > trials) throw UsageError("successes exceed trials");
  if (successes == 0) return 0.0;
  const double alpha = 1.0 - confidence;
  return beta_inv(alpha / 2.0, static_cast<double>(successes),
                  static_cast<double>(trials - successes + 1));
}

double binomial_ci_upper(std::uint64_t successes, std::uint64_t trials,
                         double confidence) {
  require_confidence(confidence);
  if (trials == 0) throw UsageError("binomial CI needs at least one trial");
  if (successes > trials) throw UsageError("successes exceed trials");
  if (successes == trials) return 1.0;
  const double alpha = 1.0 - confidence;
  return beta_inv(1.0 - alpha / 2.0, static_cast<double>(successes + 1),
                  static_cast<double>(trials - successes));
}

int overlap_statistic(const Partition& u, const Partition& v) {
  u.validate();
  v.validate();
  if (u.horizon != v.horizon) {
    throw DataError("overlap needs matching horizons, got " +
                    std::to_string(u.horizon) + " and " +
                    std::to_string(v.horizon));
  }
  if (u.K() != v.K()) {
    throw DataError("overlap needs matching segment counts, got " +
                    std::to_string(u.K()) + " and " + std::to_string(v.K()));
  }
  int total = 0;
  for (int k = 1; k <= u.K(); ++k) {
    const int lo = std::max(u.seg_begin(k), v.seg_begin(k));
    const int hi = std::min(u.seg_end(k), v.seg_end(k));
    total += std::max(0, hi - lo + 1);
  }
  return total;
}

int OverlapReport::violations() const {
  int n = 0;
  for (const auto& row : rows) {
    if (row.violated) ++n;
  }
  return n;
}

OverlapRow overlap_tail_cell(int horizon, int segments, double eps,
                             std::uint64_t samples, std::uint64_t seed) {
  if (eps < 0.0 || eps > 1.0 / segments) {
    throw UsageError("overlap epsilon must lie in [0, 1/K]");
  }
  if (samples < 10000) {
    throw UsageError("overlap tail needs at least 10000 sample pairs");
  }
  OverlapRow row;
  row.horizon = horizon;
  row.segments = segments;
  row.epsilon = eps;
  row.samples = samples;
  row.bound = overlap_analytic_bound(horizon, segments, eps);
  const std::uint64_t eps_tag =
      (static_cast<std::uint64_t>(segments) << 32) |
      static_cast<std::uint64_t>(std::llround(eps * 1e9));
  Rng rng = derive_stream(seed, "overlap-tail",
                          static_cast<std::uint64_t>(horizon), eps_tag);
  const double threshold = eps * horizon;
  for (std::uint64_t s = 0; s < samples; ++s) {
    const Partition u = sample_partition(horizon, segments, rng);
    const Partition v = sample_partition(horizon, segments, rng);
    if (static_cast<double>(overlap_statistic(u, v)) <= threshold) ++row.hits;
  }
  row.tail = static_cast<double>(row.hits) / static_cast<double>(samples);
  row.ci_lower = binomial_ci_lower(row.hits, samples, 0.99);
  row.ci_upper = binomial_ci_upper(row.hits, samples, 0.99);
  row.violated = row.ci_lower > row.bound;
  return row;
}

OverlapReport check_overlap_bound(const std::vector<int>& horizons,
                                  const std::vector<int>& segment_counts,
                                  const std::vector<double>& eps_fractions,
                                  std::uint64_t samples, std::uint64_t seed,
                                  int workers) {
  if (horizons.empty() || segment_counts.empty() || eps_fractions.empty()) {
    throw UsageError("overlap grid must be nonempty");
  }
  struct CellSpec {
    int horizon;
    int segments;
    double eps;
  };
  std::vector<CellSpec> specs;
  for (const int h : horizons) {
    for (const int k : segment_counts) {
      if (k > h) {
        throw UsageError("overlap grid has K " + std::to_string(k) +
                         " above horizon " + std::to_string(h));
      }
      for (const double f : eps_fractions) {
        specs.push_back({h, k, f / k});
      }
    }
  }

  OverlapReport report;
  report.samples = samples;
  report.seed = seed;
  report.rows.resize(specs.size());

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) break;
      const CellSpec& c = specs[i];
      report.rows[i] =
          overlap_tail_cell(c.horizon, c.segments, c.eps, samples, seed);
    }
  };
  int n_workers = workers > 0
                      ? workers
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min<int>(n_workers,
                                        static_cast<int>(specs.size())));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return report;
}

std::vector<int> default_overlap_horizons() { return {20, 50, 100, 200}; }

std::vector<int> default_overlap_segments() { return {2, 3, 4, 5, 6, 7, 8}; }

std::vector<double> default_overlap_fractions() {
  return {0.0, 0.25, 0.5, 0.75};
}

ExpBoundReport check_exp_bound(const std::vector<int>& horizons,
                               const std::vector<int>& segment_counts,
                               const std::vector<int>& sample_counts,
                               int grid_points) {
  if (horizons.empty() || segment_counts.empty() || sample_counts.empty()) {
    throw UsageError("exp-bound grid must be nonempty");
  }
  if (grid_points < 2) throw UsageError("exp-bound grid needs >= 2 points");
  for (const int n : sample_counts) {
    if (n < 2) throw UsageError("exp-bound check needs N >= 2");
  }
  ExpBoundReport report;
  report.grid_points = grid_points;
  for (const int h : horizons) {
    for (const int k : segment_counts) {
      for (const int n : sample_counts) {
        ExpBoundRow row;
        row.horizon = h;
        row.segments = k;
        row.n_samples = n;
        const double inv_k = 1.0 / k;
        auto f = [&](double eps) {
          const double gap = inv_k - eps;
          return eps + std::exp(-2.0 * h * gap * gap);
        };
        row.ansatz_eps =
            inv_k - std::sqrt(std::log(static_cast<double>(n)) /
                              (static_cast<double>(n) * h * k));
        row.ansatz_in_range = row.ansatz_eps >= 0.0;
        row.ansatz_value = f(row.ansatz_eps);
        row.grid_min_value = std::numeric_limits<double>::infinity();
        for (int g = 0; g < grid_points; ++g) {
          const double eps = inv_k * g / (grid_points - 1);
          const double val = f(eps);
          if (val < row.grid_min_value) {
            row.grid_min_value = val;
            row.grid_min_eps = eps;
          }
        }
        row.target =
            inv_k + std::pow(static_cast<double>(n), -2.0 / k);
        row.ansatz_within = row.ansatz_in_range && row.ansatz_value <= row.target;
        row.grid_min_within = row.grid_min_value <= row.target;
        row.ansatz_exp_term = std::pow(static_cast<double>(n),
                                       -2.0 / (static_cast<double>(n) * k));
        row.target_exp_term = std::pow(static_cast<double>(n), -2.0 / k);
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

double regret(const PolicyFn& policy, const PolicyFactory& reference_factory,
              const WorldConfig& cfg, int horizon, int episodes,
              std::uint64_t seed) {
  if (horizon < 1) throw UsageError("regret horizon must be positive");
  if (episodes < 1) throw UsageError("regret needs at least one episode");
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng = derive_stream(seed, "regret-episode",
                            static_cast<std::uint64_t>(e));
    const PolicyFn reference = reference_factory();
    State s = sample_initial_state(cfg, rng);
    double acc = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const Action ref = reference(s, t);
      const Action pol = policy(s, t);
      for (int d = 0; d < kActionDim; ++d) {
        const double diff = pol[d] - ref[d];
        acc += diff * diff;
      }
      s = step(s, ref, cfg);
    }
    total += acc / (horizon * std::sqrt(static_cast<double>(kActionDim)));
  }
  return total / episodes;
}

double regret_ceiling() {
  return std::sqrt(static_cast<double>(kActionDim));
}

double empirical_regret(const Decomposition& c, const Dataset& target,
                        const PolicyModel& model,
                        const EmpiricalRegretConfig& cfg) {
  if (!cfg.exhaustive && cfg.n_samples < 1) {
    throw UsageError("sampled empirical regret needs n_samples >= 1");
  }
  validate_decomposition(c);
  if (target.trajectories.empty()) {
    throw DataError("empirical regret needs at least one trajectory");
  }
  const double norm = std::sqrt(static_cast<double>(kActionDim));
  double total = 0.0;
  for (std::size_t j = 0; j < target.trajectories.size(); ++j) {
    const Trajectory& traj = target.trajectories[j];
    const int L = traj.length();
    const int K = c.K();
    if (K > L) {
      throw DataError("trajectory " + std::to_string(j) + " has " +
                      std::to_string(L) + " steps, fewer than the " +
                      std::to_string(K) + " subtasks");
    }
    const CostTable table(c, traj, model, cfg.include_neutral);
    double best = std::numeric_limits<double>::infinity();
    if (cfg.exhaustive) {
      for (const Partition& u : enumerate_partitions(L, K)) {
        best = std::min(best, table.eval(u));
      }
    } else {
      Rng rng = derive_stream(cfg.seed, "empirical-regret",
                              static_cast<std::uint64_t>(j));
      for (int s = 0; s < cfg.n_samples; ++s) {
        best = std::min(best, table.eval(sample_partition(L, K, rng)));
      }
    }
    total += best / (L * norm);
  }
  return total / static_cast<double>(target.trajectories.size());
}

double sampling_terms(int proposals, int segments, int demos, int n_samples) {
  if (proposals < 1 || segments < 1 || demos < 1 || n_samples < 2) {
    throw UsageError("sampling terms need M, K, n >= 1 and N >= 2");
  }
  const double m = proposals;
  const double k = segments;
  const double n = demos;
  const double big_n = n_samples;
  return 1.0 / m + 1.0 / k + std::pow(big_n, -2.0 / k) +
         (std::sqrt(m) + std::sqrt(n * std::log(m * n))) / n;
}

TheoremRow account_theorem(const std::string& task, const TheoremInputs& in) {
  if (in.proposals < 1 || in.segments < 1 || in.demos < 1 ||
      in.n_samples < 2) {
    throw UsageError("theorem accounting needs M, K, n >= 1 and N >= 2");
  }
  TheoremRow row;
  row.task = task;
  row.in = in;
  row.term_m = 1.0 / in.proposals;
  row.term_k = 1.0 / in.segments;
  row.term_n = std::pow(static_cast<double>(in.n_samples),
                        -2.0 / in.segments);
  const double m = in.proposals;
  const double n = in.demos;
  row.term_mn = (std::sqrt(m) + std::sqrt(n * std::log(m * n))) / n;
  row.rhs = in.prior_regret + row.term_m + row.term_k + row.term_n +
            row.term_mn + in.proposer_miss;
  row.within = in.lhs <= row.rhs;
  return row;
}

double mann_kendall_z(const std::vector<double>& series) {
  const int n = static_cast<int>(series.size());
  if (n < 2) return 0.0;
  long long s = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double diff = series[static_cast<std::size_t>(j)] -
                          series[static_cast<std::size_t>(i)];
      if (diff > 0.0) ++s;
      if (diff < 0.0) --s;
    }
  }
  // Tie correction over groups of equal values.
  std::vector<double> sorted = series;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && sorted[static_cast<std::size_t>(j)] ==
                        sorted[static_cast<std::size_t>(i)]) {
      ++j;
    }
    const double t = j - i;
    tie_sum += t * (t - 1.0) * (2.0 * t + 5.0);
    i = j;
  }
  const double var =
      (static_cast<double>(n) * (n - 1.0) * (2.0 * n + 5.0) - tie_sum) / 18.0;
  if (var <= 0.0) return 0.0;
  if (s > 0) return (static_cast<double>(s) - 1.0) / std::sqrt(var);
  if (s < 0) return (static_cast<double>(s) + 1.0) / std::sqrt(var);
  return 0.0;
}

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_overlap_csv(const OverlapReport& r, const std::string& path) {
  auto out = open_csv(path);
  out << "horizon,segments,epsilon,samples,hits,tail,ci_lower,ci_upper,"
         "bound,violated\n";
  for (const auto& row : r.rows) {
    out << row.horizon << ',' << row.segments << ',' << fmt(row.epsilon)
        << ',' << row.samples << ',' << row.hits << ',' << fmt(row.tail)
        << ',' << fmt(row.ci_lower) << ',' << fmt(row.ci_upper) << ','
        << fmt(row.bound) << ',' << (row.violated ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

void write_exp_bound_csv(const ExpBoundReport& r, const std::string& path) {
  auto out = open_csv(path);
  out << "horizon,segments,n_samples,ansatz_eps,ansatz_in_range,"
         "ansatz_value,grid_min_eps,grid_min_value,target,ansatz_within,"
         "grid_min_within,ansatz_exp_term,target_exp_term\n";
  for (const auto& row : r.rows) {
    out << row.horizon << ',' << row.segments << ',' << row.n_samples << ','
        << fmt(row.ansatz_eps) << ',' << (row.ansatz_in_range ? 1 : 0) << ','
        << fmt(row.ansatz_value) << ',' << fmt(row.grid_min_eps) << ','
        << fmt(row.grid_min_value) << ',' << fmt(row.target) << ','
        << (row.ansatz_within ? 1 : 0) << ',' << (row.grid_min_within ? 1 : 0)
        << ',' << fmt(row.ansatz_exp_term) << ','
        << fmt(row.target_exp_term) << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

void write_theorem_csv(const std::vector<TheoremRow>& rows,
                       const std::string& path) {
  auto out = open_csv(path);
  out << "task,lhs,prior_regret,term_m,term_k,term_n,term_mn,"
         "proposer_miss_proxy,rhs,within\n";
  for (const auto& row : rows) {
    out << row.task << ',' << fmt(row.in.lhs) << ','
        << fmt(row.in.prior_regret) << ',' << fmt(row.term_m) << ','
        << fmt(row.term_k) << ',' << fmt(row.term_n) << ','
        << fmt(row.term_mn) << ',' << fmt(row.in.proposer_miss) << ','
        << fmt(row.rhs) << ',' << (row.within ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace palo
