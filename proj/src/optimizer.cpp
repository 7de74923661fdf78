#include "palo/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "palo/grammar.hpp"

namespace palo {

namespace {

// Block j (1-based) of m over a segment starting at `lo` with `seg_len`
// steps. Blocks tile the segment; when seg_len < m some come out empty
// (hi < lo) and contribute nothing.
struct Block {
  int lo;
  int hi;
};

Block block_bounds(int lo, int seg_len, int j, int m) {
  return {lo + (j - 1) * seg_len / m, lo + j * seg_len / m - 1};
}

// Low-level conditioning per block of one subtask: the cost-bearing skills in
// order, or a single masked slot when none bear cost, so every segment is
// still accounted against the demo.
std::vector<std::optional<std::string>> block_lows(const Subtask& st,
                                                   bool include_neutral) {
  std::vector<std::optional<std::string>> lows;
  for (const auto& sk : st.skills) {
    if (bears_cost(parse_skill(sk), include_neutral)) lows.push_back(sk);
  }
  if (lows.empty()) lows.push_back(std::nullopt);
  return lows;
}

double squared_error(const Action& pred, const Action& label) {
  double e = 0.0;
  for (int d = 0; d < kActionDim; ++d) {
    const double diff = pred[d] - label[d];
    e += diff * diff;
  }
  return e;
}

void check_partition_fits(const Partition& u, int K, int length) {
  u.validate();
  if (u.K() != K) {
    throw DataError("partition has " + std::to_string(u.K()) +
                    " segments but the decomposition has " +
                    std::to_string(K) + " subtasks");
  }
  if (u.horizon < length) {
    throw DataError("partition horizon " + std::to_string(u.horizon) +
                    " does not cover a trajectory of length " +
                    std::to_string(length));
  }
}

}  // namespace

Partition sample_partition(int horizon, int K, Rng& rng) {
  if (horizon < 1) throw UsageError("partition horizon must be positive");
  if (K < 1 || K > horizon) {
    throw UsageError("cannot split " + std::to_string(horizon) +
                     " steps into " + std::to_string(K) + " segments");
  }
  // Floyd's subset sampling: K-1 distinct cuts from {1..horizon-1}, uniform
  // over subsets, bounded number of draws.
  Partition u;
  u.horizon = horizon;
  const int n = horizon - 1;
  const int m = K - 1;
  for (int i = n - m + 1; i <= n; ++i) {
    const int t = rng.below_int(i) + 1;
    if (std::find(u.cuts.begin(), u.cuts.end(), t) != u.cuts.end()) {
      u.cuts.push_back(i);
    } else {
      u.cuts.push_back(t);
    }
  }
  std::sort(u.cuts.begin(), u.cuts.end());
  return u;
}

std::vector<Partition> enumerate_partitions(int horizon, int K) {
  const std::uint64_t total = count_partitions(horizon, K);
  std::vector<Partition> out;
  out.reserve(static_cast<std::size_t>(total));
  const int m = K - 1;
  std::vector<int> cuts(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) cuts[static_cast<std::size_t>(j)] = j + 1;
  for (;;) {
    Partition u;
    u.horizon = horizon;
    u.cuts = cuts;
    out.push_back(std::move(u));
    // Next combination of m values from {1..horizon-1}, lexicographic.
    int j = m - 1;
    while (j >= 0 && cuts[static_cast<std::size_t>(j)] == horizon - m + j) --j;
    if (j < 0) break;
    ++cuts[static_cast<std::size_t>(j)];
    for (int l = j + 1; l < m; ++l) {
      cuts[static_cast<std::size_t>(l)] = cuts[static_cast<std::size_t>(l - 1)] + 1;
    }
  }
  return out;
}

std::uint64_t count_partitions(int horizon, int K, std::uint64_t limit) {
  if (horizon < 1) throw UsageError("partition horizon must be positive");
  if (K < 1) throw UsageError("segment count must be positive");
  if (K > horizon) return 0;
  const std::uint64_t n = static_cast<std::uint64_t>(horizon - 1);
  const std::uint64_t k = static_cast<std::uint64_t>(K - 1);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t factor = n - k + i;
    if (r > std::numeric_limits<std::uint64_t>::max() / factor) {
      throw DataError("partition count overflows for horizon " +
                      std::to_string(horizon) + ", K " + std::to_string(K));
    }
    r = r * factor / i;  // exact: r always holds C(n-k+i, i) after this step
  }
  if (r > limit) {
    throw DataError("exhaustive partition set has " + std::to_string(r) +
                    " members, above the limit of " + std::to_string(limit) +
                    "; use sampling instead");
  }
  return r;
}

int subtask_index(int t, const Partition& u) {
  if (t < 1 || t > u.horizon) {
    throw DataError("timestep " + std::to_string(t) +
                    " outside horizon 1.." + std::to_string(u.horizon));
  }
  const auto it = std::lower_bound(u.cuts.begin(), u.cuts.end(), t);
  return static_cast<int>(it - u.cuts.begin()) + 1;
}

Partition fixed_times_partition(int horizon, int K) {
  if (K < 1 || K > horizon) {
    throw UsageError("cannot split " + std::to_string(horizon) +
                     " steps into " + std::to_string(K) + " equal segments");
  }
  Partition u;
  u.horizon = horizon;
  for (int l = 1; l < K; ++l) u.cuts.push_back(l * horizon / K);
  u.validate();
  return u;
}

std::vector<std::pair<std::string, std::string>> schedule_pairs(
    const Decomposition& d, bool include_neutral) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& st : d.subtasks) {
    for (const auto& sk : st.skills) {
      if (bears_cost(parse_skill(sk), include_neutral)) {
        pairs.emplace_back(st.high, sk);
      }
    }
  }
  return pairs;
}

double cost(const Decomposition& c, const Partition& u, const Trajectory& traj,
            const PolicyModel& model, bool include_neutral) {
  validate_decomposition(c);
  const int L = traj.length();
  if (L < 1) throw DataError("cannot cost an empty trajectory");
  check_partition_fits(u, c.K(), L);
  double total = 0.0;
  for (int k = 1; k <= u.K(); ++k) {
    const Subtask& st = c.subtasks[static_cast<std::size_t>(k - 1)];
    const auto lows = block_lows(st, include_neutral);
    const int lo = u.seg_begin(k);
    const int seg_len = u.seg_end(k) - lo + 1;
    const int m = static_cast<int>(lows.size());
    for (int j = 1; j <= m; ++j) {
      const Block b = block_bounds(lo, seg_len, j, m);
      if (b.lo > L) continue;
      const ConditionedPredictor pred(model, st.high,
                                      lows[static_cast<std::size_t>(j - 1)]);
      for (int t = b.lo; t <= std::min(b.hi, L); ++t) {
        const Step& step = traj.steps[static_cast<std::size_t>(t - 1)];
        total += squared_error(pred.predict(step.state), step.action);
      }
    }
  }
  return total;
}

CostTable::CostTable(const Decomposition& c, const Trajectory& traj,
                     const PolicyModel& model, bool include_neutral) {
  validate_decomposition(c);
  length_ = traj.length();
  if (length_ < 1) throw DataError("cannot cost an empty trajectory");

  std::map<std::pair<std::string, std::string>, int> row_of;
  std::vector<std::optional<std::string>> row_low;
  std::vector<std::string> row_high;
  block_rows_.resize(c.subtasks.size());
  for (std::size_t k = 0; k < c.subtasks.size(); ++k) {
    const Subtask& st = c.subtasks[k];
    for (const auto& low : block_lows(st, include_neutral)) {
      const std::pair<std::string, std::string> key{st.high,
                                                    low.value_or("")};
      auto it = row_of.find(key);
      if (it == row_of.end()) {
        it = row_of.emplace(key, static_cast<int>(row_high.size())).first;
        row_high.push_back(st.high);
        row_low.push_back(low);
      }
      block_rows_[k].push_back(it->second);
    }
  }

  const StateFeaturizer& feat = model.featurizer();
  Eigen::MatrixXd sf(length_, feat.state_dim());
  for (int t = 0; t < length_; ++t) {
    sf.row(t) = feat.state_features(traj.steps[static_cast<std::size_t>(t)].state);
  }

  prefix_.resize(static_cast<Eigen::Index>(row_high.size()), length_ + 1);
  prefix_.col(0).setZero();
  for (std::size_t r = 0; r < row_high.size(); ++r) {
    const ConditionedPredictor pred(model, row_high[r], row_low[r]);
    for (int t = 0; t < length_; ++t) {
      const Step& step = traj.steps[static_cast<std::size_t>(t)];
      const double e = squared_error(pred.predict_features(sf.row(t)), step.action);
      prefix_(static_cast<Eigen::Index>(r), t + 1) =
          prefix_(static_cast<Eigen::Index>(r), t) + e;
    }
  }
}

double CostTable::eval(const Partition& u) const {
  check_partition_fits(u, static_cast<int>(block_rows_.size()), length_);
  double total = 0.0;
  for (int k = 1; k <= u.K(); ++k) {
    const auto& rows = block_rows_[static_cast<std::size_t>(k - 1)];
    const int lo = u.seg_begin(k);
    const int seg_len = u.seg_end(k) - lo + 1;
    const int m = static_cast<int>(rows.size());
    for (int j = 1; j <= m; ++j) {
      const Block b = block_bounds(lo, seg_len, j, m);
      const int hi = std::min(b.hi, length_);
      const int pre = std::min(b.lo - 1, length_);
      if (hi > pre) {
        total += prefix_(rows[static_cast<std::size_t>(j - 1)], hi) -
                 prefix_(rows[static_cast<std::size_t>(j - 1)], pre);
      }
    }
  }
  return total;
}

std::string to_string(AdaptMode m) {
  switch (m) {
    case AdaptMode::kFull: return "full";
    case AdaptMode::kFixedTimes: return "fixed_times";
    case AdaptMode::kSinglePlan: return "single_plan";
    case AdaptMode::kMaskHigh: return "mask_high";
    case AdaptMode::kMaskLow: return "mask_low";
  }
  throw UsageError("unknown adaptation mode");
}

AdaptMode adapt_mode_from_string(const std::string& s) {
  if (s == "full") return AdaptMode::kFull;
  if (s == "fixed_times") return AdaptMode::kFixedTimes;
  if (s == "single_plan") return AdaptMode::kSinglePlan;
  if (s == "mask_high") return AdaptMode::kMaskHigh;
  if (s == "mask_low") return AdaptMode::kMaskLow;
  throw UsageError("unknown adaptation mode '" + s +
                   "' (expected full, fixed_times, single_plan, mask_high, "
                   "or mask_low)");
}

void AdaptConfig::validate() const {
  if (n_samples < 1) throw UsageError("n_samples must be positive");
  if (workers < 0) throw UsageError("workers must be nonnegative");
}

AdaptationResult adapt(const ProposalBatch& batch, const Dataset& target,
                       const PolicyModel& model, const AdaptConfig& cfg) {
  cfg.validate();
  if (batch.candidates.empty()) {
    throw DataError("adaptation needs at least one candidate decomposition");
  }
  for (const auto& c : batch.candidates) validate_decomposition(c);
  target.validate();
  if (target.trajectories.empty()) {
    throw DataError("adaptation needs at least one demonstration");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const int M = static_cast<int>(batch.candidates.size());
  const int n = static_cast<int>(target.trajectories.size());
  for (int i = 0; i < M; ++i) {
    const int K = batch.candidates[static_cast<std::size_t>(i)].K();
    for (int j = 0; j < n; ++j) {
      const int L = target.trajectories[static_cast<std::size_t>(j)].length();
      if (K > L) {
        throw DataError("candidate " + std::to_string(i) + " has " +
                        std::to_string(K) + " subtasks but demo " +
                        std::to_string(j) + " only " + std::to_string(L) +
                        " steps");
      }
    }
  }

  const bool sampling =
      cfg.mode != AdaptMode::kFixedTimes && !cfg.exhaustive;

  // Shared pools are drawn up front so the parallel section stays read-only.
  std::map<std::pair<int, int>, std::vector<Partition>> pools;
  if (cfg.shared_partition_pool && sampling) {
    for (int i = 0; i < M; ++i) {
      const int K = batch.candidates[static_cast<std::size_t>(i)].K();
      for (int j = 0; j < n; ++j) {
        const int L = target.trajectories[static_cast<std::size_t>(j)].length();
        const std::pair<int, int> key{L, K};
        if (pools.count(key)) continue;
        Rng rng = derive_stream(cfg.seed, "partition-pool", L, K);
        auto& pool = pools[key];
        pool.reserve(static_cast<std::size_t>(cfg.n_samples));
        for (int s = 0; s < cfg.n_samples; ++s) {
          pool.push_back(sample_partition(L, K, rng));
        }
      }
    }
  }

  struct Cell {
    double cost = std::numeric_limits<double>::infinity();
    Partition best;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(M) * static_cast<std::size_t>(n));

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mu;
  auto work = [&]() {
    for (;;) {
      const int cell = next.fetch_add(1);
      if (cell >= M * n || failed.load()) break;
      const int i = cell / n;
      const int j = cell % n;
      try {
        const Decomposition& c = batch.candidates[static_cast<std::size_t>(i)];
        const Trajectory& traj = target.trajectories[static_cast<std::size_t>(j)];
        const int L = traj.length();
        const int K = c.K();
        const CostTable table(c, traj, model, cfg.include_neutral);
        Cell& out = cells[static_cast<std::size_t>(cell)];
        auto consider = [&](const Partition& u) {
          const double e = table.eval(u);
          if (e < out.cost) {
            out.cost = e;
            out.best = u;
          }
        };
        if (cfg.mode == AdaptMode::kFixedTimes) {
          consider(fixed_times_partition(L, K));
        } else if (cfg.exhaustive) {
          for (const Partition& u : enumerate_partitions(L, K)) consider(u);
        } else if (cfg.shared_partition_pool) {
          for (const Partition& u : pools.at({L, K})) consider(u);
        } else {
          Rng rng = derive_stream(cfg.seed, "partition-samples", i, j);
          for (int s = 0; s < cfg.n_samples; ++s) {
            consider(sample_partition(L, K, rng));
          }
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };

  int workers = cfg.workers > 0
                    ? cfg.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, M * n));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (failed.load()) throw DataError("adaptation failed: " + first_error);

  AdaptationResult r;
  r.mode = cfg.mode;
  r.n_samples = cfg.exhaustive ? 0 : cfg.n_samples;
  r.seed = cfg.seed;
  r.provenance = batch.provenance;
  r.candidate_costs.resize(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      sum += cells[static_cast<std::size_t>(i * n + j)].cost;
    }
    r.candidate_costs[static_cast<std::size_t>(i)] = sum;
    if (r.chosen_index < 0 || sum < r.total_cost) {
      r.chosen_index = i;
      r.total_cost = sum;
    }
  }
  r.chosen = batch.candidates[static_cast<std::size_t>(r.chosen_index)];
  r.fits.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const Cell& cell = cells[static_cast<std::size_t>(r.chosen_index * n + j)];
    TrajectoryFit fit;
    fit.horizon = target.trajectories[static_cast<std::size_t>(j)].length();
    fit.best = cell.best;
    fit.cost = cell.cost;
    r.fits.push_back(std::move(fit));
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return r;
}

PolicyFn adapted_policy(const AdaptationResult& result,
                        const PolicyModel& model) {
  const auto raw = schedule_pairs(result.chosen);
  if (raw.empty()) {
    throw DataError("chosen decomposition has no executable skills");
  }
  const bool mask_high = result.mode == AdaptMode::kMaskHigh;
  const bool mask_low = result.mode == AdaptMode::kMaskLow;
  auto preds = std::make_shared<std::vector<ConditionedPredictor>>();
  preds->reserve(raw.size());
  for (const auto& [high, low] : raw) {
    preds->emplace_back(
        model, mask_high ? std::optional<std::string>{} : high,
        mask_low ? std::optional<std::string>{} : low);
  }
  const int last = static_cast<int>(preds->size()) - 1;
  return [preds, last](const State& s, int t) {
    const int idx = std::clamp(t / kExecChunkLen, 0, last);
    return (*preds)[static_cast<std::size_t>(idx)].predict(s);
  };
}

PolicyFn instruction_policy(const PolicyModel& model,
                            const std::string& instruction) {
  auto pred = std::make_shared<ConditionedPredictor>(model, instruction,
                                                     std::nullopt);
  return [pred](const State& s, int) { return pred->predict(s); };
}

std::string format_adaptation_report(const AdaptationResult& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "adaptation report\n";
  os << "mode: " << to_string(r.mode) << "\n";
  os << "candidates: " << r.candidate_costs.size();
  if (!r.provenance.empty()) os << " (" << r.provenance << ")";
  os << "\n";
  if (r.n_samples > 0) {
    os << "partition samples per candidate-demo: " << r.n_samples << " (seed "
       << r.seed << ")\n";
  } else {
    os << "partition search: exhaustive (seed " << r.seed << ")\n";
  }
  os << "chosen: index " << r.chosen_index << ", total cost " << r.total_cost
     << "\n";
  for (std::size_t k = 0; k < r.chosen.subtasks.size(); ++k) {
    const Subtask& st = r.chosen.subtasks[k];
    os << "  subtask " << (k + 1) << ": \"" << st.high << "\" ->";
    for (std::size_t s = 0; s < st.skills.size(); ++s) {
      os << (s == 0 ? " " : "; ") << st.skills[s];
    }
    os << "\n";
  }
  os << "candidate costs:\n";
  for (std::size_t i = 0; i < r.candidate_costs.size(); ++i) {
    os << "  [" << i << "] " << r.candidate_costs[i] << "\n";
  }
  os << "per-demo fit of the chosen candidate:\n";
  for (std::size_t j = 0; j < r.fits.size(); ++j) {
    const TrajectoryFit& f = r.fits[j];
    os << "  demo " << j << ": horizon " << f.horizon << ", cuts";
    if (f.best.cuts.empty()) os << " (none)";
    for (const int c : f.best.cuts) os << " " << c;
    os << ", cost " << f.cost << "\n";
  }
  char wall[64];
  std::snprintf(wall, sizeof(wall), "wall clock: %.3f s\n", r.wall_seconds);
  os << wall;
  return os.str();
}

void save_adaptation_result(const AdaptationResult& r,
                            const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "palo.adaptation";
  j["version"] = 1;
  j["mode"] = to_string(r.mode);
  j["chosen_index"] = r.chosen_index;
  j["total_cost"] = r.total_cost;
  j["candidate_costs"] = r.candidate_costs;
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  j["provenance"] = r.provenance;
  j["wall_seconds"] = r.wall_seconds;
  nlohmann::ordered_json subtasks = nlohmann::ordered_json::array();
  for (const auto& st : r.chosen.subtasks) {
    subtasks.push_back({{"high", st.high}, {"skills", st.skills}});
  }
  j["chosen"] = {{"subtasks", std::move(subtasks)}};
  nlohmann::ordered_json fits = nlohmann::ordered_json::array();
  for (const auto& f : r.fits) {
    fits.push_back(
        {{"horizon", f.horizon}, {"cuts", f.best.cuts}, {"cost", f.cost}});
  }
  j["fits"] = std::move(fits);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

AdaptationResult load_adaptation_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  AdaptationResult r;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "palo.adaptation") {
      throw DataError("not an adaptation result: " + path);
    }
    if (j.at("version").get<int>() != 1) {
      throw DataError("unsupported adaptation result version in " + path);
    }
    r.mode = adapt_mode_from_string(j.at("mode").get<std::string>());
    r.chosen_index = j.at("chosen_index").get<int>();
    r.total_cost = j.at("total_cost").get<double>();
    r.candidate_costs = j.at("candidate_costs").get<std::vector<double>>();
    r.n_samples = j.at("n_samples").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.provenance = j.at("provenance").get<std::string>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& st : j.at("chosen").at("subtasks")) {
      Subtask s;
      s.high = st.at("high").get<std::string>();
      s.skills = st.at("skills").get<std::vector<std::string>>();
      r.chosen.subtasks.push_back(std::move(s));
    }
    for (const auto& f : j.at("fits")) {
      TrajectoryFit fit;
      fit.horizon = f.at("horizon").get<int>();
      fit.best.horizon = fit.horizon;
      fit.best.cuts = f.at("cuts").get<std::vector<int>>();
      fit.cost = f.at("cost").get<double>();
      r.fits.push_back(std::move(fit));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed adaptation result " + path + ": " + e.what());
  }
  validate_decomposition(r.chosen);
  return r;
}

}  // namespace palo
