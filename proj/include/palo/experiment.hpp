#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "palo/augmenter.hpp"
#include "palo/optimizer.hpp"
#include "palo/policy.hpp"
#include "palo/tasks.hpp"
#include "palo/theory.hpp"
#include "palo/types.hpp"
#include "palo/world.hpp"

namespace palo {

// Evaluation methods. The adaptation ablations double as methods so one
// result table covers both comparisons.
struct MethodSpec {
  enum class Kind {
    kPalo,         // full adaptation pipeline
    kFinetune,     // instruction-conditioned fine-tuning on the demos
    kNearest,      // nearest-neighbor action lookup over the demos
    kInstruction,  // prior policy conditioned on the raw instruction only
    kAblation,     // adaptation with one knob changed (mode below)
  };
  Kind kind = Kind::kPalo;
  AdaptMode mode = AdaptMode::kFull;  // meaningful for kAblation only
  std::string name;                   // canonical spelling
};

// Accepts: palo, finetune, nearest, instruction, fixed_times, single_plan,
// mask_high, mask_low.
MethodSpec parse_method(const std::string& name);

struct ExperimentSpec {
  std::string name = "bench";
  std::vector<std::string> tasks;  // empty = every benchmark task
  int demos_per_task = 5;
  std::vector<std::string> methods;
  int episodes = 10;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "bench_out";
  int proposals = 15;      // candidate decompositions per adaptation
  int n_samples = 20000;   // partition samples per candidate-demo
  bool plant_truth = true;
  int regret_episodes = 4;
  int workers = 0;         // benchmark cells in flight; 0 = hardware
  int prior_demos_per_task = 4;
  std::uint64_t prior_seed = 1;
  TrainConfig train;
  FinetuneConfig finetune;

  void validate() const;
};

ExperimentSpec load_experiment_spec(const std::string& path);
void save_experiment_spec(const ExperimentSpec& spec, const std::string& path);

// 64-bit FNV over the canonical spec serialization, hex-encoded. Rows carry
// it so CSVs from different configs never join silently.
std::string experiment_config_hash(const ExperimentSpec& spec);

struct ResultRow {
  std::string task;
  std::string method;
  int n_demos = 0;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  double mean_regret = 0.0;
  double adapt_seconds = 0.0;
  std::string config_hash;
  std::string error;  // nonempty marks a failed cell; other cells continue

  bool failed() const { return !error.empty(); }
};

void write_result_csv(const std::vector<ResultRow>& rows,
                      const std::string& path);

// Prior-corpus policy: scripted demos over the instruction corpus, chunk
// labels from the heuristic labeler with scripted keywords, then joint
// masked training. The checkpoint lands in cache_dir keyed by a hash of
// everything that feeds it, so repeat runs load instead of retraining.
struct PriorConfig {
  int demos_per_task = 4;
  std::uint64_t gen_seed = 1;
  TrainConfig train;
  HeuristicConfig heuristic;
};

Dataset build_prior_dataset(const WorldConfig& world, const PriorConfig& cfg);
PolicyModel prior_model(const WorldConfig& world, const PriorConfig& cfg,
                        const std::string& cache_dir,
                        std::string* hash_out = nullptr);

// Fresh stateful scripted controller per episode, emitting normalized
// actions; the reference side of every regret measurement.
PolicyFactory expert_reference(const TaskSpec& task, const WorldConfig& cfg);

// One benchmark cell, exposed for the CLI rollout path and tests.
ResultRow run_cell(const TaskSpec& task, const MethodSpec& method,
                   std::uint64_t seed, const ExperimentSpec& spec,
                   const PolicyModel& prior, const WorldConfig& world);

struct BenchReport {
  std::vector<ResultRow> rows;  // sorted by (task, method, seed)
  std::string csv_path;
  std::string config_hash;
};

// Full (task x method x seed) matrix on a bounded worker pool. Finished
// cells persist as marker files under <output_dir>/cells/ and are not rerun;
// failed cells record the error and the run continues.
BenchReport run_benchmark(const ExperimentSpec& spec);

// Mean success and regret over the non-failed rows of one method.
struct MethodSummary {
  std::string method;
  int cells = 0;
  int failed = 0;
  double success_rate = 0.0;
  double mean_regret = 0.0;
};
std::vector<MethodSummary> summarize_by_method(
    const std::vector<ResultRow>& rows);
// Per (task, method) means, for per-task comparisons.
double mean_success(const std::vector<ResultRow>& rows,
                    const std::string& task, const std::string& method);

struct ScalingConfig {
  std::vector<std::string> tasks;  // empty = every benchmark task
  std::vector<int> demo_counts = {5, 10, 20, 40, 80};
  int palo_demos = 5;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int episodes = 10;
  int proposals = 15;
  int n_samples = 2000;
  bool plant_truth = true;
  std::string output_dir = "scaling_out";
  int workers = 0;
  int prior_demos_per_task = 4;
  std::uint64_t prior_seed = 1;
  TrainConfig train;
  FinetuneConfig finetune;

  void validate() const;
};

struct ScalingPoint {
  int demo_count = 0;
  double palo_success = 0.0;  // constant: computed once at palo_demos
  double finetune_success = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;  // ascending demo count
  // Smallest sweep count where fine-tuning reaches the adapted policy;
  // absent when it never does.
  std::optional<int> crossover;
  double finetune_trend_z = 0.0;  // Mann-Kendall over per-seed count means
  std::string csv_path;
};

// Instruction-conditioned fine-tuning at each demo count against the
// adapted policy held at palo_demos demos, averaged over tasks and seeds.
ScalingReport run_scaling(const ScalingConfig& cfg);

// The canonical spec the acceptance suite runs; mirrored by the checked-in
// benchmark spec file.
ExperimentSpec default_benchmark_spec();

// Final-bound term table over the spec's tasks. Resumes the benchmark (a
// no-op when its cells are complete), measures the pre-training regret of
// the prior policy on the instruction corpus, re-derives each cell's
// proposal batch to estimate how often it contained the scripted truth, and
// sets LHS to the measured adapted-policy regret. Requires the spec to run
// the "palo" method with regret_episodes >= 1.
std::vector<TheoremRow> theorem_accounting(const ExperimentSpec& spec);

}  // namespace palo
