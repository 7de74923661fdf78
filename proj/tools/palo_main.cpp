#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "palo/augmenter.hpp"
#include "palo/chat_backend.hpp"
#include "palo/dataset_io.hpp"
#include "palo/experiment.hpp"
#include "palo/expert.hpp"
#include "palo/optimizer.hpp"
#include "palo/policy.hpp"
#include "palo/prompts.hpp"
#include "palo/proposer.hpp"
#include "palo/tasks.hpp"
#include "palo/theory.hpp"
#include "palo/world.hpp"

namespace {

using namespace palo;

// Chat transport shared by the augment and adapt subcommands.
struct BackendFlags {
  std::string backend = "mock";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "PALO_API_KEY";
  double temperature = 1.0;
  double requests_per_sec = 2.0;
  int timeout_sec = 60;
  std::string transcript;
  std::string prompt_file;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
  cmd->add_option("--backend", f.backend, "mock, remote, or replay")
      ->check(CLI::IsMember({"mock", "remote", "replay"}));
  cmd->add_option("--endpoint", f.endpoint, "chat completions URL");
  cmd->add_option("--chat-model", f.model, "remote model name");
  cmd->add_option("--api-key-env", f.api_key_env,
                  "environment variable holding the API key");
  cmd->add_option("--temperature", f.temperature, "sampling temperature");
  cmd->add_option("--requests-per-sec", f.requests_per_sec,
                  "client-side rate limit");
  cmd->add_option("--timeout", f.timeout_sec, "per-request timeout, seconds");
  cmd->add_option("--transcript", f.transcript,
                  "JSONL exchange log: written by remote, read by replay");
  cmd->add_option("--prompt", f.prompt_file,
                  "prompt template file overriding the built-in one");
}

std::unique_ptr<ChatBackend> open_chat(const BackendFlags& f) {
  if (f.backend == "remote") {
    RemoteConfig rc;
    rc.endpoint = f.endpoint;
    rc.model = f.model;
    rc.api_key_env = f.api_key_env;
    rc.temperature = f.temperature;
    rc.requests_per_sec = f.requests_per_sec;
    rc.timeout_sec = f.timeout_sec;
    rc.transcript_path = f.transcript;
    return std::make_unique<HttpChatBackend>(rc);
  }
  if (f.backend == "replay") {
    if (f.transcript.empty()) {
      throw UsageError("--backend replay needs --transcript");
    }
    return std::make_unique<ReplayChatBackend>(f.transcript);
  }
  return nullptr;  // mock: no chat transport involved
}

// The demos of a target dataset name the task they came from.
TaskSpec task_of_dataset(const Dataset& d, const WorldConfig& world) {
  if (d.trajectories.empty()) throw DataError("dataset has no trajectories");
  return find_task(d.trajectories.front().task, world);
}

void cmd_gen_demos(CLI::App* app) {
  struct Opts {
    std::string task;
    std::string corpus;
    int n = 5;
    std::uint64_t seed = 7;
    std::string out;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "gen-demos", "Generate scripted expert demonstrations");
  auto* task_opt =
      cmd->add_option("--task", opts->task, "benchmark task id");
  cmd->add_option("--corpus", opts->corpus,
                  "generate a whole corpus instead: prior or target")
      ->check(CLI::IsMember({"prior", "target"}))
      ->excludes(task_opt);
  cmd->add_option("--n", opts->n, "episodes per task");
  cmd->add_option("--seed", opts->seed, "generation seed");
  cmd->add_option("--out", opts->out, "output dataset (JSONL)")->required();
  cmd->callback([opts]() {
    const WorldConfig world = default_world();
    Dataset d;
    if (!opts->corpus.empty()) {
      const bool prior = opts->corpus == "prior";
      d = generate_dataset(prior ? prior_tasks(world) : target_tasks(world),
                           opts->n, world, opts->seed,
                           prior ? DatasetRole::kPrior : DatasetRole::kTarget);
    } else if (!opts->task.empty()) {
      d = generate_dataset({find_task(opts->task, world)}, opts->n, world,
                           opts->seed, DatasetRole::kTarget);
    } else {
      throw UsageError("gen-demos needs --task or --corpus");
    }
    save_dataset(d, opts->out);
    std::size_t steps = 0;
    for (const auto& t : d.trajectories) steps += t.steps.size();
    std::cout << "wrote " << d.trajectories.size() << " trajectories ("
              << steps << " steps) to " << opts->out << "\n";
  });
}

void cmd_augment(CLI::App* app) {
  struct Opts {
    std::string in;
    std::string out;
    bool overwrite = false;
    double tau_z = -1.0;
    double grip_threshold = -1.0;
    double secondary_ratio = -1.0;
    bool single_dir = false;
    BackendFlags chat;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "augment", "Label demonstrations with per-chunk skill sentences");
  cmd->add_option("--in", opts->in, "input dataset")->required();
  cmd->add_option("--out", opts->out, "output dataset")->required();
  cmd->add_flag("--overwrite", opts->overwrite, "relabel labeled trajectories");
  cmd->add_option("--tau-z", opts->tau_z, "direction z-score threshold");
  cmd->add_option("--grip-threshold", opts->grip_threshold,
                  "gripper command event threshold");
  cmd->add_option("--secondary-ratio", opts->secondary_ratio,
                  "second-direction strength ratio");
  cmd->add_flag("--single-dir", opts->single_dir,
                "emit one movement direction per chunk");
  add_backend_flags(cmd, opts->chat);
  cmd->callback([opts]() {
    const WorldConfig world = default_world();
    const Dataset in = load_dataset(opts->in);
    AugmentConfig acfg;
    if (opts->tau_z > 0) acfg.heuristic.tau_z = opts->tau_z;
    if (opts->grip_threshold > 0) {
      acfg.heuristic.grip_threshold = opts->grip_threshold;
    }
    if (opts->secondary_ratio > 0) {
      acfg.heuristic.secondary_ratio = opts->secondary_ratio;
    }
    acfg.heuristic.allow_two_dirs = !opts->single_dir;
    acfg.overwrite = opts->overwrite;
    acfg.log = &std::cerr;

    std::unique_ptr<ChatBackend> chat = open_chat(opts->chat);
    std::unique_ptr<KeywordBackend> kw;
    if (chat) {
      const std::string tmpl = opts->chat.prompt_file.empty()
                                   ? keyword_prompt_template()
                                   : load_prompt_template(opts->chat.prompt_file);
      kw = std::make_unique<RemoteKeywordBackend>(*chat, tmpl);
    } else {
      kw = std::make_unique<MockKeywordBackend>(world);
    }
    const Dataset out = augment_dataset(in, *kw, acfg);
    save_dataset(out, opts->out);
    std::cout << "labeled " << out.trajectories.size() << " trajectories to "
              << opts->out << "\n";
  });
}

void cmd_train(CLI::App* app) {
  struct Opts {
    std::string data;
    std::string out;
    TrainConfig cfg;
    std::string curve;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "train", "Train the conditioned policy on a labeled corpus");
  cmd->add_option("--data", opts->data, "labeled dataset")->required();
  cmd->add_option("--out", opts->out, "model checkpoint path")->required();
  cmd->add_option("--steps", opts->cfg.steps, "optimizer steps");
  cmd->add_option("--batch", opts->cfg.batch, "minibatch rows");
  cmd->add_option("--lr", opts->cfg.lr, "learning rate");
  cmd->add_option("--ridge", opts->cfg.ridge, "weight penalty");
  cmd->add_option("--seed", opts->cfg.seed, "minibatch seed");
  cmd->add_option("--curve", opts->curve, "write per-step loss CSV here");
  cmd->callback([opts]() {
    const WorldConfig world = default_world();
    const Dataset data = load_dataset(opts->data);
    TrainReport report;
    const PolicyModel model =
        train_masked_bc(data, default_featurizer(world), opts->cfg, &report);
    save_policy(model, opts->out);
    if (!opts->curve.empty()) {
      std::ofstream cf(opts->curve);
      if (!cf) throw DataError("cannot write " + opts->curve);
      cf << "step,minibatch_loss\n";
      for (std::size_t i = 0; i < report.minibatch_loss.size(); ++i) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.10g", report.minibatch_loss[i]);
        cf << i << ',' << buf << '\n';
      }
    }
    std::printf("final loss %.6f (joint %.6f, high-only %.6f, low-only %.6f)\n",
                report.final_loss, report.final_terms[0],
                report.final_terms[1], report.final_terms[2]);
    std::cout << "saved model to " << opts->out << "\n";
  });
}

void cmd_adapt(CLI::App* app) {
  struct Opts {
    std::string model;
    std::string demos;
    std::string out;
    int m = 15;
    AdaptConfig acfg;
    bool plant_truth = true;
    std::string ablation = "full";
    BackendFlags chat;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "adapt", "Choose a decomposition and time partition for target demos");
  cmd->add_option("--model", opts->model, "policy checkpoint")->required();
  cmd->add_option("--demos", opts->demos, "target demo dataset")->required();
  cmd->add_option("--out", opts->out, "adaptation result path")->required();
  cmd->add_option("--m", opts->m, "candidate decompositions");
  opts->acfg.n_samples = 20000;
  cmd->add_option("--n-samples", opts->acfg.n_samples,
                  "partition samples per candidate-demo");
  cmd->add_option("--seed", opts->acfg.seed, "adaptation seed");
  cmd->add_flag("--exhaustive", opts->acfg.exhaustive,
                "enumerate all partitions (small horizons only)");
  cmd->add_flag("--shared-pool", opts->acfg.shared_partition_pool,
                "reuse one partition pool per (horizon, K)");
  cmd->add_option("--workers", opts->acfg.workers, "worker threads");
  cmd->add_option("--ablation", opts->ablation,
                  "full, fixed_times, single_plan, mask_high, or mask_low");
  cmd->add_flag("--plant-truth,!--no-plant-truth", opts->plant_truth,
                "mock proposer includes the scripted decomposition");
  add_backend_flags(cmd, opts->chat);
  cmd->callback([opts]() {
    const WorldConfig world = default_world();
    const PolicyModel model = load_policy(opts->model);
    const Dataset demos = load_dataset(opts->demos);
    const TaskSpec task = task_of_dataset(demos, world);
    opts->acfg.mode = adapt_mode_from_string(opts->ablation);
    if (opts->acfg.n_samples == 1 && !opts->acfg.exhaustive) {
      std::cerr << "warning: a single partition sample per candidate-demo "
                   "gives a very coarse fit\n";
    }
    Rng srng = derive_stream(opts->acfg.seed, "scene");
    const State s0 = sample_initial_state(world, srng);

    ProposalBatch batch;
    std::unique_ptr<ChatBackend> chat = open_chat(opts->chat);
    if (chat) {
      RemoteProposerConfig rp;
      rp.M = opts->acfg.mode == AdaptMode::kSinglePlan ? 1 : opts->m;
      rp.model = opts->chat.model;
      if (!opts->chat.prompt_file.empty()) {
        rp.prompt_template = load_prompt_template(opts->chat.prompt_file);
      }
      try {
        batch = propose_remote(s0, task.instruction, world, *chat, rp);
      } catch (const RemoteError& e) {
        if (!opts->chat.transcript.empty()) {
          throw RemoteError(std::string(e.what()) +
                            " (exchange log: " + opts->chat.transcript + ")");
        }
        throw;
      }
    } else {
      MockProposerConfig mp;
      mp.M = opts->acfg.mode == AdaptMode::kSinglePlan ? 1 : opts->m;
      mp.plant_truth =
          opts->acfg.mode == AdaptMode::kSinglePlan ? false : opts->plant_truth;
      mp.seed = derive_stream(opts->acfg.seed, "proposer").next_u64();
      batch = propose_mock(task, s0, world, mp);
    }
    const AdaptationResult res = adapt(batch, demos, model, opts->acfg);
    save_adaptation_result(res, opts->out);
    std::cout << format_adaptation_report(res);
    std::cout << "saved adaptation result to " << opts->out << "\n";
  });
}

void cmd_rollout(CLI::App* app) {
  struct Opts {
    std::string model;
    std::string task;
    std::string plan;
    int episodes = 10;
    std::uint64_t seed = 0;
    int horizon = 0;
    bool trace = false;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "rollout", "Evaluate a policy on randomized episodes of a task");
  cmd->add_option("--model", opts->model, "policy checkpoint")->required();
  cmd->add_option("--task", opts->task, "benchmark task id")->required();
  cmd->add_option("--plan", opts->plan,
                  "adaptation result; omitted = condition on the raw "
                  "instruction");
  cmd->add_option("--episodes", opts->episodes, "episode count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opts->seed, "evaluation seed");
  cmd->add_option("--horizon", opts->horizon, "step budget (0 = task default)");
  cmd->add_flag("--trace", opts->trace, "print per-step state and action");
  cmd->callback([opts]() {
    const WorldConfig world = default_world();
    const PolicyModel model = load_policy(opts->model);
    const TaskSpec task = find_task(opts->task, world);
    PolicyFn policy;
    if (!opts->plan.empty()) {
      const AdaptationResult plan = load_adaptation_result(opts->plan);
      policy = adapted_policy(plan, model);
    } else {
      policy = instruction_policy(model, task.instruction);
    }
    const int horizon = opts->horizon > 0 ? opts->horizon : task.eval_horizon;
    int successes = 0;
    for (int e = 0; e < opts->episodes; ++e) {
      Rng rng = derive_stream(opts->seed, "episode",
                              static_cast<std::uint64_t>(e));
      const Rollout ro = rollout_policy(policy, task, world, horizon, rng);
      std::printf("episode %d: %s%s\n", e, ro.success ? "success" : "failure",
                  ro.success
                      ? (" at step " + std::to_string(ro.success_step)).c_str()
                      : "");
      if (opts->trace) {
        for (const auto& [id, pose] : ro.states.front().objects)
          std::printf("  obj %-10s (%.3f, %.3f, %.3f) yaw=%.2f\n", id.c_str(),
                      pose.position.x(), pose.position.y(), pose.position.z(),
                      pose.yaw);
        const int n = static_cast<int>(ro.actions.size());
        for (int t = 0; t < n; ++t) {
          const State& s = ro.states[t + 1];
          const Action& a = ro.actions[t];
          std::printf(
              "  t=%3d grip=(%.3f, %.3f, %.3f) open=%.2f held=%-10s "
              "act=(%.2f, %.2f, %.2f | %.2f, %.2f, %.2f | %.2f)\n",
              t, s.gripper_pos.x(), s.gripper_pos.y(), s.gripper_pos.z(),
              s.gripper_open, s.held_object.value_or("-").c_str(), a[0], a[1],
              a[2], a[3], a[4], a[5], a[6]);
        }
      }
      successes += ro.success ? 1 : 0;
    }
    std::printf("success rate %.2f (%d/%d)\n",
                static_cast<double>(successes) / opts->episodes, successes,
                opts->episodes);
  });
}

void cmd_bench(CLI::App* app) {
  struct Opts {
    std::string spec;
    std::string output_dir;
    int workers = -1;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "bench", "Run the benchmark matrix (tasks x methods x seeds)");
  cmd->add_option("--spec", opts->spec,
                  "experiment spec JSON; omitted = built-in default");
  cmd->add_option("--output-dir", opts->output_dir, "override the output dir");
  cmd->add_option("--workers", opts->workers, "cells in flight");
  cmd->callback([opts]() {
    ExperimentSpec spec = opts->spec.empty()
                              ? default_benchmark_spec()
                              : load_experiment_spec(opts->spec);
    if (!opts->output_dir.empty()) spec.output_dir = opts->output_dir;
    if (opts->workers >= 0) spec.workers = opts->workers;
    const BenchReport report = run_benchmark(spec);
    int failed = 0;
    for (const auto& row : report.rows) failed += row.failed() ? 1 : 0;
    std::printf("%-14s %8s %8s %8s\n", "method", "cells", "success", "regret");
    for (const auto& s : summarize_by_method(report.rows)) {
      std::printf("%-14s %8d %8.3f %8.4f\n", s.method.c_str(), s.cells,
                  s.success_rate, s.mean_regret);
    }
    if (failed > 0) {
      std::cerr << "warning: " << failed
                << " cells failed; see the error column\n";
    }
    std::cout << "results: " << report.csv_path << "\n";
  });
}

void cmd_scaling(CLI::App* app) {
  auto opts = std::make_shared<ScalingConfig>();
  auto* cmd = app->add_subcommand(
      "scaling", "Demo-count sweep: fine-tuning vs the adapted policy");
  cmd->add_option("--counts", opts->demo_counts, "fine-tuning demo counts");
  cmd->add_option("--seeds", opts->seeds, "seeds per cell");
  cmd->add_option("--tasks", opts->tasks, "task ids (default: all)");
  cmd->add_option("--episodes", opts->episodes, "episodes per cell");
  cmd->add_option("--palo-demos", opts->palo_demos,
                  "demo count for the adapted policy");
  cmd->add_option("--m", opts->proposals, "candidate decompositions");
  cmd->add_option("--n-samples", opts->n_samples, "partition samples");
  cmd->add_option("--output-dir", opts->output_dir, "output directory");
  cmd->add_option("--workers", opts->workers, "cells in flight");
  cmd->callback([opts]() {
    const ScalingReport report = run_scaling(*opts);
    std::printf("%10s %8s %8s\n", "demos", "adapted", "finetune");
    for (const auto& p : report.points) {
      std::printf("%10d %8.3f %8.3f\n", p.demo_count, p.palo_success,
                  p.finetune_success);
    }
    if (report.crossover) {
      std::printf("fine-tuning reaches the adapted policy at %d demos\n",
                  *report.crossover);
    } else {
      std::printf("fine-tuning never reaches the adapted policy on this sweep\n");
    }
    std::printf("fine-tune trend z = %.3f\n", report.finetune_trend_z);
    std::cout << "results: " << report.csv_path << "\n";
  });
}

void cmd_theory(CLI::App* app) {
  struct Opts {
    std::string output_dir = "theory_out";
    std::uint64_t samples = 100000;
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<int> horizons;
    std::vector<int> segments;
    std::vector<int> exp_horizons = {50, 200};
    std::vector<int> exp_segments = {2, 4, 8};
    std::vector<int> exp_samples = {1000, 20000};
    std::string spec;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app->add_subcommand(
      "theory", "Check the partition-overlap tail bound and term accounting");
  cmd->add_option("--output-dir", opts->output_dir, "CSV directory");
  cmd->add_option("--samples", opts->samples, "partition pairs per grid cell");
  cmd->add_option("--seed", opts->seed, "sampling seed");
  cmd->add_option("--workers", opts->workers, "grid cells in flight");
  cmd->add_option("--horizons", opts->horizons, "overlap grid horizons");
  cmd->add_option("--segments", opts->segments, "overlap grid segment counts");
  cmd->add_option("--spec", opts->spec,
                  "benchmark spec: also emit the final-bound term table "
                  "(resumes that benchmark if incomplete)");
  cmd->callback([opts]() {
    namespace fs = std::filesystem;
    fs::create_directories(opts->output_dir);
    const auto horizons = opts->horizons.empty() ? default_overlap_horizons()
                                                 : opts->horizons;
    const auto segments = opts->segments.empty() ? default_overlap_segments()
                                                 : opts->segments;
    const OverlapReport overlap =
        check_overlap_bound(horizons, segments, default_overlap_fractions(),
                            opts->samples, opts->seed, opts->workers);
    const std::string overlap_csv =
        (fs::path(opts->output_dir) / "overlap_bound.csv").string();
    write_overlap_csv(overlap, overlap_csv);
    std::printf("overlap tail: %zu cells, %d violations\n",
                overlap.rows.size(), overlap.violations());
    std::cout << "  " << overlap_csv << "\n";

    const ExpBoundReport exp_report =
        check_exp_bound(opts->exp_horizons, opts->exp_segments,
                        opts->exp_samples);
    const std::string exp_csv =
        (fs::path(opts->output_dir) / "exp_bound.csv").string();
    write_exp_bound_csv(exp_report, exp_csv);
    int grid_ok = 0;
    for (const auto& row : exp_report.rows) grid_ok += row.grid_min_within;
    std::printf("exp bound: %zu rows, grid minimum within target on %d\n",
                exp_report.rows.size(), grid_ok);
    std::cout << "  " << exp_csv << "\n";

    if (!opts->spec.empty()) {
      const ExperimentSpec spec = load_experiment_spec(opts->spec);
      const auto rows = theorem_accounting(spec);
      const std::string theorem_csv =
          (fs::path(opts->output_dir) / "final_bound.csv").string();
      write_theorem_csv(rows, theorem_csv);
      int within = 0;
      for (const auto& row : rows) within += row.within;
      std::printf("final bound: %zu tasks, LHS <= RHS on %d\n", rows.size(),
                  within);
      std::cout << "  " << theorem_csv << "\n";
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Few-shot adaptation of a language-conditioned manipulation policy: "
      "scripted demos, chunk labeling, joint training, decomposition search, "
      "and the benchmark/theory harness"};
  app.require_subcommand(1);
  cmd_gen_demos(&app);
  cmd_augment(&app);
  cmd_train(&app);
  cmd_adapt(&app);
  cmd_rollout(&app);
  cmd_bench(&app);
  cmd_scaling(&app);
  cmd_theory(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const RemoteError& e) {
    std::cerr << "remote backend error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
