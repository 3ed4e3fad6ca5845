// unishap: Shapley value estimation experiments from the command line.
//
//   unishap estimate --game adversarial:d=64,n=2,xi=1,chi=0 \
//       --preset leverageshap --m 1024 --seed 7 --out run/
//   unishap sweep spec.txt
//   unishap faithfulness --game random:d=10,seed=1 --preset kernelshap \
//       --m 256 --m 1024 --seeds 1..20 --out faith/
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment.h"
#include "unishap/errors.h"

namespace {

using namespace unishap;
using namespace unishap::cli;

struct MethodFlags {
  std::string preset;
  std::string kind;
  std::optional<double> tau;
  std::string strategy;
  std::optional<bool> paired;
  std::string lambda;
};

void AddMethodFlags(CLI::App* app, MethodFlags& f) {
  app->add_option("--preset", f.preset,
                  "kernelshap | unbiased_kernelshap | leverageshap");
  app->add_option("--kind", f.kind, "regression | matvec");
  app->add_option("--tau", f.tau, "sampling distribution parameter in [0, 1]");
  app->add_option("--strategy", f.strategy, "with_replacement | without_replacement");
  app->add_flag("--paired,!--no-paired", f.paired, "emit complement pairs");
  app->add_option("--lambda", f.lambda, "alpha | zero | <number>");
}

// Preset first, explicit flags override single fields.
EstimatorConfig ResolveMethod(const MethodFlags& f) {
  EstimatorConfig c = f.preset.empty() ? EstimatorConfig{} : Preset(f.preset);
  if (!f.kind.empty()) c.kind = ParseEstimatorKind(f.kind);
  if (f.tau) c.tau = *f.tau;
  if (!f.strategy.empty()) c.strategy = ParseStrategy(f.strategy);
  if (f.paired) c.paired = *f.paired;
  if (!f.lambda.empty()) ParseLambda(f.lambda, c);
  return c;
}

int Run(int argc, char** argv) {
  CLI::App app{"Shapley value estimation experiments"};
  app.require_subcommand(1);

  int threads = 0;
  double maxval = kDefaultMaxval;
  std::size_t batch_size = kDefaultBatchSize;

  // estimate
  CLI::App* est = app.add_subcommand("estimate", "estimate Shapley values for one game");
  EstimateRun run;
  MethodFlags est_method;
  std::int64_t m = 0;
  std::uint64_t seed = 0;
  est->add_option("--game", run.game, "game spec")->required();
  AddMethodFlags(est, est_method);
  est->add_option("--m", m, "sample budget")->required();
  est->add_option("--seed", seed, "random seed");
  est->add_option("--out", run.out_dir, "output directory")->required();
  est->add_option("--maxval", maxval, "largest exact bucket count before Poisson draws");
  est->add_option("--threads", threads, "worker threads (default $UNISHAP_THREADS or 1)");
  est->add_option("--batch-size", batch_size, "game evaluation batch size");
  est->add_flag("--write-sketch", run.write_sketch, "also write sketch.csv");

  // sweep
  CLI::App* sweep = app.add_subcommand("sweep", "run a grid of estimator settings");
  std::string spec_path;
  std::string sweep_out;
  sweep->add_option("spec", spec_path, "spec file (key=value lines)")->required();
  sweep->add_option("--out", sweep_out, "override the output directory");
  sweep->add_option("--threads", threads, "worker threads");

  // faithfulness
  CLI::App* faith = app.add_subcommand("faithfulness",
                                       "insertion/deletion AUC and rank correlation");
  std::string faith_spec;
  std::string faith_game;
  std::vector<std::string> faith_presets;
  MethodFlags faith_method;
  std::vector<std::int64_t> faith_m;
  std::string faith_seeds = "0";
  std::string faith_out;
  int top_k = 0;
  faith->add_option("--spec", faith_spec, "spec file; flags below are ignored");
  faith->add_option("--game", faith_game, "game spec");
  faith->add_option("--preset", faith_presets, "preset (repeatable)");
  faith->add_option("--kind", faith_method.kind, "regression | matvec (custom method)");
  faith->add_option("--tau", faith_method.tau, "tau of the custom method");
  faith->add_option("--strategy", faith_method.strategy, "strategy of the custom method");
  faith->add_flag("--paired,!--no-paired", faith_method.paired, "pairing of the custom method");
  faith->add_option("--lambda", faith_method.lambda, "lambda of the custom method");
  faith->add_option("--m", faith_m, "sample budget (repeatable)");
  faith->add_option("--seeds", faith_seeds, "seed list, e.g. 1..20");
  faith->add_option("--top-k", top_k, "number of features on the curves (default d)");
  faith->add_option("--out", faith_out, "output directory");
  faith->add_option("--threads", threads, "worker threads");
  faith->add_option("--maxval", maxval, "largest exact bucket count before Poisson draws");
  faith->add_option("--batch-size", batch_size, "game evaluation batch size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (threads < 0) throw ConfigError("--threads must be positive");
    const int resolved_threads = threads > 0 ? threads : DefaultThreads();
    if (batch_size == 0) throw ConfigError("--batch-size must be positive");

    if (*est) {
      run.config = ResolveMethod(est_method);
      run.config.m = m;
      run.config.seed = seed;
      run.config.maxval = maxval;
      run.config.threads = resolved_threads;
      run.batch_size = batch_size;
      const ShapleyEstimate e = RunEstimate(run);
      std::cerr << "wrote " << run.out_dir << "/phi.csv (" << e.phi.size()
                << " features, efficiency gap " << e.efficiency_gap << ")\n";
    } else if (*sweep) {
      ExperimentSpec spec = LoadExperimentSpec(spec_path);
      if (!sweep_out.empty()) spec.out_dir = sweep_out;
      if (threads > 0) spec.threads = threads;
      RunSweep(spec);
      std::cerr << "wrote " << spec.out_dir << "/results.csv\n";
    } else if (*faith) {
      ExperimentSpec spec;
      if (!faith_spec.empty()) {
        spec = LoadExperimentSpec(faith_spec);
        if (!faith_out.empty()) spec.out_dir = faith_out;
      } else {
        spec.game = faith_game;
        for (const auto& p : faith_presets) spec.methods.push_back({p, Preset(p)});
        if (!faith_method.kind.empty() || spec.methods.empty()) {
          spec.methods.push_back({"custom", ResolveMethod(faith_method)});
        }
        spec.budgets = faith_m;
        spec.seeds = ParseSeedList(faith_seeds);
        spec.out_dir = faith_out;
        spec.top_k = top_k;
        spec.maxval = maxval;
        spec.batch_size = batch_size;
        spec.threads = resolved_threads;
      }
      if (threads > 0) spec.threads = threads;
      RunFaithfulness(spec);
      std::cerr << "wrote " << spec.out_dir << "/metrics.csv\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapabilityError& e) {
    std::cerr << "capability error: " << e.what() << "\n";
    return kExitCapability;
  } catch (const GameError& e) {
    std::cerr << "game error: " << e.what() << "\n";
    return kExitGame;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return Run(argc, argv); }
