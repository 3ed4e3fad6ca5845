#ifndef UNISHAP_TOOLS_EXPERIMENT_H_
#define UNISHAP_TOOLS_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unishap/estimators.h"
#include "unishap/games.h"

namespace unishap::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitGame = 3,
  kExitCapability = 4,
};

// Builds a game from a spec string such as
//   adversarial:d=64,n=2,xi=1,chi=0      random:d=12,seed=3
//   table:path/to/file.csv               external:d=8,cmd=./server --d 8
//   additive:d=10,seed=1 | additive:w=1;2;3
//   glove:d=3   majority:d=3
// Several specs joined by '+' are summed. Throws ConfigError.
GamePtr ParseGameSpec(const std::string& spec,
                      std::size_t batch_size = kDefaultBatchSize);

// "1..100", "1,2,5" or a single integer.
std::vector<std::uint64_t> ParseSeedList(const std::string& text);

std::string FormatNumber(double x);

enum class Metric { kMse, kInsertionAuc, kDeletionAuc, kRankCorr, kTheoryReport };
Metric ParseMetric(const std::string& name);
std::string ToString(Metric m);

// One estimator setting of a sweep; `label` is the preset name or "custom".
struct Method {
  std::string label;
  EstimatorConfig config;
};

struct ExperimentSpec {
  std::string game;
  std::vector<Method> methods;
  std::vector<std::int64_t> budgets;
  std::vector<std::uint64_t> seeds;
  std::vector<Metric> metrics;
  std::string out_dir;
  int top_k = 0;  // 0 means d
  double eps = 0.1;
  double delta = 0.1;
  double maxval = kDefaultMaxval;
  int threads = 1;
  std::size_t batch_size = kDefaultBatchSize;
};

// Flat "key=value" lines; repeated keys append to lists; '#' starts a
// comment. Keys: game, preset, kind, tau, strategy, paired, lambda, m, seed,
// seeds, metrics, out, top_k, eps, delta, maxval, threads, batch_size.
// Without any preset the grid is the product of the kind, tau, strategy,
// paired and lambda lists; presets add their own grid points.
ExperimentSpec ParseExperimentSpec(const std::string& text);
ExperimentSpec LoadExperimentSpec(const std::string& path);

// Writes results.csv, summary.csv and timings.csv into spec.out_dir.
// Failures of single grid points are recorded in the status column.
void RunSweep(const ExperimentSpec& spec);

// Writes metrics.csv (one row per method, m and seed, plus the exact
// attribution when available) and metrics_summary.csv.
void RunFaithfulness(const ExperimentSpec& spec);

struct EstimateRun {
  std::string game;
  EstimatorConfig config;
  std::string out_dir;
  std::size_t batch_size = kDefaultBatchSize;
  bool write_sketch = false;
};

// Writes phi.csv ("feature,phi") and phi.meta.json.
ShapleyEstimate RunEstimate(const EstimateRun& run);

// Reads UNISHAP_THREADS, defaulting to 1.
int DefaultThreads();

}  // namespace unishap::cli

#endif  // UNISHAP_TOOLS_EXPERIMENT_H_
