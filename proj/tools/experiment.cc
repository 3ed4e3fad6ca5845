#include "experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "unishap/diagnostics.h"
#include "unishap/errors.h"
#include "unishap/exact.h"
#include "unishap/external_game.h"
#include "unishap/rng.h"

namespace unishap::cli {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double ParseDouble(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  }
  return v;
}

long long ParseInt(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ConfigError(what + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool ParseBool(const std::string& text, const std::string& what) {
  if (text == "1" || text == "true" || text == "yes" || text == "paired") return true;
  if (text == "0" || text == "false" || text == "no" || text == "unpaired") return false;
  throw ConfigError(what + ": expected a boolean, got '" + text + "'");
}

using Params = std::map<std::string, std::string>;

Params ParseParams(const std::string& body, const std::string& game) {
  Params p;
  if (body.empty()) return p;
  for (const std::string& item : Split(body, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("game '" + game + "': expected key=value, got '" + item + "'");
    }
    p[Trim(item.substr(0, eq))] = Trim(item.substr(eq + 1));
  }
  return p;
}

void CheckKeys(const Params& p, const std::vector<std::string>& allowed,
               const std::string& game) {
  for (const auto& [k, v] : p) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("game '" + game + "': unknown parameter '" + k + "'");
    }
  }
}

int RequireDimension(const Params& p, const std::string& game, int fallback = -1) {
  auto it = p.find("d");
  if (it == p.end()) {
    if (fallback > 0) return fallback;
    throw ConfigError("game '" + game + "': missing d");
  }
  const long long d = ParseInt(it->second, "d");
  if (d < 2 || d > 1000000) throw ConfigError("game '" + game + "': d out of range");
  return static_cast<int>(d);
}

std::shared_ptr<Game> ParseComponent(const std::string& spec, std::size_t batch_size) {
  const auto colon = spec.find(':');
  const std::string name = Trim(spec.substr(0, colon));
  const std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
  try {
    if (name == "table") {
      if (body.empty()) throw ConfigError("table game needs a path");
      return LoadTabularGame(Trim(body));
    }
    if (name == "external") {
      const auto cmd_pos = body.find("cmd=");
      if (cmd_pos == std::string::npos) throw ConfigError("external game needs cmd=");
      std::string head = body.substr(0, cmd_pos);
      if (!head.empty() && head.back() == ',') head.pop_back();
      Params p = ParseParams(head, spec);
      CheckKeys(p, {"d", "timeout_ms"}, spec);
      ExternalGame::Options opt;
      opt.batch_size = batch_size;
      if (p.count("timeout_ms")) {
        opt.timeout_ms = static_cast<int>(ParseInt(p["timeout_ms"], "timeout_ms"));
      }
      return std::make_shared<ExternalGame>(body.substr(cmd_pos + 4),
                                            RequireDimension(p, spec), opt);
    }
    Params p = ParseParams(body, spec);
    if (name == "adversarial") {
      CheckKeys(p, {"d", "n", "xi", "chi", "eps0"}, spec);
      AdversarialParams a;
      a.d = RequireDimension(p, spec);
      if (p.count("n")) a.n = static_cast<int>(ParseInt(p["n"], "n"));
      if (p.count("xi")) a.xi = ParseDouble(p["xi"], "xi");
      if (p.count("chi")) a.chi = ParseDouble(p["chi"], "chi");
      if (p.count("eps0")) a.eps0 = ParseDouble(p["eps0"], "eps0");
      return std::make_shared<AdversarialGame>(a);
    }
    if (name == "random") {
      CheckKeys(p, {"d", "seed"}, spec);
      const std::uint64_t seed = p.count("seed") ? ParseInt(p["seed"], "seed") : 0;
      return RandomTabularGame(RequireDimension(p, spec), seed);
    }
    if (name == "additive") {
      CheckKeys(p, {"d", "seed", "w"}, spec);
      if (p.count("w")) {
        const auto parts = Split(p["w"], ';');
        Eigen::VectorXd w(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) w[i] = ParseDouble(Trim(parts[i]), "w");
        return std::make_shared<AdditiveGame>(w);
      }
      const int d = RequireDimension(p, spec);
      const std::uint64_t seed = p.count("seed") ? ParseInt(p["seed"], "seed") : 0;
      Rng rng(DeriveSeed(seed, 0x61646469ULL));
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      Eigen::VectorXd w(d);
      for (int i = 0; i < d; ++i) w[i] = unif(rng);
      return std::make_shared<AdditiveGame>(w);
    }
    if (name == "glove") {
      CheckKeys(p, {"d"}, spec);
      return GloveGame(RequireDimension(p, spec, 3));
    }
    if (name == "majority") {
      CheckKeys(p, {"d"}, spec);
      return MajorityGame(RequireDimension(p, spec, 3));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("game '" + spec + "': " + e.what());
  }
  throw ConfigError("unknown game '" + name + "'");
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out + "\"";
}

std::string Num(double x) { return std::isnan(x) ? "" : FormatNumber(x); }

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir + "'");
  }
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

// Type-7 quantile of a sorted sample.
double Quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(sorted.size() - 1, lo + 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

bool Wants(const ExperimentSpec& spec, Metric m) {
  return std::find(spec.metrics.begin(), spec.metrics.end(), m) != spec.metrics.end();
}

std::string ConfigColumnsHeader() {
  return "method,kind,tau,strategy,paired,lambda,maxval";
}

std::string ConfigColumns(const Method& method) {
  const EstimatorConfig& c = method.config;
  return CsvField(method.label) + "," + ToString(c.kind) + "," + FormatNumber(c.tau) +
         "," + ToString(c.strategy) + "," + (c.paired ? "1" : "0") + "," +
         CsvField(LambdaToString(c)) + "," + FormatNumber(c.maxval);
}

struct Task {
  std::size_t method = 0;
  std::int64_t m = 0;
  std::uint64_t seed = 0;
};

template <typename Fn>
void RunTasks(std::size_t count, int threads, Fn fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<Task> MakeTasks(const ExperimentSpec& spec) {
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < spec.methods.size(); ++i) {
    for (std::int64_t m : spec.budgets) {
      for (std::uint64_t seed : spec.seeds) tasks.push_back({i, m, seed});
    }
  }
  return tasks;
}

EstimatorConfig TaskConfig(const ExperimentSpec& spec, const Task& t) {
  EstimatorConfig c = spec.methods[t.method].config;
  c.m = t.m;
  c.seed = t.seed;
  c.maxval = spec.maxval;
  c.threads = 1;
  return c;
}

void ValidateSpec(const ExperimentSpec& spec) {
  if (spec.game.empty()) throw ConfigError("spec: missing game");
  if (spec.methods.empty()) throw ConfigError("spec: no estimator settings");
  if (spec.budgets.empty()) throw ConfigError("spec: no sample budgets (m)");
  if (spec.seeds.empty()) throw ConfigError("spec: no seeds");
  if (spec.out_dir.empty()) throw ConfigError("spec: missing out");
  for (std::int64_t m : spec.budgets) {
    if (m <= 0) throw ConfigError("spec: budgets must be positive");
  }
  for (const auto& method : spec.methods) {
    if (!(method.config.tau >= 0.0 && method.config.tau <= 1.0)) {
      throw ConfigError("spec: tau must lie in [0, 1]");
    }
  }
}

std::optional<TheoryReport> Theory(const Game& game, double tau, double lambda,
                                   double eps, double delta) {
  if (auto* adv = dynamic_cast<const AdversarialGame*>(&game)) {
    if (lambda == adv->params().chi) {
      return AdversarialTheoryReport(adv->params(), tau, eps, delta);
    }
  }
  if (game.dimension() <= kMaxDiagnosticDimension) {
    return ComputeTheoryReport(game, tau, lambda, eps, delta);
  }
  return std::nullopt;
}

}  // namespace

std::string FormatNumber(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

GamePtr ParseGameSpec(const std::string& spec_in, std::size_t batch_size) {
  const std::string spec = Trim(spec_in);
  if (spec.empty()) throw ConfigError("empty game spec");
  // An external command may itself contain '+', so it always ends the spec.
  std::vector<std::string> parts;
  const auto ext = spec.find("external:");
  const std::string head = ext == std::string::npos ? spec : spec.substr(0, ext);
  if (!head.empty()) {
    for (const std::string& p : Split(head, '+')) {
      if (!Trim(p).empty()) parts.push_back(Trim(p));
    }
    if (ext != std::string::npos && Trim(head).back() != '+') {
      throw ConfigError("game spec: expected '+' before external component");
    }
  }
  if (ext != std::string::npos) parts.push_back(spec.substr(ext));
  std::vector<GamePtr> games;
  for (const std::string& p : parts) {
    auto g = ParseComponent(p, batch_size);
    g->set_batch_size(batch_size);
    games.push_back(std::move(g));
  }
  if (games.size() == 1) return games.front();
  for (const auto& g : games) {
    if (g->dimension() != games.front()->dimension()) {
      throw ConfigError("game spec: components have different d");
    }
  }
  auto sum = std::make_shared<LinearCombinationGame>(
      games, std::vector<double>(games.size(), 1.0));
  sum->set_batch_size(batch_size);
  return sum;
}

std::vector<std::uint64_t> ParseSeedList(const std::string& text_in) {
  const std::string text = Trim(text_in);
  std::vector<std::uint64_t> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const long long a = ParseInt(Trim(text.substr(0, dots)), "seeds");
    const long long b = ParseInt(Trim(text.substr(dots + 2)), "seeds");
    if (a < 0 || b < a) throw ConfigError("seeds: bad range '" + text + "'");
    for (long long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
    return out;
  }
  for (const std::string& part : Split(text, ',')) {
    const long long s = ParseInt(Trim(part), "seed");
    if (s < 0) throw ConfigError("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

Metric ParseMetric(const std::string& name) {
  if (name == "mse") return Metric::kMse;
  if (name == "insertion_auc") return Metric::kInsertionAuc;
  if (name == "deletion_auc") return Metric::kDeletionAuc;
  if (name == "rank_corr") return Metric::kRankCorr;
  if (name == "theory_report") return Metric::kTheoryReport;
  throw ConfigError("unknown metric '" + name + "'");
}

std::string ToString(Metric m) {
  switch (m) {
    case Metric::kMse: return "mse";
    case Metric::kInsertionAuc: return "insertion_auc";
    case Metric::kDeletionAuc: return "deletion_auc";
    case Metric::kRankCorr: return "rank_corr";
    case Metric::kTheoryReport: return "theory_report";
  }
  return "";
}

ExperimentSpec ParseExperimentSpec(const std::string& text) {
  std::map<std::string, std::vector<std::string>> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("spec line " + std::to_string(line_no) + ": expected key=value");
    }
    kv[Trim(line.substr(0, eq))].push_back(Trim(line.substr(eq + 1)));
  }
  static const std::vector<std::string> kKeys = {
      "game", "preset", "kind", "tau", "strategy", "paired", "lambda", "m",
      "seed", "seeds", "metrics", "out", "top_k", "eps", "delta", "maxval",
      "threads", "batch_size"};
  for (const auto& [k, v] : kv) {
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) {
      throw ConfigError("spec: unknown key '" + k + "'");
    }
  }
  auto single = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    if (it->second.size() != 1) throw ConfigError("spec: key '" + key + "' given twice");
    return it->second.front();
  };
  auto list = [&](const std::string& key) {
    std::vector<std::string> out;
    auto it = kv.find(key);
    if (it == kv.end()) return out;
    for (const auto& v : it->second) {
      for (const auto& part : Split(v, ',')) {
        if (!Trim(part).empty()) out.push_back(Trim(part));
      }
    }
    return out;
  };

  ExperimentSpec spec;
  spec.game = single("game").value_or("");
  spec.out_dir = single("out").value_or("");
  if (auto v = single("top_k")) spec.top_k = static_cast<int>(ParseInt(*v, "top_k"));
  if (auto v = single("eps")) spec.eps = ParseDouble(*v, "eps");
  if (auto v = single("delta")) spec.delta = ParseDouble(*v, "delta");
  if (auto v = single("maxval")) spec.maxval = ParseDouble(*v, "maxval");
  if (auto v = single("threads")) spec.threads = static_cast<int>(ParseInt(*v, "threads"));
  else spec.threads = DefaultThreads();
  if (auto v = single("batch_size")) {
    const long long b = ParseInt(*v, "batch_size");
    if (b <= 0) throw ConfigError("spec: batch_size must be positive");
    spec.batch_size = static_cast<std::size_t>(b);
  }
  for (const auto& m : list("m")) spec.budgets.push_back(ParseInt(m, "m"));
  if (auto it = kv.find("seed"); it != kv.end()) {
    for (const auto& v : it->second) {
      for (auto s : ParseSeedList(v)) spec.seeds.push_back(s);
    }
  }
  if (auto it = kv.find("seeds"); it != kv.end()) {
    for (const auto& v : it->second) {
      for (auto s : ParseSeedList(v)) spec.seeds.push_back(s);
    }
  }
  for (const auto& m : list("metrics")) spec.metrics.push_back(ParseMetric(m));

  for (const auto& name : list("preset")) spec.methods.push_back({name, Preset(name)});
  const auto kinds = list("kind");
  if (!kinds.empty() || spec.methods.empty()) {
    std::vector<std::string> taus = list("tau");
    std::vector<std::string> strategies = list("strategy");
    std::vector<std::string> paired = list("paired");
    std::vector<std::string> lambdas = list("lambda");
    std::vector<std::string> kind_list = kinds;
    if (kind_list.empty()) kind_list = {"regression"};
    if (taus.empty()) taus = {"0"};
    if (strategies.empty()) strategies = {"with_replacement"};
    if (paired.empty()) paired = {"1"};
    if (lambdas.empty()) lambdas = {"alpha"};
    for (const auto& k : kind_list) {
      for (const auto& t : taus) {
        for (const auto& s : strategies) {
          for (const auto& p : paired) {
            for (const auto& l : lambdas) {
              EstimatorConfig c;
              c.kind = ParseEstimatorKind(k);
              c.tau = ParseDouble(t, "tau");
              c.strategy = ParseStrategy(s);
              c.paired = ParseBool(p, "paired");
              ParseLambda(l, c);
              spec.methods.push_back({"custom", c});
            }
          }
        }
      }
    }
  }
  ValidateSpec(spec);
  return spec;
}

ExperimentSpec LoadExperimentSpec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseExperimentSpec(buf.str());
}

int DefaultThreads() {
  const char* env = std::getenv("UNISHAP_THREADS");
  if (!env || !*env) return 1;
  const long long n = ParseInt(env, "UNISHAP_THREADS");
  if (n < 1) throw ConfigError("UNISHAP_THREADS must be positive");
  return static_cast<int>(n);
}

void RunSweep(const ExperimentSpec& spec) {
  ValidateSpec(spec);
  const GamePtr game = ParseGameSpec(spec.game, spec.batch_size);
  const int d = game->dimension();
  const bool need_exact = Wants(spec, Metric::kMse) || Wants(spec, Metric::kRankCorr);
  if (need_exact && !HasReferenceShapley(*game)) {
    throw CapabilityError("mse and rank_corr need d <= " +
                          std::to_string(kMaxBruteforceDimension) +
                          " or a game with known Shapley values");
  }
  const int top_k = spec.top_k > 0 ? std::min(spec.top_k, d) : d;
  std::optional<Eigen::VectorXd> exact;
  if (need_exact) exact = ReferenceShapley(*game);
  const double alpha = (game->FullValue() - game->EmptyValue()) / d;

  // Theory reports depend only on (tau, lambda).
  std::map<std::pair<double, double>, std::optional<TheoryReport>> theory;
  if (Wants(spec, Metric::kTheoryReport)) {
    for (const auto& method : spec.methods) {
      const double lambda = ResolveLambda(method.config, alpha);
      auto key = std::make_pair(method.config.tau, lambda);
      if (!theory.count(key)) {
        theory[key] = Theory(*game, method.config.tau, lambda, spec.eps, spec.delta);
      }
    }
  }

  const std::vector<Task> tasks = MakeTasks(spec);
  struct Row {
    std::string status = "ok";
    std::size_t rows = 0;
    std::string solver;
    double gap = kNaN, sq_error = kNaN, nmse = kNaN;
    int raw = 0;
    double ins = kNaN, del = kNaN, rank = kNaN;
    double seconds = 0.0;
  };
  std::vector<Row> rows(tasks.size());
  const int threads = game->concurrent() ? spec.threads : 1;
  RunTasks(tasks.size(), threads, [&](std::size_t i) {
    Row& row = rows[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      const ShapleyEstimate est = Estimate(*game, TaskConfig(spec, tasks[i]));
      row.rows = est.rows;
      row.solver = est.solver;
      row.gap = est.efficiency_gap;
      if (exact) {
        row.sq_error = (est.phi - *exact).squaredNorm();
        const double denom = exact->squaredNorm();
        row.raw = denom == 0.0 ? 1 : 0;
        row.nmse = row.raw ? row.sq_error : row.sq_error / denom;
        if (Wants(spec, Metric::kRankCorr)) row.rank = RankCorrelation(est.phi, *exact);
      }
      if (Wants(spec, Metric::kInsertionAuc)) row.ins = InsertionAuc(*game, est.phi, top_k);
      if (Wants(spec, Metric::kDeletionAuc)) row.del = DeletionAuc(*game, est.phi, top_k);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  EnsureDir(spec.out_dir);
  const std::string game_field = CsvField(game->Describe());
  {
    std::ofstream out = OpenOut(spec.out_dir + "/results.csv");
    out << "game,d," << ConfigColumnsHeader()
        << ",lambda_value,m,seed,status,rows,solver,efficiency_gap,sq_error,nmse,nmse_is_raw,"
           "insertion_auc,deletion_auc,rank_corr,gamma_b,gamma_proj,eta,bound_matvec,"
           "bound_regression\n";
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const Method& method = spec.methods[tasks[i].method];
      const Row& r = rows[i];
      const double lambda = ResolveLambda(method.config, alpha);
      std::optional<TheoryReport> th;
      if (auto it = theory.find({method.config.tau, lambda}); it != theory.end()) th = it->second;
      out << game_field << ',' << d << ',' << ConfigColumns(method) << ','
          << FormatNumber(lambda) << ',' << tasks[i].m << ',' << tasks[i].seed << ','
          << CsvField(r.status) << ',' << r.rows << ',' << r.solver << ','
          << Num(r.gap) << ',' << Num(r.sq_error) << ',' << Num(r.nmse) << ','
          << (exact ? std::to_string(r.raw) : "") << ',' << Num(r.ins) << ','
          << Num(r.del) << ',' << Num(r.rank) << ','
          << (th ? Num(th->gamma_b) : "") << ',' << (th ? Num(th->gamma_proj) : "") << ','
          << (th ? Num(th->eta) : "") << ',' << (th ? Num(th->bound_matvec) : "") << ','
          << (th ? Num(th->bound_regression) : "") << '\n';
    }
  }
  {
    std::ofstream out = OpenOut(spec.out_dir + "/timings.csv");
    out << "method,m,seed,seconds\n";
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      out << CsvField(spec.methods[tasks[i].method].label) << ',' << tasks[i].m << ','
          << tasks[i].seed << ',' << FormatNumber(rows[i].seconds) << '\n';
    }
  }
  {
    std::ofstream out = OpenOut(spec.out_dir + "/summary.csv");
    out << "game,d," << ConfigColumnsHeader()
        << ",m,n_ok,n_failed,nmse_median,nmse_q25,nmse_q75,insertion_auc_median,"
           "insertion_auc_q25,insertion_auc_q75,deletion_auc_median,deletion_auc_q25,"
           "deletion_auc_q75,rank_corr_median,rank_corr_q25,rank_corr_q75\n";
    std::size_t i = 0;
    while (i < tasks.size()) {
      std::size_t j = i;
      std::vector<double> nmse, ins, del, rank;
      int failed = 0;
      while (j < tasks.size() && tasks[j].method == tasks[i].method && tasks[j].m == tasks[i].m) {
        const Row& r = rows[j];
        if (r.status != "ok") {
          ++failed;
        } else {
          if (!std::isnan(r.nmse)) nmse.push_back(r.nmse);
          if (!std::isnan(r.ins)) ins.push_back(r.ins);
          if (!std::isnan(r.del)) del.push_back(r.del);
          if (!std::isnan(r.rank)) rank.push_back(r.rank);
        }
        ++j;
      }
      const int ok = static_cast<int>(j - i) - failed;
      out << game_field << ',' << d << ',' << ConfigColumns(spec.methods[tasks[i].method])
          << ',' << tasks[i].m << ',' << ok << ',' << failed;
      for (auto* v : {&nmse, &ins, &del, &rank}) {
        std::sort(v->begin(), v->end());
        out << ',' << Num(Quantile(*v, 0.5)) << ',' << Num(Quantile(*v, 0.25)) << ','
            << Num(Quantile(*v, 0.75));
      }
      out << '\n';
      i = j;
    }
  }
}

void RunFaithfulness(const ExperimentSpec& spec) {
  ValidateSpec(spec);
  const GamePtr game = ParseGameSpec(spec.game, spec.batch_size);
  const int d = game->dimension();
  const int top_k = spec.top_k > 0 ? std::min(spec.top_k, d) : d;
  std::optional<Eigen::VectorXd> exact;
  if (HasReferenceShapley(*game)) exact = ReferenceShapley(*game);

  const std::vector<Task> tasks = MakeTasks(spec);
  struct Row {
    std::string status = "ok";
    double ins = kNaN, del = kNaN, rank = kNaN;
  };
  std::vector<Row> rows(tasks.size());
  const int threads = game->concurrent() ? spec.threads : 1;
  RunTasks(tasks.size(), threads, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      const ShapleyEstimate est = Estimate(*game, TaskConfig(spec, tasks[i]));
      row.ins = InsertionAuc(*game, est.phi, top_k);
      row.del = DeletionAuc(*game, est.phi, top_k);
      if (exact) row.rank = RankCorrelation(est.phi, *exact);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  });

  EnsureDir(spec.out_dir);
  const std::string game_field = CsvField(game->Describe());
  std::ofstream out = OpenOut(spec.out_dir + "/metrics.csv");
  out << "game,d," << ConfigColumnsHeader()
      << ",m,seed,status,top_k,insertion_auc,deletion_auc,rank_corr\n";
  if (exact) {
    const double ins = InsertionAuc(*game, *exact, top_k);
    const double del = DeletionAuc(*game, *exact, top_k);
    out << game_field << ',' << d << ",exact,,,,,,,0,0,ok," << top_k << ','
        << Num(ins) << ',' << Num(del) << ',' << Num(RankCorrelation(*exact, *exact)) << '\n';
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Row& r = rows[i];
    out << game_field << ',' << d << ',' << ConfigColumns(spec.methods[tasks[i].method]) << ','
        << tasks[i].m << ',' << tasks[i].seed << ',' << CsvField(r.status) << ',' << top_k
        << ',' << Num(r.ins) << ',' << Num(r.del) << ',' << Num(r.rank) << '\n';
  }

  std::ofstream sum = OpenOut(spec.out_dir + "/metrics_summary.csv");
  sum << "game,d," << ConfigColumnsHeader()
      << ",m,n_ok,insertion_auc_median,insertion_auc_q25,insertion_auc_q75,"
         "deletion_auc_median,deletion_auc_q25,deletion_auc_q75,rank_corr_median,"
         "rank_corr_q25,rank_corr_q75\n";
  std::size_t i = 0;
  while (i < tasks.size()) {
    std::size_t j = i;
    std::vector<double> ins, del, rank;
    while (j < tasks.size() && tasks[j].method == tasks[i].method && tasks[j].m == tasks[i].m) {
      if (rows[j].status == "ok") {
        ins.push_back(rows[j].ins);
        del.push_back(rows[j].del);
        if (!std::isnan(rows[j].rank)) rank.push_back(rows[j].rank);
      }
      ++j;
    }
    sum << game_field << ',' << d << ',' << ConfigColumns(spec.methods[tasks[i].method]) << ','
        << tasks[i].m << ',' << ins.size();
    for (auto* v : {&ins, &del, &rank}) {
      std::sort(v->begin(), v->end());
      sum << ',' << Num(Quantile(*v, 0.5)) << ',' << Num(Quantile(*v, 0.25)) << ','
          << Num(Quantile(*v, 0.75));
    }
    sum << '\n';
    i = j;
  }
}

ShapleyEstimate RunEstimate(const EstimateRun& run) {
  if (run.out_dir.empty()) throw ConfigError("missing output directory");
  const GamePtr game = ParseGameSpec(run.game, run.batch_size);
  const ShapleyEstimate est = Estimate(*game, run.config);
  EnsureDir(run.out_dir);
  {
    std::ofstream out = OpenOut(run.out_dir + "/phi.csv");
    out << "feature,phi\n";
    for (Eigen::Index j = 0; j < est.phi.size(); ++j) {
      out << j << ',' << FormatNumber(est.phi[j]) << '\n';
    }
  }
  if (run.write_sketch) {
    const Sketch sketch = DrawSketch(run.config, game->dimension());
    std::ofstream out = OpenOut(run.out_dir + "/sketch.csv");
    WriteSketchCsv(sketch, out);
  }
  nlohmann::ordered_json meta;
  const EstimatorConfig& c = run.config;
  meta["game"] = game->Describe();
  meta["d"] = game->dimension();
  meta["config"] = {{"kind", ToString(c.kind)},
                    {"tau", c.tau},
                    {"strategy", ToString(c.strategy)},
                    {"paired", c.paired},
                    {"lambda", LambdaToString(c)},
                    {"m", c.m},
                    {"seed", c.seed},
                    {"maxval", c.maxval}};
  meta["lambda_value"] = est.lambda;
  meta["alpha"] = est.alpha;
  meta["rows"] = est.rows;
  meta["evaluations"] = est.evaluations;
  meta["efficiency_gap"] = est.efficiency_gap;
  meta["solver"] = est.solver;
  std::ofstream out = OpenOut(run.out_dir + "/phi.meta.json");
  out << meta.dump(2) << '\n';
  return est;
}

}  // namespace unishap::cli
