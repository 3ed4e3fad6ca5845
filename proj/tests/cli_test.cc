#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "unishap/diagnostics.h"
#include "unishap/games.h"

#ifndef UNISHAP_CLI_BINARY
#error "UNISHAP_CLI_BINARY must name the unishap executable"
#endif
#ifndef UNISHAP_REFERENCE_SERVER
#error "UNISHAP_REFERENCE_SERVER must name the reference game server"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string err;
};

fs::path Scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("unishap_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult RunCli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd =
      std::string(UNISHAP_CLI_BINARY) + " " + args + " 2> '" + err.string() + "' > /dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = Slurp(err);
  return r;
}

using Table = std::vector<std::map<std::string, std::string>>;

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Table ReadCsv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  Table rows;
  if (!std::getline(in, line)) return rows;
  const auto header = SplitCsvLine(line);
  while (std::getline(in, line)) {
    const auto fields = SplitCsvLine(line);
    EXPECT_EQ(fields.size(), header.size()) << line;
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i) row[header[i]] = fields[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TEST(CliEstimateTest, AdversarialLeverageRun) {
  const fs::path dir = Scratch("estimate");
  const RunResult r = RunCli(
      "estimate --game adversarial:d=64,n=2,xi=1,chi=0 --preset leverageshap --m 1024 --seed 7 "
      "--out " + dir.string(),
      dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const Table phi = ReadCsv(dir / "phi.csv");
  ASSERT_EQ(phi.size(), 64u);
  double sum = 0.0;
  for (const auto& row : phi) sum += std::stod(row.at("phi"));
  EXPECT_NEAR(sum, 0.0, 1e-12);
  const std::string meta = Slurp(dir / "phi.meta.json");
  EXPECT_NE(meta.find("\"solver\""), std::string::npos);
  EXPECT_NE(meta.find("\"efficiency_gap\""), std::string::npos);
}

TEST(CliEstimateTest, PresetMatchesExplicitFlags) {
  const fs::path a = Scratch("preset");
  const fs::path b = Scratch("explicit");
  const std::string common = "estimate --game random:d=10,seed=4 --m 64 --seed 11 --write-sketch ";
  ASSERT_EQ(RunCli(common + "--preset kernelshap --out " + a.string(), a).exit_code, 0);
  ASSERT_EQ(RunCli(common + "--kind regression --tau 1 --lambda alpha --paired --out " + b.string(), b)
                .exit_code,
            0);
  for (const char* f : {"phi.csv", "phi.meta.json", "sketch.csv"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
    EXPECT_FALSE(Slurp(a / f).empty()) << f;
  }
}

TEST(CliEstimateTest, ThreadCountDoesNotChangeOutput) {
  const fs::path a = Scratch("one_thread");
  const fs::path b = Scratch("three_threads");
  const std::string common =
      "estimate --game random:d=14,seed=2 --preset leverageshap --m 5000 --seed 3 ";
  ASSERT_EQ(RunCli(common + "--threads 1 --out " + a.string(), a).exit_code, 0);
  ASSERT_EQ(RunCli(common + "--threads 3 --out " + b.string(), b).exit_code, 0);
  EXPECT_EQ(Slurp(a / "phi.csv"), Slurp(b / "phi.csv"));
  EXPECT_EQ(Slurp(a / "phi.meta.json"), Slurp(b / "phi.meta.json"));
}

TEST(CliErrorsTest, ExitCodesByCategory) {
  const fs::path dir = Scratch("errors");
  const std::string missing = (dir / "no_such_table.csv").string();
  RunResult r = RunCli("estimate --game table:" + missing + " --preset kernelshap --m 8 --out " +
                        dir.string(),
                    dir);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;

  r = RunCli("estimate --game random:d=5 --preset nonsense --m 8 --out " + dir.string(), dir);
  EXPECT_EQ(r.exit_code, 2);
  r = RunCli("estimate --game random:d=5 --m 8 --bogus-flag --out " + dir.string(), dir);
  EXPECT_EQ(r.exit_code, 2);
  r = RunCli("estimate --game random:d=5 --preset kernelshap --m 7 --out " + dir.string(), dir);
  EXPECT_EQ(r.exit_code, 2);

  const std::string server = UNISHAP_REFERENCE_SERVER;
  r = RunCli("estimate --game 'external:d=6,cmd=" + server +
              " --d 6 --fault exit --fault-after 0' --preset kernelshap --m 8 --out " +
              dir.string(),
          dir);
  EXPECT_EQ(r.exit_code, 3) << r.err;

  const fs::path spec = dir / "capability.spec";
  WriteFile(spec, "game=external:d=30,cmd=" + server +
                      " --d 30\npreset=kernelshap\nm=64\nseeds=1\nmetrics=mse\nout=" +
                      (dir / "cap_out").string() + "\n");
  r = RunCli("sweep " + spec.string(), dir);
  EXPECT_EQ(r.exit_code, 4) << r.err;
}

TEST(CliSweepTest, DeterministicAcrossRunsAndThreads) {
  const fs::path dir = Scratch("sweep_det");
  const std::string body =
      "game=random:d=8,seed=5\npreset=kernelshap\npreset=leverageshap\nkind=matvec\n"
      "tau=0,0.5\nlambda=zero\nm=32,128\nseeds=1..6\nmetrics=mse,rank_corr,insertion_auc,"
      "deletion_auc,theory_report\n";
  WriteFile(dir / "a.spec", body + "out=" + (dir / "a").string() + "\nthreads=1\n");
  WriteFile(dir / "b.spec", body + "out=" + (dir / "b").string() + "\nthreads=1\n");
  WriteFile(dir / "c.spec", body + "out=" + (dir / "c").string() + "\nthreads=3\n");
  for (const char* s : {"a", "b", "c"}) {
    const RunResult r = RunCli(std::string("sweep ") + (dir / (std::string(s) + ".spec")).string(), dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  const std::string results = Slurp(dir / "a" / "results.csv");
  EXPECT_EQ(results, Slurp(dir / "b" / "results.csv"));
  EXPECT_EQ(results, Slurp(dir / "c" / "results.csv"));
  EXPECT_EQ(Slurp(dir / "a" / "summary.csv"), Slurp(dir / "c" / "summary.csv"));

  const Table rows = ReadCsv(dir / "a" / "results.csv");
  ASSERT_EQ(rows.size(), 4u * 2u * 6u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.at("status"), "ok");
    for (const char* col : {"game", "method", "kind", "tau", "strategy", "paired", "lambda",
                            "lambda_value", "m", "seed", "gamma_b", "eta"}) {
      EXPECT_FALSE(row.at(col).empty()) << col;
    }
  }
  EXPECT_EQ(ReadCsv(dir / "a" / "summary.csv").size(), 4u * 2u);
}

TEST(CliSweepTest, TheoryColumnsMatchDiagnostics) {
  const fs::path dir = Scratch("sweep_theory");
  WriteFile(dir / "t.spec", "game=random:d=7,seed=9\nkind=matvec\ntau=0.5\nlambda=0.25\nm=16\n"
                            "seeds=1\nmetrics=theory_report\neps=0.2\ndelta=0.05\nout=" +
                                (dir / "out").string() + "\n");
  ASSERT_EQ(RunCli("sweep " + (dir / "t.spec").string(), dir).exit_code, 0);
  const Table rows = ReadCsv(dir / "out" / "results.csv");
  ASSERT_EQ(rows.size(), 1u);
  auto game = unishap::RandomTabularGame(7, 9);
  const auto report = unishap::ComputeTheoryReport(*game, 0.5, 0.25, 0.2, 0.05);
  EXPECT_NEAR(std::stod(rows[0].at("gamma_b")), report.gamma_b, 1e-12 * report.gamma_b);
  EXPECT_NEAR(std::stod(rows[0].at("gamma_proj")), report.gamma_proj, 1e-12 * report.gamma_proj);
  EXPECT_NEAR(std::stod(rows[0].at("eta")), report.eta, 1e-12 * report.eta);
  EXPECT_NEAR(std::stod(rows[0].at("bound_regression")), report.bound_regression,
              1e-12 * report.bound_regression);
}

TEST(CliSweepTest, MedianErrorFallsWithBudget) {
  const fs::path dir = Scratch("sweep_trend");
  WriteFile(dir / "t.spec", "game=random:d=12,seed=1\nkind=regression\ntau=0\n"
                            "strategy=without_replacement\nm=256,1024,4096\nseeds=1..100\n"
                            "metrics=mse\nout=" + (dir / "out").string() + "\n");
  const RunResult r = RunCli("sweep " + (dir / "t.spec").string(), dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const Table summary = ReadCsv(dir / "out" / "summary.csv");
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_GT(std::stod(summary[0].at("nmse_median")), std::stod(summary[1].at("nmse_median")));
  EXPECT_GT(std::stod(summary[1].at("nmse_median")), std::stod(summary[2].at("nmse_median")));
}

TEST(CliSweepTest, PartialFailuresAreRecorded) {
  const fs::path dir = Scratch("sweep_partial");
  // A paired with-replacement sketch needs an even budget; m=5 fails alone.
  WriteFile(dir / "t.spec", "game=random:d=6,seed=1\nm=5,8\nseeds=1..2\nmetrics=mse\nout=" +
                                (dir / "out").string() + "\n");
  ASSERT_EQ(RunCli("sweep " + (dir / "t.spec").string(), dir).exit_code, 0);
  const Table rows = ReadCsv(dir / "out" / "results.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NE(rows[0].at("status"), "ok");
  EXPECT_EQ(rows[2].at("status"), "ok");
}

TEST(CliFaithfulnessTest, ExactRowAndInterchangeableFeatures) {
  const fs::path dir = Scratch("faith");
  const RunResult r = RunCli(
      "faithfulness --game random:d=9,seed=2 --preset kernelshap --preset leverageshap --m 64 "
      "--seeds 1..3 --out " + dir.string(),
      dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const Table rows = ReadCsv(dir / "metrics.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 3u);
  EXPECT_EQ(rows[0].at("method"), "exact");
  EXPECT_DOUBLE_EQ(std::stod(rows[0].at("rank_corr")), 1.0);

  const fs::path flat = Scratch("faith_flat");
  ASSERT_EQ(RunCli("faithfulness --game adversarial:d=16,n=2,xi=0,chi=0.5 --preset kernelshap "
                "--preset unbiased_kernelshap --m 32 --seeds 1..4 --out " + flat.string(),
                flat)
                .exit_code,
            0);
  const Table flat_rows = ReadCsv(flat / "metrics.csv");
  ASSERT_FALSE(flat_rows.empty());
  for (const auto& row : flat_rows) {
    EXPECT_NEAR(std::stod(row.at("insertion_auc")), std::stod(flat_rows[0].at("insertion_auc")),
                1e-12);
  }
}

TEST(CliFaithfulnessTest, RankCorrelationImprovesWithBudget) {
  const fs::path dir = Scratch("faith_trend");
  const RunResult r = RunCli(
      "faithfulness --game 'additive:d=64,seed=3+adversarial:d=64,n=2,xi=1,chi=0' --kind "
      "regression --tau 0 --m 256 --m 1024 --m 4096 --m 16384 --seeds 1..20 --out " +
          dir.string(),
      dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const Table summary = ReadCsv(dir / "metrics_summary.csv");
  ASSERT_EQ(summary.size(), 4u);
  for (std::size_t i = 1; i < summary.size(); ++i) {
    EXPECT_GE(std::stod(summary[i].at("rank_corr_median")),
              std::stod(summary[i - 1].at("rank_corr_median")));
  }
}

}  // namespace
