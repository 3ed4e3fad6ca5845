#include "unishap/estimators.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "testing/oracles.h"
#include "unishap/combinatorics.h"
#include "unishap/errors.h"
#include "unishap/exact.h"

namespace unishap {
namespace {

Sketch SingleRow(int d, const std::vector<int>& members, double weight = 1.0) {
  Sketch s(d);
  s.subsets.AppendMembers(members);
  s.log_weights.push_back(std::log(weight));
  return s;
}

double MaxAbs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

// Dense restatement of the matrix-vector estimator.
Eigen::VectorXd DenseMatvec(const Sketch& s, const TabularGame& g, double lambda) {
  const int d = s.dimension();
  const double v0 = g.table()[0];
  const double alpha = (g.table().back() - v0) / d;
  Eigen::VectorXd phi = Eigen::VectorXd::Constant(d, alpha);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int h = s.subsets.SizeOf(i);
    const double r = g.table()[s.subsets[i].ToMask()] - v0 - lambda * h;
    const double c = s.Weight(i) * d / (d - 1.0) * KernelWeight(d, h) * r;
    for (int j = 0; j < d; ++j) {
      phi[j] += c * ((s.subsets[i].Contains(j) ? 1.0 : 0.0) - static_cast<double>(h) / d);
    }
  }
  return phi;
}

// The sketched regression as a constrained weighted least-squares problem.
Eigen::VectorXd DenseRegression(const Sketch& s, const TabularGame& g, double lambda) {
  const int d = s.dimension();
  const double v0 = g.table()[0];
  const double alpha = (g.table().back() - v0) / d;
  testing::DenseDesign design;
  design.z = Eigen::MatrixXd::Zero(s.size(), d);
  design.weight.resize(s.size());
  Eigen::VectorXd y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int h = s.subsets.SizeOf(i);
    for (int j : s.subsets[i].Members()) design.z(i, j) = 1.0;
    design.weight[i] = s.Weight(i) * KernelWeight(d, h);
    y[i] = g.table()[s.subsets[i].ToMask()] - v0 - (lambda - alpha) * h;
  }
  return testing::ConstrainedLeastSquares(design, y, g.table().back() - v0);
}

TEST(BuildRhsTest, SpecExamples) {
  SizeGame constant(5, [](int) { return 1.5; }, "constant");
  const Sketch s = SampleWithReplacement(BucketDistribution(5, 0.0), 20, 1);
  const SketchedRhs zero = BuildRhs(s, constant, 0.0);
  const SketchedRhs shifted = BuildRhs(s, constant, 0.7);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int h = s.subsets.SizeOf(i);
    EXPECT_EQ(zero.Entry(i), 0.0);
    EXPECT_NEAR(shifted.Entry(i),
                -0.7 * std::sqrt(5.0 / 4.0) * std::sqrt(KernelWeight(5, h)) * h, 1e-14);
  }

  SizeGame linear(5, [](int h) { return 2.0 * h; }, "linear");
  const SketchedRhs at_alpha = BuildRhs(s, linear, 2.0);
  EXPECT_DOUBLE_EQ(at_alpha.alpha, 2.0);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(at_alpha.Entry(i), 0.0, 1e-14);

  Eigen::Vector2d w(3.0, 1.0);
  AdditiveGame add(w);
  EXPECT_NEAR(BuildRhs(SingleRow(2, {0}), add, 0.0).Entry(0), 3.0, 1e-14);
}

TEST(BuildRhsTest, RejectsDimensionMismatch) {
  SizeGame g(4, [](int h) { return h; }, "g");
  EXPECT_THROW(BuildRhs(SingleRow(5, {1}), g, 0.0), std::invalid_argument);
}

TEST(MatvecTest, EmptySketchGivesAlpha) {
  auto g = RandomTabularGame(6, 3);
  Sketch empty(6);
  const ShapleyEstimate est = MatvecEstimate(empty, *g, 0.0);
  const double alpha = (g->FullValue() - g->EmptyValue()) / 6;
  EXPECT_LE(MaxAbs(est.phi - Eigen::VectorXd::Constant(6, alpha)), 1e-15);
  EXPECT_EQ(est.solver, "none");
  EXPECT_THROW(RegressionEstimate(empty, *g, 0.0), std::invalid_argument);
}

TEST(MatvecTest, MatchesDenseFormula) {
  for (int d : {3, 6, 9}) {
    auto g = RandomTabularGame(d, d);
    for (bool paired : {true, false}) {
      const Sketch s = SampleWithReplacement(BucketDistribution(d, 0.5), 40, 2, paired);
      for (double lambda : {0.0, 0.3}) {
        EXPECT_LE(MaxAbs(MatvecEstimate(s, *g, lambda).phi - DenseMatvec(s, *g, lambda)), 1e-12);
      }
    }
  }
}

TEST(RegressionTest, MatchesConstrainedLeastSquares) {
  for (int d : {4, 7, 10}) {
    auto g = RandomTabularGame(d, 50 + d);
    for (Strategy strategy : {Strategy::kWithReplacement, Strategy::kWithoutReplacement}) {
      const BucketDistribution dist(d, 1.0);
      const Sketch s = strategy == Strategy::kWithReplacement
                           ? SampleWithReplacement(dist, 4 * d, 8)
                           : SampleWithoutReplacement(dist, 4 * d, 8);
      const double alpha = (g->FullValue() - g->EmptyValue()) / d;
      for (double lambda : {0.0, alpha, -1.0}) {
        const ShapleyEstimate est = RegressionEstimate(s, *g, lambda);
        EXPECT_EQ(est.solver, "cholesky");
        EXPECT_LE(MaxAbs(est.phi - DenseRegression(s, *g, lambda)), 1e-9) << d;
      }
    }
  }
}

TEST(RegressionTest, RankDeficientFallsBack) {
  auto g = RandomTabularGame(10, 4);
  const Sketch s = SampleWithReplacement(BucketDistribution(10, 0.0), 2, 3);
  const ShapleyEstimate est = RegressionEstimate(s, *g, 0.0);
  EXPECT_EQ(est.solver, "pseudo_inverse");
  EXPECT_TRUE(est.phi.allFinite());
  EXPECT_LE(est.efficiency_gap, 1e-12);
}

TEST(SaturationTest, BothEstimatorsRecoverExactValues) {
  for (int d : {3, 6, 9}) {
    auto g = RandomTabularGame(d, 70 + d);
    const Eigen::VectorXd exact = ExactBruteforce(*g).phi;
    const std::int64_t proper = (std::int64_t{1} << d) - 2;
    for (double tau : {0.0, 0.5, 1.0}) {
      for (bool paired : {true, false}) {
        const Sketch s = SampleWithoutReplacement(BucketDistribution(d, tau), proper, 1, paired);
        const double alpha = (g->FullValue() - g->EmptyValue()) / d;
        for (double lambda : {0.0, alpha, 2.5}) {
          EXPECT_LE(MaxAbs(MatvecEstimate(s, *g, lambda).phi - exact), 1e-9);
          EXPECT_LE(MaxAbs(RegressionEstimate(s, *g, lambda).phi - exact), 1e-9);
        }
      }
    }
  }
}

TEST(SaturationTest, GloveGame) {
  auto glove = GloveGame(3);
  EstimatorConfig config = Preset("leverageshap");
  config.m = 6;
  const ShapleyEstimate est = Estimate(*glove, config);
  EXPECT_LE(MaxAbs(est.phi - Eigen::Vector3d(1.0 / 6, 1.0 / 6, 2.0 / 3)), 1e-12);
}

TEST(EfficiencyTest, HoldsForEveryConfiguration) {
  auto g = RandomTabularGame(9, 12);
  const double target = g->FullValue() - g->EmptyValue();
  for (auto kind : {EstimatorKind::kRegression, EstimatorKind::kMatvec}) {
    for (auto strategy : {Strategy::kWithReplacement, Strategy::kWithoutReplacement}) {
      for (double tau : {0.0, 0.5, 1.0}) {
        for (auto mode : {LambdaMode::kAlpha, LambdaMode::kZero}) {
          EstimatorConfig c;
          c.kind = kind;
          c.strategy = strategy;
          c.tau = tau;
          c.lambda_mode = mode;
          c.m = 32;
          c.seed = 5;
          const ShapleyEstimate est = Estimate(*g, c);
          EXPECT_NEAR(est.phi.sum(), target, 1e-12);
          EXPECT_LE(est.efficiency_gap, 1e-12);
        }
      }
    }
  }
}

TEST(UnbiasednessTest, MatvecMeanNearExact) {
  const int d = 8;
  auto g = RandomTabularGame(d, 1);
  const Eigen::VectorXd exact = ExactBruteforce(*g).phi;
  const BucketDistribution dist(d, 1.0);
  const int reps = 4000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd phi =
        MatvecEstimate(SampleWithoutReplacement(dist, 64, DeriveSeed(9, r)), *g, 0.0).phi;
    sum += phi;
    sum_sq += phi.cwiseProduct(phi);
  }
  const Eigen::VectorXd mean = sum / reps;
  const Eigen::VectorXd var = sum_sq / reps - mean.cwiseProduct(mean);
  for (int j = 0; j < d; ++j) {
    EXPECT_NEAR(mean[j], exact[j], 4.0 * std::sqrt(var[j] / reps)) << j;
  }
}

TEST(ThreadsTest, IdenticalForAnyWorkerCount) {
  auto g = RandomTabularGame(14, 2);
  for (const char* name : {"kernelshap", "unbiased_kernelshap", "leverageshap"}) {
    EstimatorConfig c = Preset(name);
    c.m = 6000;
    c.seed = 3;
    const Eigen::VectorXd one = Estimate(*g, c).phi;
    c.threads = 4;
    const Eigen::VectorXd four = Estimate(*g, c).phi;
    for (int j = 0; j < 14; ++j) EXPECT_EQ(one[j], four[j]) << name;
  }
}

TEST(PresetTest, ResolvedValues) {
  const EstimatorConfig k = Preset("kernelshap");
  EXPECT_EQ(k.kind, EstimatorKind::kRegression);
  EXPECT_EQ(k.tau, 1.0);
  EXPECT_EQ(k.lambda_mode, LambdaMode::kAlpha);
  EXPECT_TRUE(k.paired);
  const EstimatorConfig u = Preset("unbiased_kernelshap");
  EXPECT_EQ(u.kind, EstimatorKind::kMatvec);
  EXPECT_EQ(u.lambda_mode, LambdaMode::kZero);
  EXPECT_EQ(u.tau, 1.0);
  const EstimatorConfig l = Preset("leverageshap");
  EXPECT_EQ(l.tau, 0.0);
  EXPECT_EQ(l.strategy, Strategy::kWithoutReplacement);
  EXPECT_EQ(l.lambda_mode, LambdaMode::kAlpha);
  EXPECT_THROW(Preset("shapley_magic"), ConfigError);
}

TEST(PresetTest, ByteIdenticalToGenericPath) {
  auto g = RandomTabularGame(11, 6);
  for (const char* name : {"kernelshap", "unbiased_kernelshap", "leverageshap"}) {
    EstimatorConfig preset = Preset(name);
    preset.m = 200;
    preset.seed = 77;
    EstimatorConfig generic;
    generic.kind = preset.kind;
    generic.tau = preset.tau;
    generic.strategy = preset.strategy;
    generic.paired = preset.paired;
    generic.lambda_mode = preset.lambda_mode;
    generic.m = 200;
    generic.seed = 77;
    ASSERT_EQ(preset, generic);
    const Eigen::VectorXd a = Estimate(*g, preset).phi;
    const Eigen::VectorXd b = Estimate(*g, generic).phi;
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0) << name;
  }
}

TEST(LambdaTest, ParseAndResolve) {
  EstimatorConfig c;
  ParseLambda("zero", c);
  EXPECT_EQ(c.lambda_mode, LambdaMode::kZero);
  EXPECT_EQ(ResolveLambda(c, 4.0), 0.0);
  ParseLambda("alpha", c);
  EXPECT_EQ(ResolveLambda(c, 4.0), 4.0);
  ParseLambda("-0.25", c);
  EXPECT_EQ(c.lambda_mode, LambdaMode::kCustom);
  EXPECT_EQ(ResolveLambda(c, 4.0), -0.25);
  EXPECT_EQ(LambdaToString(c), "-0.25");
  EXPECT_THROW(ParseLambda("beta", c), ConfigError);
  EXPECT_THROW(ParseLambda("1.5x", c), ConfigError);
  EXPECT_EQ(ParseEstimatorKind(ToString(EstimatorKind::kMatvec)), EstimatorKind::kMatvec);
  EXPECT_NE(Describe(Preset("kernelshap")), Describe(Preset("leverageshap")));
}

TEST(ErrorEstimateTest, ProxyBehaviour) {
  auto g = RandomTabularGame(10, 31);
  EstimatorConfig c = Preset("kernelshap");
  c.m = 20;
  c.seed = 1;
  const ShapleyEstimate small = Estimate(*g, c);
  EXPECT_THROW(ErrorEstimate(small, small), std::invalid_argument);
  ShapleyEstimate same = small;
  same.m = 200;
  const ErrorProxy zero = ErrorEstimate(small, same);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_DOUBLE_EQ(zero.ratio, 10.0);
}

TEST(ErrorEstimateTest, TracksTrueError) {
  auto g = RandomTabularGame(10, 32);
  const Eigen::VectorXd exact = ExactBruteforce(*g).phi;
  std::vector<double> proxy;
  std::vector<double> truth;
  int within = 0;
  for (int seed = 0; seed < 100; ++seed) {
    EstimatorConfig c = Preset("kernelshap");
    c.m = 20;
    c.seed = DeriveSeed(seed, 0);
    const ShapleyEstimate at_m0 = Estimate(*g, c);
    c.m = 2000;
    c.seed = DeriveSeed(seed, 1);
    const ErrorProxy p = ErrorEstimate(at_m0, Estimate(*g, c));
    const double t = (exact - at_m0.phi).norm();
    proxy.push_back(p.value);
    truth.push_back(t);
    within += p.value <= 3.0 * t && t <= 3.0 * p.value;
  }
  const Eigen::Map<Eigen::VectorXd> x(proxy.data(), proxy.size());
  const Eigen::Map<Eigen::VectorXd> y(truth.data(), truth.size());
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  EXPECT_GT(xc.dot(yc) / (xc.norm() * yc.norm()), 0.5);
  EXPECT_GE(within, 70);
}

TEST(ConvergenceTest, RegressionMedianErrorFallsWithBudget) {
  const int d = 12;
  auto g = RandomTabularGame(d, 12);
  const Eigen::VectorXd exact = ExactBruteforce(*g).phi;
  auto median_nmse = [&](std::int64_t m) {
    std::vector<double> errs;
    for (int seed = 0; seed < 100; ++seed) {
      EstimatorConfig c = Preset("leverageshap");
      c.m = m;
      c.seed = seed;
      errs.push_back((Estimate(*g, c).phi - exact).squaredNorm() / exact.squaredNorm());
    }
    std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
    return errs[50];
  };
  EXPECT_LT(median_nmse(4096), median_nmse(256));
}

}  // namespace
}  // namespace unishap
