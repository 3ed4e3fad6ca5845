#include "unishap/estimators.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "unishap/combinatorics.h"
#include "unishap/errors.h"

namespace unishap {
namespace {

constexpr std::size_t kBlockRows = 1024;
constexpr double kRankTolerance = 1e-10;

// Rows are consumed in fixed blocks; each block is reduced into its own
// partial starting from zero and partials are added in block order, so the
// result does not depend on the worker count.
template <typename Partial, typename Fill, typename Merge>
void BlockReduce(std::size_t rows, int threads, Partial zero, Fill fill,
                 Merge merge) {
  const std::size_t blocks = (rows + kBlockRows - 1) / kBlockRows;
  const std::size_t width = std::max(1, threads);
  std::vector<Partial> wave;
  for (std::size_t first = 0; first < blocks; first += width) {
    const std::size_t count = std::min(width, blocks - first);
    wave.assign(count, zero);
    auto work = [&](std::size_t k) {
      const std::size_t begin = (first + k) * kBlockRows;
      fill(begin, std::min(rows, begin + kBlockRows), wave[k]);
    };
    if (count == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < count; ++k) pool.emplace_back(work, k);
      for (auto& t : pool) t.join();
    }
    for (auto& p : wave) merge(p);
  }
}

void EvaluateRows(const Game& game, const SubsetBatch& batch, int threads,
                  std::vector<double>& out) {
  out.assign(batch.size(), 0.0);
  if (threads <= 1 || !game.concurrent() || batch.size() < 2 * kBlockRows) {
    game.EvaluateBatch(batch, out);
    return;
  }
  const std::size_t parts = static_cast<std::size_t>(threads);
  const std::size_t per = (batch.size() + parts - 1) / parts;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t begin = p * per;
    const std::size_t end = std::min(batch.size(), begin + per);
    if (begin >= end) break;
    pool.emplace_back([&, p, begin, end] {
      try {
        SubsetBatch part(batch.dimension());
        part.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) part.Append(batch[i]);
        game.EvaluateBatch(part, std::span<double>(out.data() + begin, end - begin));
      } catch (...) {
        errors[p] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Per-row factor w(S) d/(d-1) k(S) r(S), and the smaller side of the row.
struct RowTerms {
  std::vector<double> weight;  // w(S) d/(d-1) k(S)
  std::vector<double> signed_residual;  // residual, negated for flipped rows
};

RowTerms MakeRowTerms(const Sketch& sketch, const SketchedRhs& rhs) {
  const std::size_t n = sketch.size();
  RowTerms t;
  t.weight.resize(n);
  t.signed_residual.resize(n);
  const int d = sketch.dimension();
  for (std::size_t i = 0; i < n; ++i) {
    const int h = sketch.subsets.SizeOf(i);
    if (h == 0 || h == d) {
      t.weight[i] = 0.0;
      t.signed_residual[i] = 0.0;
      continue;
    }
    t.weight[i] = std::exp(sketch.log_weights[i] + 2.0 * rhs.log_scale[i]);
    t.signed_residual[i] = 2 * h > d ? -rhs.residual[i] : rhs.residual[i];
    if (!std::isfinite(t.weight[i])) {
      throw std::overflow_error("row weight overflow in sketch row " +
                                std::to_string(i));
    }
  }
  return t;
}

// Indices of the smaller side of row i (members, or non-members when the
// coalition holds more than half of the players).
void SmallSide(const SubsetBatch& batch, std::size_t i, std::vector<int>& idx) {
  idx.clear();
  const bool flip = 2 * batch.SizeOf(i) > batch.dimension();
  batch[i].CollectIndices(!flip, idx);
}

void CheckShapes(const Sketch& sketch, const SketchedRhs& rhs) {
  if (rhs.residual.size() != sketch.size() || rhs.log_scale.size() != sketch.size()) {
    throw std::invalid_argument("right-hand side does not match the sketch");
  }
}

ShapleyEstimate Finish(Eigen::VectorXd centered, const Sketch& sketch,
                       const SketchedRhs& rhs, const char* name,
                       std::string solver) {
  centered.array() -= centered.mean();
  ShapleyEstimate est;
  est.phi = centered;
  est.phi.array() += rhs.alpha;
  est.m = sketch.m_nominal;
  est.lambda = rhs.lambda;
  est.alpha = rhs.alpha;
  est.seed = sketch.seed;
  est.estimator = name;
  est.solver = std::move(solver);
  est.rows = sketch.size();
  est.evaluations = static_cast<std::int64_t>(sketch.size()) + 2;
  est.efficiency_gap = std::abs(est.phi.sum() - (rhs.v_full - rhs.v_empty));
  est.config.kind = std::string(name) == "regression" ? EstimatorKind::kRegression
                                                      : EstimatorKind::kMatvec;
  est.config.tau = sketch.tau;
  est.config.strategy = sketch.strategy;
  est.config.paired = sketch.paired;
  est.config.lambda_mode = LambdaMode::kCustom;
  est.config.lambda_value = rhs.lambda;
  est.config.m = sketch.m_nominal;
  est.config.seed = sketch.seed;
  return est;
}

}  // namespace

std::string ToString(EstimatorKind kind) {
  return kind == EstimatorKind::kRegression ? "regression" : "matvec";
}

EstimatorKind ParseEstimatorKind(const std::string& text) {
  if (text == "regression") return EstimatorKind::kRegression;
  if (text == "matvec") return EstimatorKind::kMatvec;
  throw ConfigError("unknown estimator kind '" + text + "'");
}

EstimatorConfig Preset(const std::string& name) {
  EstimatorConfig c;
  c.paired = true;
  if (name == "kernelshap") {
    c.kind = EstimatorKind::kRegression;
    c.tau = 1.0;
    c.lambda_mode = LambdaMode::kAlpha;
    c.strategy = Strategy::kWithReplacement;
  } else if (name == "unbiased_kernelshap") {
    c.kind = EstimatorKind::kMatvec;
    c.tau = 1.0;
    c.lambda_mode = LambdaMode::kZero;
    c.strategy = Strategy::kWithReplacement;
  } else if (name == "leverageshap") {
    c.kind = EstimatorKind::kRegression;
    c.tau = 0.0;
    c.lambda_mode = LambdaMode::kAlpha;
    c.strategy = Strategy::kWithoutReplacement;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

std::string LambdaToString(const EstimatorConfig& config) {
  switch (config.lambda_mode) {
    case LambdaMode::kAlpha:
      return "alpha";
    case LambdaMode::kZero:
      return "zero";
    case LambdaMode::kCustom: {
      std::ostringstream os;
      os.precision(17);
      os << config.lambda_value;
      return os.str();
    }
  }
  return "";
}

void ParseLambda(const std::string& text, EstimatorConfig& config) {
  if (text == "alpha") {
    config.lambda_mode = LambdaMode::kAlpha;
  } else if (text == "zero") {
    config.lambda_mode = LambdaMode::kZero;
  } else {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(value)) {
      throw ConfigError("lambda must be 'alpha', 'zero' or a number, got '" +
                        text + "'");
    }
    config.lambda_mode = LambdaMode::kCustom;
    config.lambda_value = value;
  }
}

double ResolveLambda(const EstimatorConfig& config, double alpha) {
  switch (config.lambda_mode) {
    case LambdaMode::kAlpha:
      return alpha;
    case LambdaMode::kZero:
      return 0.0;
    case LambdaMode::kCustom:
      return config.lambda_value;
  }
  return 0.0;
}

std::string Describe(const EstimatorConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << ToString(c.kind) << " tau=" << c.tau
     << " strategy=" << ToString(c.strategy) << " paired=" << (c.paired ? 1 : 0)
     << " lambda=" << LambdaToString(c) << " m=" << c.m << " seed=" << c.seed
     << " maxval=" << c.maxval;
  return os.str();
}

double SketchedRhs::Entry(std::size_t i) const {
  return std::exp(log_scale.at(i)) * residual.at(i);
}

SketchedRhs BuildRhs(const Sketch& sketch, const Game& game, double lambda,
                     int threads) {
  const int d = sketch.dimension();
  if (game.dimension() != d) {
    throw std::invalid_argument("sketch and game dimensions differ");
  }
  SketchedRhs rhs;
  rhs.v_empty = game.EmptyValue();
  rhs.v_full = game.FullValue();
  rhs.alpha = (rhs.v_full - rhs.v_empty) / d;
  rhs.lambda = lambda;
  std::vector<double> values;
  EvaluateRows(game, sketch.subsets, threads, values);
  rhs.residual.resize(sketch.size());
  rhs.log_scale.resize(sketch.size());
  std::vector<double> scale_by_size(d + 1, -std::numeric_limits<double>::infinity());
  for (int h = 1; h < d; ++h) {
    scale_by_size[h] =
        0.5 * (std::log(double(d)) - std::log(d - 1.0) + LogKernelWeight(d, h));
  }
  for (std::size_t i = 0; i < sketch.size(); ++i) {
    const int h = sketch.subsets.SizeOf(i);
    rhs.residual[i] = values[i] - rhs.v_empty - lambda * h;
    rhs.log_scale[i] = scale_by_size[h];
  }
  return rhs;
}

ShapleyEstimate MatvecEstimate(const Sketch& sketch, const Game& game,
                               double lambda, int threads) {
  return MatvecEstimate(sketch, BuildRhs(sketch, game, lambda, threads), threads);
}

ShapleyEstimate MatvecEstimate(const Sketch& sketch, const SketchedRhs& rhs,
                               int threads) {
  CheckShapes(sketch, rhs);
  const int d = sketch.dimension();
  const RowTerms terms = MakeRowTerms(sketch, rhs);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  BlockReduce(
      sketch.size(), threads, Eigen::VectorXd(Eigen::VectorXd::Zero(d)),
      [&](std::size_t begin, std::size_t end, Eigen::VectorXd& acc) {
        std::vector<int> idx;
        for (std::size_t i = begin; i < end; ++i) {
          const double c = terms.weight[i] * terms.signed_residual[i];
          if (c == 0.0) continue;
          SmallSide(sketch.subsets, i, idx);
          for (int j : idx) acc[j] += c;
        }
      },
      [&](const Eigen::VectorXd& part) { total += part; });
  return Finish(std::move(total), sketch, rhs, "matvec", "none");
}

ShapleyEstimate RegressionEstimate(const Sketch& sketch, const Game& game,
                                   double lambda, int threads) {
  if (sketch.size() == 0) {
    throw std::invalid_argument("regression estimator needs a nonempty sketch");
  }
  return RegressionEstimate(sketch, BuildRhs(sketch, game, lambda, threads),
                            threads);
}

ShapleyEstimate RegressionEstimate(const Sketch& sketch, const SketchedRhs& rhs,
                                   int threads) {
  CheckShapes(sketch, rhs);
  if (sketch.size() == 0) {
    throw std::invalid_argument("regression estimator needs a nonempty sketch");
  }
  const int d = sketch.dimension();
  const RowTerms terms = MakeRowTerms(sketch, rhs);

  // A = sum c y y^T (lower triangle only) and a = sum c r (+-y) over the
  // smaller side y of each row; U^T S^T S U = Q^T A Q.
  struct Partial {
    Eigen::MatrixXd gram;
    Eigen::VectorXd rhs;
  };
  Partial total{Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d)};
  BlockReduce(
      sketch.size(), threads,
      Partial{Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d)},
      [&](std::size_t begin, std::size_t end, Partial& acc) {
        std::vector<int> idx;
        for (std::size_t i = begin; i < end; ++i) {
          const double c = terms.weight[i];
          if (c == 0.0) continue;
          SmallSide(sketch.subsets, i, idx);
          const double cr = c * terms.signed_residual[i];
          const std::size_t k = idx.size();
          for (std::size_t a = 0; a < k; ++a) {
            double* col = acc.gram.col(idx[a]).data();
            for (std::size_t b = a; b < k; ++b) col[idx[b]] += c;
            acc.rhs[idx[a]] += cr;
          }
        }
      },
      [&](const Partial& part) {
        total.gram += part.gram;
        total.rhs += part.rhs;
      });
  total.gram.triangularView<Eigen::StrictlyUpper>() =
      total.gram.triangularView<Eigen::StrictlyLower>().transpose();

  const ImplicitQ q(d);
  const Eigen::MatrixXd g = q.Congruence(total.gram);
  const Eigen::VectorXd r = q.TransposeApply(total.rhs);

  Eigen::VectorXd x;
  std::string solver;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    const double lo = diag.minCoeff();
    const double hi = diag.maxCoeff();
    ok = lo > 0.0 && (lo * lo) >= kRankTolerance * (hi * hi);
  }
  if (ok) {
    x = llt.solve(r);
    ok = x.allFinite();
    solver = "cholesky";
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double tol = kRankTolerance * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev[i] > tol) inv[i] = 1.0 / ev[i];
    }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    x = v * inv.cwiseProduct(v.transpose() * r);
    solver = "pseudo_inverse";
  }
  return Finish(q.Apply(x), sketch, rhs, "regression", solver);
}

Sketch DrawSketch(const EstimatorConfig& config, int d) {
  const BucketDistribution dist(d, config.tau);
  if (config.strategy == Strategy::kWithReplacement) {
    return SampleWithReplacement(dist, config.m, config.seed, config.paired);
  }
  return SampleWithoutReplacement(dist, config.m, config.seed, config.paired,
                                  config.maxval);
}

ShapleyEstimate Estimate(const Game& game, const EstimatorConfig& config) {
  const int d = game.dimension();
  const Sketch sketch = DrawSketch(config, d);
  const double alpha = (game.FullValue() - game.EmptyValue()) / d;
  const double lambda = ResolveLambda(config, alpha);
  ShapleyEstimate est =
      config.kind == EstimatorKind::kRegression
          ? RegressionEstimate(sketch, game, lambda, config.threads)
          : MatvecEstimate(sketch, game, lambda, config.threads);
  est.config = config;
  return est;
}

ErrorProxy ErrorEstimate(const ShapleyEstimate& at_m0,
                         const ShapleyEstimate& reference) {
  if (at_m0.phi.size() != reference.phi.size()) {
    throw std::invalid_argument("estimates have different dimensions");
  }
  if (at_m0.m <= 0) throw std::invalid_argument("estimate at m0 has no budget");
  const double ratio = double(reference.m) / double(at_m0.m);
  if (ratio < kMinReferenceRatio) {
    throw std::invalid_argument("reference budget must be at least 10x m0, got ratio " +
                                std::to_string(ratio));
  }
  return {(reference.phi - at_m0.phi).norm(), ratio};
}

}  // namespace unishap
