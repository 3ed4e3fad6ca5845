#include "unishap/exact.h"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "unishap/combinatorics.h"
#include "unishap/errors.h"

namespace unishap {
namespace {

// v over every mask, indexed by mask.
std::vector<double> AllValues(const Game& game) {
  const int d = game.dimension();
  const std::uint64_t n = std::uint64_t{1} << d;
  SubsetBatch batch(d);
  batch.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) batch.AppendMask(k ^ (k >> 1));
  std::vector<double> values = game.EvaluateBatch(batch);
  std::vector<double> table(n);
  for (std::uint64_t k = 0; k < n; ++k) table[k ^ (k >> 1)] = values[k];
  return table;
}

double Gap(const Eigen::VectorXd& phi, const Game& game) {
  return std::abs(phi.sum() - (game.FullValue() - game.EmptyValue()));
}

}  // namespace

ShapleyVector ExactBruteforce(const Game& game) {
  const int d = game.dimension();
  if (d > kMaxBruteforceDimension) {
    throw CapabilityError("brute-force Shapley values need d <= " +
                          std::to_string(kMaxBruteforceDimension) + ", got " +
                          std::to_string(d));
  }
  const std::vector<double> v = AllValues(game);
  // |S|! (d-|S|-1)! / d! = 1 / (d C(d-1, |S|)).
  std::vector<double> weight(d);
  for (int s = 0; s < d; ++s) {
    weight[s] = std::exp(-std::log(double(d)) - LogBinomial(d - 1, s));
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
  const std::uint64_t n = std::uint64_t{1} << d;
  for (int j = 0; j < d; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    double acc = 0.0;
    for (std::uint64_t mask = 0; mask < n; ++mask) {
      if (mask & bit) continue;
      acc += weight[std::popcount(mask)] * (v[mask | bit] - v[mask]);
    }
    phi[j] = acc;
  }
  return {phi, Gap(phi, game)};
}

ShapleyVector ExactRegression(const Game& game, double lambda) {
  const int d = game.dimension();
  if (d > kMaxExactRegressionDimension) {
    throw CapabilityError("exact regression needs d <= " +
                          std::to_string(kMaxExactRegressionDimension) +
                          ", got " + std::to_string(d));
  }
  const double v_empty = game.EmptyValue();
  const double alpha = (game.FullValue() - v_empty) / d;
  if (d == 1) return {Eigen::VectorXd::Constant(1, alpha), 0.0};

  const std::vector<double> v = AllValues(game);
  const ImplicitQ q(d);
  std::vector<double> row_scale(d);
  for (int h = 1; h < d; ++h) row_scale[h] = d / (d - 1.0) * KernelWeight(d, h);

  // U^T b_lambda = Q^T sum_S (d/(d-1)) k(S) (v(S) - v(empty) - lambda |S|) z_S.
  Eigen::VectorXd t = Eigen::VectorXd::Zero(d);
  const std::uint64_t n = std::uint64_t{1} << d;
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    const int h = std::popcount(mask);
    const double c = row_scale[h] * (v[mask] - v_empty - lambda * h);
    for (std::uint64_t w = mask; w; w &= w - 1) t[std::countr_zero(w)] += c;
  }
  Eigen::VectorXd phi = q.Apply(q.TransposeApply(t));
  phi.array() += alpha;
  return {phi, Gap(phi, game)};
}

Eigen::VectorXd LagrangianSolve(const Eigen::MatrixXd& m,
                                const Eigen::VectorXd& g, double target) {
  const Eigen::Index d = m.rows();
  if (m.cols() != d || g.size() != d) {
    throw std::invalid_argument("LagrangianSolve: dimension mismatch");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300)) {
    throw std::invalid_argument("LagrangianSolve: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw std::invalid_argument("LagrangianSolve: eigendecomposition failed");
  }
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double sigma_max = ev.cwiseAbs().maxCoeff();
  const double tol = 1e-12 * sigma_max;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (ev[i] < -tol) {
      throw std::invalid_argument("LagrangianSolve: matrix is indefinite");
    }
    if (ev[i] > tol) inv[i] = 1.0 / ev[i];
  }
  const Eigen::MatrixXd& vecs = eig.eigenvectors();
  auto pinv_apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return vecs * inv.cwiseProduct(vecs.transpose() * x);
  };
  const Eigen::VectorXd unconstrained = pinv_apply(g);
  const Eigen::VectorXd pinv_ones = pinv_apply(Eigen::VectorXd::Ones(d));
  const double denom = pinv_ones.sum();
  if (!(std::abs(denom) > 1e-14 * std::max(1.0, pinv_ones.cwiseAbs().maxCoeff()))) {
    throw std::invalid_argument("LagrangianSolve: 1^T M^+ 1 vanishes");
  }
  return unconstrained - pinv_ones * ((unconstrained.sum() - target) / denom);
}

NormalEquations FullNormalEquations(const Game& game) {
  const int d = game.dimension();
  if (d > kMaxExactRegressionDimension) {
    throw CapabilityError("full normal equations need d <= " +
                          std::to_string(kMaxExactRegressionDimension));
  }
  if (d < 2) throw std::invalid_argument("full normal equations need d >= 2");
  const std::vector<double> v = AllValues(game);
  const double v_empty = v.front();
  NormalEquations out;
  out.gram = Eigen::MatrixXd::Zero(d, d);
  out.rhs = Eigen::VectorXd::Zero(d);
  out.target = v.back() - v_empty;
  std::vector<double> k(d);
  for (int h = 1; h < d; ++h) k[h] = KernelWeight(d, h);
  const std::uint64_t n = std::uint64_t{1} << d;
  std::vector<int> members;
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    members.clear();
    for (std::uint64_t w = mask; w; w &= w - 1) members.push_back(std::countr_zero(w));
    const double kh = k[members.size()];
    for (int a : members) {
      out.rhs[a] += kh * (v[mask] - v_empty);
      for (int b : members) out.gram(a, b) += kh;
    }
  }
  return out;
}

bool HasReferenceShapley(const Game& game) {
  return game.KnownShapley().has_value() ||
         game.dimension() <= kMaxBruteforceDimension;
}

Eigen::VectorXd ReferenceShapley(const Game& game) {
  if (auto known = game.KnownShapley()) return *known;
  return ExactBruteforce(game).phi;
}

}  // namespace unishap
