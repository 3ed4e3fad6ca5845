#ifndef UNISHAP_EXACT_H_
#define UNISHAP_EXACT_H_

#include <Eigen/Dense>

#include "unishap/games.h"

namespace unishap {

struct ShapleyVector {
  Eigen::VectorXd phi;
  double efficiency_gap = 0.0;  // |sum(phi) - (v([d]) - v(empty))|
};

inline constexpr int kMaxBruteforceDimension = 25;
inline constexpr int kMaxExactRegressionDimension = 20;

// Marginal-contribution sum over all coalitions. Evaluates the 2^d values in
// one batch, ordered as a Gray code. Throws CapabilityError for d > 25.
ShapleyVector ExactBruteforce(const Game& game);

// Closed-form solution of the full weighted least-squares problem through
// the orthonormal reformulation. The result does not depend on `lambda`.
// Throws CapabilityError for d > 20.
ShapleyVector ExactRegression(const Game& game, double lambda);

// Minimizer of phi^T M phi / 2 - g^T phi subject to sum(phi) = target, via
// the Moore-Penrose pseudo-inverse of M (eigenvalues below 1e-12 of the
// largest are dropped). Throws std::invalid_argument for non-symmetric or
// indefinite M and when 1^T M^+ 1 vanishes.
Eigen::VectorXd LagrangianSolve(const Eigen::MatrixXd& m,
                                const Eigen::VectorXd& g, double target);

struct NormalEquations {
  Eigen::MatrixXd gram;  // (Z')^T Z'
  Eigen::VectorXd rhs;   // (Z')^T b with b_S = sqrt(k(S)) (v(S) - v(empty))
  double target = 0.0;   // v([d]) - v(empty)
};

// Assembles the weighted normal equations over all 2^d - 2 proper
// coalitions. Throws CapabilityError for d > 20.
NormalEquations FullNormalEquations(const Game& game);

// Analytic values if the game has them, else the brute-force oracle.
Eigen::VectorXd ReferenceShapley(const Game& game);
bool HasReferenceShapley(const Game& game);

}  // namespace unishap

#endif  // UNISHAP_EXACT_H_
