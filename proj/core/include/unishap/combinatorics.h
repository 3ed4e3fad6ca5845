#ifndef UNISHAP_COMBINATORICS_H_
#define UNISHAP_COMBINATORICS_H_

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace unishap {

// ln C(n, k). Exact (via 128-bit integers) while the coefficient fits,
// log-gamma otherwise. Throws std::invalid_argument unless 0 <= k <= n.
double LogBinomial(int n, int k);

// C(n, k) if it is at most `cap`, else nullopt. Exact integer arithmetic.
std::optional<std::uint64_t> BinomialIfAtMost(int n, int k, std::uint64_t cap);

// ln of the least-squares kernel weight (d-1) / (C(d,h) h (d-h)).
double LogKernelWeight(int d, int h);
double KernelWeight(int d, int h);

// Squared norm of a size-h row of the orthonormal design, 1 / C(d,h).
double LogLeverageNormSq(int d, int h);
double LeverageNormSq(int d, int h);

// H_n = sum_{i=1}^n 1/i with H_0 = 0.
double Harmonic(int n);

// Off-diagonal constant of the weighted Gram matrix of the subset design:
// ((d-1) H_{d-2} - (d-2)) / d.
double GramOffDiagonal(int d);

// Orthonormal basis of the complement of the all-ones vector in R^d,
// stored as one Householder reflector H = I - 2 v v^T / (v^T v) with
// v = e_d - 1/sqrt(d). H maps e_d to 1/sqrt(d); Q is H without its last
// column. Both applies are O(d).
class ImplicitQ {
 public:
  explicit ImplicitQ(int d);

  int dimension() const { return d_; }

  // Q x for x in R^{d-1}.
  Eigen::VectorXd Apply(const Eigen::VectorXd& x) const;
  // Q^T y for y in R^d.
  Eigen::VectorXd TransposeApply(const Eigen::VectorXd& y) const;

  // Q^T A Q for symmetric A (d x d). O(d^2).
  Eigen::MatrixXd Congruence(const Eigen::MatrixXd& a) const;

  // Applies the full reflector in place.
  void Reflect(Eigen::VectorXd& y) const;

  // Explicit d x (d-1) matrix. Tests and small-d oracles only.
  Eigen::MatrixXd Dense() const;

 private:
  int d_;
  Eigen::VectorXd v_;
  double scale_;  // 2 / (v^T v)
};

}  // namespace unishap

#endif  // UNISHAP_COMBINATORICS_H_
