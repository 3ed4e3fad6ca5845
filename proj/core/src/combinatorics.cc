#include "unishap/combinatorics.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unishap {
namespace {

__extension__ using Uint128 = unsigned __int128;

void CheckSize(int d, int h) {
  if (d < 2) throw std::invalid_argument("dimension must be at least 2");
  if (h < 1 || h > d - 1) {
    throw std::invalid_argument("subset size " + std::to_string(h) +
                                " outside [1, " + std::to_string(d - 1) + "]");
  }
}

// C(n, k) in 128-bit arithmetic, or nullopt once an intermediate would
// exceed `cap`. Each step C(n, i) = C(n, i-1) (n-i+1) / i is exact.
std::optional<Uint128> ExactBinomial(int n, int k,
                                               Uint128 cap) {
  if (k > n - k) k = n - k;
  Uint128 c = 1;
  const Uint128 limit = ~static_cast<Uint128>(0) / (n + 1);
  for (int i = 1; i <= k; ++i) {
    if (c > limit) return std::nullopt;
    c = c * static_cast<Uint128>(n - i + 1) / i;
    if (c > cap) return std::nullopt;
  }
  return c;
}

}  // namespace

double LogBinomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) {
    throw std::invalid_argument("LogBinomial: need 0 <= k <= n");
  }
  k = std::min(k, n - k);
  if (k == 0) return 0.0;
  if (auto exact = ExactBinomial(n, k, ~static_cast<Uint128>(0))) {
    return std::log(static_cast<long double>(*exact));
  }
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

std::optional<std::uint64_t> BinomialIfAtMost(int n, int k, std::uint64_t cap) {
  if (k < 0 || n < 0 || k > n) {
    throw std::invalid_argument("BinomialIfAtMost: need 0 <= k <= n");
  }
  auto c = ExactBinomial(n, k, cap);
  if (!c) return std::nullopt;
  return static_cast<std::uint64_t>(*c);
}

double LogKernelWeight(int d, int h) {
  CheckSize(d, h);
  return std::log(d - 1.0) - LogBinomial(d, h) -
         (std::log(double(h)) + std::log(double(d - h)));
}

double KernelWeight(int d, int h) { return std::exp(LogKernelWeight(d, h)); }

double LogLeverageNormSq(int d, int h) {
  CheckSize(d, h);
  return -LogBinomial(d, h);
}

double LeverageNormSq(int d, int h) { return std::exp(LogLeverageNormSq(d, h)); }

double Harmonic(int n) {
  if (n < 0) throw std::invalid_argument("Harmonic: negative argument");
  double sum = 0.0;
  for (int i = n; i >= 1; --i) sum += 1.0 / i;  // small terms first
  return sum;
}

double GramOffDiagonal(int d) {
  if (d < 2) throw std::invalid_argument("GramOffDiagonal: d must be >= 2");
  return ((d - 1) * Harmonic(d - 2) - (d - 2)) / d;
}

ImplicitQ::ImplicitQ(int d) : d_(d) {
  if (d < 2) throw std::invalid_argument("ImplicitQ: d must be >= 2");
  const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
  v_ = Eigen::VectorXd::Constant(d, -inv_sqrt_d);
  v_[d - 1] += 1.0;
  scale_ = 2.0 / v_.squaredNorm();
}

void ImplicitQ::Reflect(Eigen::VectorXd& y) const {
  y.noalias() -= (scale_ * v_.dot(y)) * v_;
}

Eigen::VectorXd ImplicitQ::Apply(const Eigen::VectorXd& x) const {
  if (x.size() != d_ - 1) {
    throw std::invalid_argument("ImplicitQ::Apply: expected length " +
                                std::to_string(d_ - 1));
  }
  Eigen::VectorXd y(d_);
  y.head(d_ - 1) = x;
  y[d_ - 1] = 0.0;
  Reflect(y);
  return y;
}

Eigen::VectorXd ImplicitQ::TransposeApply(const Eigen::VectorXd& y) const {
  if (y.size() != d_) {
    throw std::invalid_argument("ImplicitQ::TransposeApply: expected length " +
                                std::to_string(d_));
  }
  Eigen::VectorXd z = y;
  Reflect(z);
  return z.head(d_ - 1);
}

Eigen::MatrixXd ImplicitQ::Congruence(const Eigen::MatrixXd& a) const {
  if (a.rows() != d_ || a.cols() != d_) {
    throw std::invalid_argument("ImplicitQ::Congruence: dimension mismatch");
  }
  // H A H = A - s (v w^T + w v^T) + s^2 (v^T w) v v^T with w = A v.
  const Eigen::VectorXd w = a * v_;
  const double vw = v_.dot(w);
  const Eigen::VectorXd p = scale_ * w - (0.5 * scale_ * scale_ * vw) * v_;
  Eigen::MatrixXd out = a;
  out.noalias() -= v_ * p.transpose();
  out.noalias() -= p * v_.transpose();
  return out.topLeftCorner(d_ - 1, d_ - 1);
}

Eigen::MatrixXd ImplicitQ::Dense() const {
  Eigen::MatrixXd q(d_, d_ - 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d_ - 1);
  for (int j = 0; j < d_ - 1; ++j) {
    x.setZero();
    x[j] = 1.0;
    q.col(j) = Apply(x);
  }
  return q;
}

}  // namespace unishap
