#include "unishap/diagnostics.h"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "unishap/combinatorics.h"
#include "unishap/errors.h"
#include "unishap/estimators.h"
#include "unishap/exact.h"

namespace unishap {
namespace {

void CheckBruteforce(int d) {
  if (d > kMaxDiagnosticDimension) {
    throw CapabilityError("exhaustive diagnostics need d <= " +
                          std::to_string(kMaxDiagnosticDimension) + ", got " +
                          std::to_string(d));
  }
}

void CheckLength(int d, const std::vector<double>& z) {
  if (z.size() != (std::size_t{1} << d)) {
    throw std::invalid_argument("coalition vector must have length 2^d");
  }
}

// ln (||u_S||^2 / p_S) = ln N_tau + tau ln(h(d-h)).
double LogRatio(double tau, int d, int h, double log_normalizer) {
  return log_normalizer + tau * (std::log(double(h)) + std::log(double(d - h)));
}

double LogNormalizer(double tau, int d) { return BucketDistribution(d, tau).LogNormalizer(); }

}  // namespace

double GammaBruteforce(const BucketDistribution& dist, const std::vector<double>& z) {
  const int d = dist.dimension();
  CheckBruteforce(d);
  CheckLength(d, z);
  std::vector<double> ratio(d, 0.0);
  for (int h = 1; h < d; ++h) {
    ratio[h] = std::exp(LogLeverageNormSq(d, h) - dist.LogSubsetProb(h));
  }
  double sum = 0.0;
  const std::uint64_t n = std::uint64_t{1} << d;
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    sum += ratio[std::popcount(mask)] * z[mask] * z[mask];
  }
  return sum;
}

double EtaBruteforce(const BucketDistribution& dist) {
  const int d = dist.dimension();
  CheckBruteforce(d);
  double eta = 0.0;
  const std::uint64_t n = std::uint64_t{1} << d;
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    const int h = std::popcount(mask);
    eta = std::max(eta, std::exp(LogLeverageNormSq(d, h) - dist.LogSubsetProb(h)));
  }
  return eta;
}

std::vector<double> BucketSquareSums(int d, const std::vector<double>& z) {
  CheckBruteforce(d);
  CheckLength(d, z);
  std::vector<double> sums(d + 1, 0.0);
  const std::uint64_t n = std::uint64_t{1} << d;
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    sums[std::popcount(mask)] += z[mask] * z[mask];
  }
  return sums;
}

double GammaClosedForm(double tau, int d, const std::vector<double>& sq) {
  if (sq.size() != static_cast<std::size_t>(d + 1)) {
    throw std::invalid_argument("bucket sums must have length d+1");
  }
  const double log_n = LogNormalizer(tau, d);
  double sum = 0.0;
  for (int h = 1; h < d; ++h) {
    if (sq[h] == 0.0) continue;
    sum += std::exp(LogRatio(tau, d, h, log_n)) * sq[h];
  }
  return sum;
}

double EtaClosedForm(double tau, int d) {
  // max_h h(d-h) is attained at the middle size(s).
  const double mid = (d % 2 == 0) ? d * double(d) / 4.0 : (d * double(d) - 1.0) / 4.0;
  // N_tau mid^tau = sum_h (mid / (h(d-h)))^tau; every term lies in [1, d].
  double eta = 0.0;
  for (int h = 1; h < d; ++h) eta += std::pow(mid / (double(h) * (d - h)), tau);
  return eta;
}

std::vector<double> FullRhs(const Game& game, double lambda) {
  const int d = game.dimension();
  CheckBruteforce(d);
  if (d < 2) throw std::invalid_argument("FullRhs needs d >= 2");
  const std::uint64_t n = std::uint64_t{1} << d;
  SubsetBatch batch(d);
  batch.reserve(n);
  for (std::uint64_t mask = 0; mask < n; ++mask) batch.AppendMask(mask);
  const std::vector<double> v = game.EvaluateBatch(batch);
  std::vector<double> scale(d, 0.0);
  for (int h = 1; h < d; ++h) {
    scale[h] = std::sqrt(d / (d - 1.0) * KernelWeight(d, h));
  }
  std::vector<double> b(n, 0.0);
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    const int h = std::popcount(mask);
    b[mask] = scale[h] * (v[mask] - v[0] - lambda * h);
  }
  return b;
}

std::vector<double> ProjectOutRange(int d, const std::vector<double>& b) {
  CheckBruteforce(d);
  CheckLength(d, b);
  const std::uint64_t n = std::uint64_t{1} << d;
  std::vector<double> scale(d, 0.0);
  for (int h = 1; h < d; ++h) {
    scale[h] = std::sqrt(d / (d - 1.0) * KernelWeight(d, h));
  }
  // U^T b = Q^T t with t = sum_S scale(S) b_S z_S.
  Eigen::VectorXd t = Eigen::VectorXd::Zero(d);
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    const double c = scale[std::popcount(mask)] * b[mask];
    for (std::uint64_t w = mask; w; w &= w - 1) t[std::countr_zero(w)] += c;
  }
  const ImplicitQ q(d);
  // (U U^T b)_S = scale(S) z_S^T Q Q^T t.
  const Eigen::VectorXd y = q.Apply(q.TransposeApply(t));
  std::vector<double> out(n, 0.0);
  for (std::uint64_t mask = 1; mask + 1 < n; ++mask) {
    double dot = 0.0;
    for (std::uint64_t w = mask; w; w &= w - 1) dot += y[std::countr_zero(w)];
    out[mask] = b[mask] - scale[std::popcount(mask)] * dot;
  }
  return out;
}

TheoryReport SampleComplexityBounds(int d, double tau, double lambda,
                                    double gamma_b, double gamma_proj,
                                    double eta, double eps, double delta) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  TheoryReport r;
  r.d = d;
  r.tau = tau;
  r.lambda = lambda;
  r.gamma_b = gamma_b;
  r.gamma_proj = gamma_proj;
  r.eta = eta;
  r.bound_matvec = gamma_b / (delta * eps * eps);
  r.bound_regression = gamma_proj / (delta * eps * eps) + eta * std::log(d / delta);
  return r;
}

TheoryReport ComputeTheoryReport(const Game& game, double tau, double lambda,
                                 double eps, double delta) {
  const int d = game.dimension();
  const BucketDistribution dist(d, tau);
  const std::vector<double> b = FullRhs(game, lambda);
  const std::vector<double> pb = ProjectOutRange(d, b);
  return SampleComplexityBounds(d, tau, lambda, GammaBruteforce(dist, b),
                       GammaBruteforce(dist, pb), EtaBruteforce(dist), eps, delta);
}

double AdversarialGammaAnalytic(int d, int n, double xi, double chi, double tau) {
  if (n < 1 || 2 * n >= d) throw std::invalid_argument("need 1 <= n < d/2");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  (void)chi;  // the linear part is fit exactly at lambda = alpha = chi
  // Size-h bucket of b holds C(d,h) equal entries whose squares sum to
  // xi^2 h^3 / (d^3 (d-h)).
  const double log_n = LogNormalizer(tau, d);
  const double d3 = double(d) * d * d;
  double sum = 0.0;
  auto add = [&](int h) {
    const double sq = xi * xi * double(h) * h * h / (d3 * (d - h));
    sum += std::exp(LogRatio(tau, d, h, log_n)) * sq;
  };
  for (int h = 1; h <= n; ++h) add(h);
  for (int h = d - n; h <= d - 1; ++h) add(h);
  return sum;
}

TheoryReport AdversarialTheoryReport(const AdversarialParams& p, double tau,
                                     double eps, double delta) {
  const double gamma = AdversarialGammaAnalytic(p.d, p.n, p.xi, p.chi, tau);
  return SampleComplexityBounds(p.d, tau, p.chi, gamma, gamma, EtaClosedForm(tau, p.d),
                       eps, delta);
}

namespace {

double MatvecVarianceNumerator(const BucketDistribution& dist, const Game& game,
                               double lambda) {
  const int d = game.dimension();
  if (d > 16) throw CapabilityError("MSE prediction needs d <= 16");
  const Eigen::VectorXd exact = ExactBruteforce(game).phi;
  const double alpha = (game.FullValue() - game.EmptyValue()) / d;
  const double signal = (exact.array() - alpha).matrix().squaredNorm();
  return GammaBruteforce(dist, FullRhs(game, lambda)) - signal;
}

}  // namespace

double PredictedMatvecMse(const BucketDistribution& dist, const Game& game,
                          double lambda, std::int64_t m) {
  if (m <= 0) throw std::invalid_argument("m must be positive");
  return MatvecVarianceNumerator(dist, game, lambda) / double(m);
}

double MsePredictionRatio(const BucketDistribution& first,
                          const BucketDistribution& second, const Game& game,
                          double lambda) {
  if (first.dimension() != game.dimension() || second.dimension() != game.dimension()) {
    throw std::invalid_argument("distribution and game dimensions differ");
  }
  const double a = MatvecVarianceNumerator(first, game, lambda);
  const double b = MatvecVarianceNumerator(second, game, lambda);
  if (a == b) return 1.0;
  return a / b;
}

double EmpiricalMatvecMse(const BucketDistribution& dist, const Game& game,
                          const Eigen::VectorXd& exact, double lambda,
                          std::int64_t m, int replicates, std::uint64_t seed) {
  if (replicates <= 0) throw std::invalid_argument("replicates must be positive");
  double total = 0.0;
  for (int r = 0; r < replicates; ++r) {
    const Sketch sketch = SampleWithReplacement(dist, m, DeriveSeed(seed, r), false);
    const ShapleyEstimate est = MatvecEstimate(sketch, game, lambda);
    total += (est.phi - exact).squaredNorm();
  }
  return total / replicates;
}

}  // namespace unishap
