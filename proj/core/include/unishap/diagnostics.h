#ifndef UNISHAP_DIAGNOSTICS_H_
#define UNISHAP_DIAGNOSTICS_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "unishap/games.h"
#include "unishap/sampling.h"

namespace unishap {

inline constexpr int kMaxDiagnosticDimension = 20;

// Vectors over coalitions are indexed by bitmask (length 2^d); entries for
// the empty and the full coalition are ignored.

// gamma(z) = sum_S (||u_S||^2 / p_S) z_S^2 and eta = max_S ||u_S||^2 / p_S
// by direct summation. Throws CapabilityError for d > 20.
double GammaBruteforce(const BucketDistribution& dist, const std::vector<double>& z);
double EtaBruteforce(const BucketDistribution& dist);

// Per-size sums of z_S^2, indexed by size (length d+1).
std::vector<double> BucketSquareSums(int d, const std::vector<double>& z);

// gamma from per-size square sums: N_tau sum_h (h(d-h))^tau sq[h].
double GammaClosedForm(double tau, int d, const std::vector<double>& bucket_sq_sums);
// eta = N_tau max_h (h(d-h))^tau.
double EtaClosedForm(double tau, int d);

// Full orthonormal-form right-hand side
// b_S = sqrt(d/(d-1) k(S)) (v(S) - v(empty) - lambda |S|).
std::vector<double> FullRhs(const Game& game, double lambda);
// (I - U U^T) b.
std::vector<double> ProjectOutRange(int d, const std::vector<double>& b);

struct TheoryReport {
  int d = 0;
  double tau = 0.0;
  double lambda = 0.0;
  double gamma_b = 0.0;
  double gamma_proj = 0.0;
  double eta = 0.0;
  // Sample sizes from the error bounds with every hidden constant set to 1;
  // order-of-magnitude diagnostics only.
  double bound_matvec = 0.0;
  double bound_regression = 0.0;
};

// m_matvec = gamma_b / (delta eps^2),
// m_regression = gamma_proj / (delta eps^2) + eta ln(d / delta).
TheoryReport SampleComplexityBounds(int d, double tau, double lambda,
                                    double gamma_b, double gamma_proj,
                                    double eta, double eps, double delta);

// Brute-force report for a game with d <= 20.
TheoryReport ComputeTheoryReport(const Game& game, double tau, double lambda,
                                 double eps, double delta);

// gamma(b) for the adversarial game at lambda = alpha. Exact plateau sums;
// the projection leaves b unchanged, so this is also gamma of the projected
// right-hand side.
double AdversarialGammaAnalytic(int d, int n, double xi, double chi, double tau);
// Analytic report for the adversarial game at lambda = alpha, any d.
TheoryReport AdversarialTheoryReport(const AdversarialParams& params, double tau,
                                     double eps, double delta);

// Expected squared error of the unpaired with-replacement matvec estimator
// with m rows: (gamma(b) - ||phi* - alpha 1||^2) / m. Requires d <= 16.
double PredictedMatvecMse(const BucketDistribution& dist, const Game& game,
                          double lambda, std::int64_t m);
// Ratio of the above for two distributions (independent of m).
double MsePredictionRatio(const BucketDistribution& first,
                          const BucketDistribution& second, const Game& game,
                          double lambda);

// Mean of ||phi_hat - phi*||^2 over replicates of the unpaired
// with-replacement matvec estimator. Replicate r uses seed
// DeriveSeed(seed, r).
double EmpiricalMatvecMse(const BucketDistribution& dist, const Game& game,
                          const Eigen::VectorXd& exact, double lambda,
                          std::int64_t m, int replicates, std::uint64_t seed);

// Faithfulness. Features are ranked by descending |phi| (ties by index).
// The curve is v at each prefix coalition, rescaled so v(empty) = 0 and
// v([d]) = 1 (left raw when v(empty) = v([d])), integrated by the trapezoid
// rule over an x-axis of [0, 1].
double InsertionAuc(const Game& game, const Eigen::VectorXd& phi, int top_k);
double DeletionAuc(const Game& game, const Eigen::VectorXd& phi, int top_k);

// Spearman correlation of |a| and |b| with average ranks for ties. NaN when
// either side is constant.
double RankCorrelation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace unishap

#endif  // UNISHAP_DIAGNOSTICS_H_
