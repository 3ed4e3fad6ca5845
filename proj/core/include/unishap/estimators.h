#ifndef UNISHAP_ESTIMATORS_H_
#define UNISHAP_ESTIMATORS_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unishap/games.h"
#include "unishap/sampling.h"

namespace unishap {

enum class EstimatorKind { kRegression, kMatvec };
enum class LambdaMode { kAlpha, kZero, kCustom };

std::string ToString(EstimatorKind kind);
EstimatorKind ParseEstimatorKind(const std::string& text);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kRegression;
  double tau = 0.0;
  Strategy strategy = Strategy::kWithReplacement;
  bool paired = true;
  LambdaMode lambda_mode = LambdaMode::kAlpha;
  double lambda_value = 0.0;  // used by kCustom
  std::int64_t m = 0;
  std::uint64_t seed = 0;
  double maxval = kDefaultMaxval;
  int threads = 1;

  bool operator==(const EstimatorConfig&) const = default;
};

// kernelshap, unbiased_kernelshap or leverageshap. Throws ConfigError.
EstimatorConfig Preset(const std::string& name);

std::string LambdaToString(const EstimatorConfig& config);
// "alpha", "zero" or a decimal number. Throws ConfigError.
void ParseLambda(const std::string& text, EstimatorConfig& config);
double ResolveLambda(const EstimatorConfig& config, double alpha);

// Stable one-line rendering of every config field.
std::string Describe(const EstimatorConfig& config);

struct ShapleyEstimate {
  Eigen::VectorXd phi;
  EstimatorConfig config;
  std::int64_t m = 0;
  double lambda = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string estimator;
  std::string solver;  // "cholesky", "pseudo_inverse" or "none"
  std::size_t rows = 0;
  std::int64_t evaluations = 0;
  double efficiency_gap = 0.0;
};

// Per-row right-hand side of the sketched problem. The entry of the
// orthonormal-form right-hand side is exp(log_scale[i]) * residual[i] where
// residual = v(S) - v(empty) - lambda |S| and
// log_scale = ln sqrt(d/(d-1) k(S)).
struct SketchedRhs {
  std::vector<double> residual;
  std::vector<double> log_scale;
  double alpha = 0.0;
  double lambda = 0.0;
  double v_empty = 0.0;
  double v_full = 0.0;

  double Entry(std::size_t i) const;
};

// Evaluates the game on the sketch rows in one batch.
SketchedRhs BuildRhs(const Sketch& sketch, const Game& game, double lambda,
                     int threads = 1);

// Unbiased estimate Q U^T S^T S b + alpha 1. An empty sketch yields alpha 1.
ShapleyEstimate MatvecEstimate(const Sketch& sketch, const Game& game,
                               double lambda, int threads = 1);
ShapleyEstimate MatvecEstimate(const Sketch& sketch, const SketchedRhs& rhs,
                               int threads = 1);

// Q argmin ||S(U x - b)||^2 + alpha 1 through the (d-1) x (d-1) normal
// equations, with a minimum-norm fallback when they are rank deficient.
ShapleyEstimate RegressionEstimate(const Sketch& sketch, const Game& game,
                                   double lambda, int threads = 1);
ShapleyEstimate RegressionEstimate(const Sketch& sketch, const SketchedRhs& rhs,
                                   int threads = 1);

Sketch DrawSketch(const EstimatorConfig& config, int d);
ShapleyEstimate Estimate(const Game& game, const EstimatorConfig& config);

inline constexpr double kMinReferenceRatio = 10.0;

struct ErrorProxy {
  double value = 0.0;
  double ratio = 0.0;  // m_ref / m0
};

// ||phi_ref - phi_m0|| as a stand-in for the error at m0, with a reference
// run at least ten times larger. Throws std::invalid_argument otherwise.
ErrorProxy ErrorEstimate(const ShapleyEstimate& at_m0,
                         const ShapleyEstimate& reference);

}  // namespace unishap

#endif  // UNISHAP_ESTIMATORS_H_
