#ifndef UNISHAP_SAMPLING_H_
#define UNISHAP_SAMPLING_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "unishap/rng.h"
#include "unishap/subset.h"

namespace unishap {

// Size-symmetric distribution over the 2^d - 2 proper nonempty coalitions:
// p(S) is proportional to (1 / (h (d-h)))^tau / C(d,h) with h = |S|.
// tau = 0 gives leverage scores, tau = 1 the kernel weights and tau = 1/2
// their geometric mean. Everything is held in log space.
class BucketDistribution {
 public:
  BucketDistribution(int d, double tau);

  int dimension() const { return d_; }
  double tau() const { return tau_; }

  // Aggregate mass P(h) of all coalitions of size h, 1 <= h <= d-1.
  double LogBucketProb(int h) const;
  double BucketProb(int h) const;
  // Probability of one particular coalition of size h.
  double LogSubsetProb(int h) const;
  double SubsetProb(int h) const;
  // ln sum_j (1 / (j (d-j)))^tau.
  double LogNormalizer() const { return log_normalizer_; }

 private:
  void CheckSize(int h) const;

  int d_;
  double tau_;
  double log_normalizer_;
  std::vector<double> log_bucket_;  // indexed by h
  std::vector<double> log_subset_;  // indexed by h
};

enum class Strategy { kWithReplacement, kWithoutReplacement };

std::string ToString(Strategy s);
// Accepts "with", "with_replacement", "without", "without_replacement".
Strategy ParseStrategy(const std::string& text);

// Sampling units grouped by coalition size. Paired units are complement
// pairs and fold the sizes h and d-h together; for even d the self-paired
// size d/2 keeps only canonical members (those containing player 0).
struct UnitBucket {
  int size = 0;            // the smaller coalition size of the unit
  double log_count = 0.0;  // ln of the number of units
  double log_mass = 0.0;   // ln of the probability mass of the bucket
  bool canonical = false;  // only coalitions containing player 0
};
std::vector<UnitBucket> UnitBuckets(const BucketDistribution& dist, bool paired);

// Rows of a sampling sketch. Row weights are the squared diagonal entries
// of the sketching matrix, stored as logarithms.
struct Sketch {
  explicit Sketch(int d) : subsets(d) {}

  SubsetBatch subsets;
  std::vector<double> log_weights;
  Strategy strategy = Strategy::kWithReplacement;
  bool paired = true;
  std::int64_t m_nominal = 0;
  std::uint64_t seed = 0;
  double tau = 0.0;
  // Inclusion scale of the without-replacement sampler; 0 otherwise.
  double alpha = 0.0;

  int dimension() const { return subsets.dimension(); }
  std::size_t size() const { return subsets.size(); }
  double Weight(std::size_t i) const;
};

// Writes "mask_base64,weight" rows. Weights are printed in scientific
// notation from their logarithm so that values outside double range survive.
void WriteSketchCsv(const Sketch& sketch, std::ostream& out);
std::string FormatLogValue(double log_value);

// Multinomial-then-uniform sampling. Paired mode draws m/2 complement pairs
// from the folded size distribution and weights each row 1/(m p(S)).
// Unpaired mode draws m coalitions. Paired mode requires an even m.
Sketch SampleWithReplacement(const BucketDistribution& dist, std::int64_t m,
                             std::uint64_t seed, bool paired = true);

inline constexpr double kDefaultMaxval = 1e10;

// Solves sum_i min(n_i, alpha P_i) = units for alpha over the unit buckets.
// Throws CapabilityError when `units` exceeds the total number of units.
double SolveAlpha(const BucketDistribution& dist, double units,
                  bool paired = true);

// Independent-inclusion sampling of distinct coalitions. Each unit is kept
// with probability q = min(1, alpha p_unit); rows get weight 1/q. Per-bucket
// counts are Binomial(n_i, q) when n_i <= maxval and Poisson(alpha P_i)
// beyond that. Requests beyond the number of available units saturate.
Sketch SampleWithoutReplacement(const BucketDistribution& dist, std::int64_t m,
                                std::uint64_t seed, bool paired = true,
                                double maxval = kDefaultMaxval);

// Uniform random coalition of the given size.
Subset UniformSubset(int d, int size, Rng& rng);

// `count` distinct uniformly random coalitions of size h. With `canonical`
// set (requires h = d/2) only coalitions containing player 0 are drawn.
// Enumerates and shuffles when count exceeds half of a slice of at most
// 2^20 coalitions, otherwise rejects duplicates through a hash set.
SubsetBatch SampleDistinctSubsets(int d, int h, std::int64_t count, Rng& rng,
                                  bool canonical = false);

// Bucket count draw used by the without-replacement sampler, exposed for
// statistical tests. `exact_count` is n_i if known.
std::int64_t DrawBucketCount(std::optional<std::uint64_t> exact_count,
                             double inclusion_prob, double poisson_mean,
                             double maxval, Rng& rng);

}  // namespace unishap

#endif  // UNISHAP_SAMPLING_H_
