#include "unishap/sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "unishap/combinatorics.h"
#include "unishap/errors.h"

namespace unishap {
namespace {

constexpr std::uint64_t kEnumerateLimit = std::uint64_t{1} << 20;

double LogSumExp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

struct WordsHash {
  std::size_t operator()(const std::vector<Word>& w) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (Word x : w) h = SplitMix64(h ^ x);
    return static_cast<std::size_t>(h);
  }
};

// Stream ids for substreams of one sketch seed.
constexpr std::uint64_t kCountStream = 0;
inline std::uint64_t BucketStream(int bucket) { return 1 + bucket; }

}  // namespace

BucketDistribution::BucketDistribution(int d, double tau) : d_(d), tau_(tau) {
  if (d < 2) throw std::invalid_argument("bucket distribution needs d >= 2");
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("tau must lie in [0, 1]");
  }
  std::vector<double> log_terms(d - 1);
  for (int h = 1; h < d; ++h) {
    log_terms[h - 1] = -tau * (std::log(double(h)) + std::log(double(d - h)));
  }
  log_normalizer_ = LogSumExp(log_terms);
  log_bucket_.assign(d, 0.0);
  log_subset_.assign(d, 0.0);
  for (int h = 1; h < d; ++h) {
    log_bucket_[h] = log_terms[h - 1] - log_normalizer_;
    log_subset_[h] = log_bucket_[h] - LogBinomial(d, h);
  }
}

void BucketDistribution::CheckSize(int h) const {
  if (h < 1 || h > d_ - 1) {
    throw std::invalid_argument("coalition size outside [1, d-1]");
  }
}

double BucketDistribution::LogBucketProb(int h) const {
  CheckSize(h);
  return log_bucket_[h];
}
double BucketDistribution::BucketProb(int h) const { return std::exp(LogBucketProb(h)); }
double BucketDistribution::LogSubsetProb(int h) const {
  CheckSize(h);
  return log_subset_[h];
}
double BucketDistribution::SubsetProb(int h) const { return std::exp(LogSubsetProb(h)); }

std::string ToString(Strategy s) {
  return s == Strategy::kWithReplacement ? "with_replacement"
                                         : "without_replacement";
}

Strategy ParseStrategy(const std::string& text) {
  if (text == "with" || text == "with_replacement") return Strategy::kWithReplacement;
  if (text == "without" || text == "without_replacement") {
    return Strategy::kWithoutReplacement;
  }
  throw ConfigError("unknown sampling strategy '" + text + "'");
}

std::vector<UnitBucket> UnitBuckets(const BucketDistribution& dist, bool paired) {
  const int d = dist.dimension();
  std::vector<UnitBucket> out;
  if (!paired) {
    for (int h = 1; h < d; ++h) {
      out.push_back({h, LogBinomial(d, h), dist.LogBucketProb(h), false});
    }
    return out;
  }
  for (int h = 1; 2 * h < d; ++h) {
    out.push_back({h, LogBinomial(d, h), std::log(2.0) + dist.LogBucketProb(h), false});
  }
  if (d % 2 == 0) {
    const int h = d / 2;
    out.push_back({h, LogBinomial(d, h) - std::log(2.0), dist.LogBucketProb(h), true});
  }
  return out;
}

double Sketch::Weight(std::size_t i) const { return std::exp(log_weights.at(i)); }

std::string FormatLogValue(double log_value) {
  std::ostringstream os;
  os.precision(17);
  const double x = std::exp(log_value);
  if (std::isfinite(x) && x > 1e-300) {
    os << std::scientific << x;
    return os.str();
  }
  const double l10 = log_value / std::log(10.0);
  double exponent = std::floor(l10);
  double mantissa = std::pow(10.0, l10 - exponent);
  if (mantissa >= 10.0) {
    mantissa /= 10.0;
    exponent += 1.0;
  }
  os.precision(16);
  os << std::fixed << mantissa << 'e' << (exponent >= 0 ? "+" : "")
     << static_cast<long long>(exponent);
  return os.str();
}

void WriteSketchCsv(const Sketch& sketch, std::ostream& out) {
  out << "mask_base64,weight\n";
  for (std::size_t i = 0; i < sketch.size(); ++i) {
    out << sketch.subsets[i].ToBase64() << ',' << FormatLogValue(sketch.log_weights[i])
        << '\n';
  }
}

Subset UniformSubset(int d, int size, Rng& rng) {
  if (size < 0 || size > d) throw std::invalid_argument("UniformSubset: bad size");
  const bool flip = 2 * size > d;
  const int k = flip ? d - size : size;
  // Floyd's algorithm.
  Subset s(d);
  for (int j = d - k; j < d; ++j) {
    std::uniform_int_distribution<int> pick(0, j);
    int t = pick(rng);
    if (s.Contains(t)) {
      s.Insert(j);
    } else {
      s.Insert(t);
    }
  }
  return flip ? s.Complement() : s;
}

namespace {

// Calls visit(members) for every size-h coalition (containing player 0 when
// canonical), in lexicographic order.
template <typename Visit>
void ForEachCombination(int d, int h, bool canonical, Visit visit) {
  std::vector<int> idx(h);
  std::iota(idx.begin(), idx.end(), 0);
  if (h == 0) {
    visit(idx);
    return;
  }
  for (;;) {
    visit(idx);
    int i = h - 1;
    while (i >= 0 && idx[i] == d - h + i) --i;
    if (i < 0 || (canonical && i == 0)) return;
    ++idx[i];
    for (int k = i + 1; k < h; ++k) idx[k] = idx[k - 1] + 1;
  }
}

}  // namespace

SubsetBatch SampleDistinctSubsets(int d, int h, std::int64_t count, Rng& rng,
                                  bool canonical) {
  if (h < 0 || h > d) throw std::invalid_argument("SampleDistinctSubsets: bad size");
  if (canonical && 2 * h != d) {
    throw std::invalid_argument("canonical sampling requires h = d/2");
  }
  if (count < 0) throw std::invalid_argument("SampleDistinctSubsets: negative count");
  const double log_total = LogBinomial(d, h) - (canonical ? std::log(2.0) : 0.0);
  std::optional<std::uint64_t> total =
      BinomialIfAtMost(d, h, std::numeric_limits<std::uint64_t>::max());
  if (total && canonical) *total /= 2;
  if ((total && static_cast<std::uint64_t>(count) > *total) ||
      (!total && std::log(double(count)) > log_total)) {
    throw std::invalid_argument("cannot draw " + std::to_string(count) +
                                " distinct coalitions of size " +
                                std::to_string(h) + " from d=" + std::to_string(d));
  }
  SubsetBatch out(d);
  out.reserve(count);
  if (count == 0) return out;

  if (total && *total <= kEnumerateLimit &&
      static_cast<std::uint64_t>(count) * 2 > *total) {
    SubsetBatch all(d);
    all.reserve(*total);
    ForEachCombination(d, h, canonical,
                       [&](const std::vector<int>& idx) { all.AppendMembers(idx); });
    std::vector<std::uint32_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `count` positions are a uniform draw.
    for (std::int64_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
      out.Append(all[order[i]]);
    }
    return out;
  }

  std::unordered_set<std::vector<Word>, WordsHash> seen;
  seen.reserve(count * 2);
  while (static_cast<std::int64_t>(out.size()) < count) {
    Subset s = UniformSubset(d, h, rng);
    if (canonical && !s.Contains(0)) s = s.Complement();
    if (seen.insert(s.words()).second) out.Append(s);
  }
  return out;
}

std::int64_t DrawBucketCount(std::optional<std::uint64_t> exact_count,
                             double inclusion_prob, double poisson_mean,
                             double maxval, Rng& rng) {
  if (exact_count && static_cast<double>(*exact_count) <= maxval) {
    const auto n = static_cast<std::int64_t>(*exact_count);
    if (inclusion_prob >= 1.0) return n;
    if (inclusion_prob <= 0.0) return 0;
    std::binomial_distribution<std::int64_t> binom(n, inclusion_prob);
    return binom(rng);
  }
  if (poisson_mean <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> pois(poisson_mean);
  std::int64_t k = pois(rng);
  if (exact_count) k = std::min<std::int64_t>(k, static_cast<std::int64_t>(*exact_count));
  return k;
}

Sketch SampleWithReplacement(const BucketDistribution& dist, std::int64_t m,
                             std::uint64_t seed, bool paired) {
  const int d = dist.dimension();
  if (m < 0) throw std::invalid_argument("sample budget must be non-negative");
  if (paired && m % 2 != 0) {
    throw std::invalid_argument("paired sampling needs an even budget, got " +
                                std::to_string(m));
  }
  Sketch sketch(d);
  sketch.strategy = Strategy::kWithReplacement;
  sketch.paired = paired;
  sketch.m_nominal = m;
  sketch.seed = seed;
  sketch.tau = dist.tau();
  if (m == 0) return sketch;

  const std::vector<UnitBucket> buckets = UnitBuckets(dist, paired);
  const std::int64_t draws = paired ? m / 2 : m;
  std::vector<double> mass(buckets.size());
  for (std::size_t i = 0; i < buckets.size(); ++i) mass[i] = std::exp(buckets[i].log_mass);
  std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
  std::vector<std::int64_t> counts(buckets.size(), 0);
  Rng count_rng = MakeRng(seed, kCountStream);
  for (std::int64_t t = 0; t < draws; ++t) ++counts[pick(count_rng)];

  const double log_m = std::log(double(m));
  sketch.subsets.reserve(paired ? 2 * draws : draws);
  sketch.log_weights.reserve(paired ? 2 * draws : draws);
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const UnitBucket& b = buckets[i];
    // Same per-coalition probability for S and its complement.
    const double log_w = -log_m - dist.LogSubsetProb(b.size);
    Rng rng = MakeRng(seed, BucketStream(static_cast<int>(i)));
    for (std::int64_t t = 0; t < counts[i]; ++t) {
      Subset s = UniformSubset(d, b.size, rng);
      if (b.canonical && !s.Contains(0)) s = s.Complement();
      sketch.subsets.Append(s);
      sketch.log_weights.push_back(log_w);
      if (paired) {
        sketch.subsets.AppendComplement(s.view());
        sketch.log_weights.push_back(log_w);
      }
    }
  }
  return sketch;
}

double SolveAlpha(const BucketDistribution& dist, double units, bool paired) {
  if (!(units > 0.0)) throw std::invalid_argument("SolveAlpha: units must be positive");
  const std::vector<UnitBucket> buckets = UnitBuckets(dist, paired);
  std::vector<double> log_counts;
  for (const auto& b : buckets) log_counts.push_back(b.log_count);
  const double log_total = LogSumExp(log_counts);
  const double log_units = std::log(units);
  if (log_units > log_total + 1e-12) {
    throw CapabilityError("requested " + std::to_string(units) +
                          " sampling units but only exp(" +
                          std::to_string(log_total) + ") exist");
  }
  // Largest breakpoint n_i / P_i: beyond it every bucket is saturated.
  double log_saturate = -std::numeric_limits<double>::infinity();
  for (const auto& b : buckets) log_saturate = std::max(log_saturate, b.log_count - b.log_mass);
  if (log_units >= log_total - 1e-13) return std::exp(log_saturate);

  // sum_i min(n_i, alpha P_i), in log-alpha coordinates.
  auto objective = [&](double log_alpha) {
    double s = 0.0;
    for (const auto& b : buckets) {
      s += std::exp(std::min(b.log_count, log_alpha + b.log_mass));
    }
    return s;
  };
  double lo = log_units;  // objective(units) <= units since sum P_i = 1
  double hi = lo + std::log(2.0);
  while (objective(hi) < units) {
    lo = hi;
    hi += std::log(2.0);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (objective(mid) < units ? lo : hi) = mid;
  }
  // Exact solve on the linear segment that contains the root.
  const double log_alpha = 0.5 * (lo + hi);
  double saturated = 0.0;
  double free_mass = 0.0;
  for (const auto& b : buckets) {
    if (b.log_count <= log_alpha + b.log_mass) {
      saturated += std::exp(b.log_count);
    } else {
      free_mass += std::exp(b.log_mass);
    }
  }
  if (free_mass > 0.0 && units > saturated) {
    const double alpha = (units - saturated) / free_mass;
    const double check = objective(std::log(alpha));
    if (std::abs(check - units) <= 1e-12 * units) return alpha;
  }
  return std::exp(log_alpha);
}

Sketch SampleWithoutReplacement(const BucketDistribution& dist, std::int64_t m,
                                std::uint64_t seed, bool paired, double maxval) {
  const int d = dist.dimension();
  if (m < (paired ? 2 : 1)) {
    throw std::invalid_argument("without-replacement sampling needs m >= " +
                                std::string(paired ? "2" : "1"));
  }
  if (!(maxval > 0.0)) throw std::invalid_argument("maxval must be positive");
  Sketch sketch(d);
  sketch.strategy = Strategy::kWithoutReplacement;
  sketch.paired = paired;
  sketch.m_nominal = m;
  sketch.seed = seed;
  sketch.tau = dist.tau();

  const std::vector<UnitBucket> buckets = UnitBuckets(dist, paired);
  std::vector<double> log_counts;
  for (const auto& b : buckets) log_counts.push_back(b.log_count);
  const double log_total = LogSumExp(log_counts);
  double units = paired ? double(m / 2) : double(m);
  units = std::min(units, std::exp(log_total));  // saturate
  const double alpha = SolveAlpha(dist, units, paired);
  const double log_alpha = std::log(alpha);
  sketch.alpha = alpha;

  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const UnitBucket& b = buckets[i];
    double log_q = std::min(0.0, log_alpha + b.log_mass - b.log_count);
    if (log_q > -1e-12) log_q = 0.0;  // saturated up to rounding
    std::optional<std::uint64_t> exact =
        BinomialIfAtMost(d, b.size, std::numeric_limits<std::uint64_t>::max());
    if (exact && b.canonical) *exact /= 2;
    Rng rng = MakeRng(seed, BucketStream(static_cast<int>(i)));
    const std::int64_t count =
        DrawBucketCount(exact, std::exp(log_q), std::exp(log_alpha + b.log_mass),
                        maxval, rng);
    SubsetBatch drawn = SampleDistinctSubsets(d, b.size, count, rng, b.canonical);
    for (std::size_t t = 0; t < drawn.size(); ++t) {
      sketch.subsets.Append(drawn[t]);
      sketch.log_weights.push_back(-log_q);
      if (paired) {
        sketch.subsets.AppendComplement(drawn[t]);
        sketch.log_weights.push_back(-log_q);
      }
    }
  }
  return sketch;
}

}  // namespace unishap
