#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "unishap/diagnostics.h"

namespace unishap {
namespace {

std::vector<int> ImportanceOrder(const Eigen::VectorXd& phi) {
  std::vector<int> order(phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(phi[a]) > std::abs(phi[b]);
  });
  return order;
}

// Trapezoid area of the rescaled curve through prefixes of the importance
// order. Insertion grows from the empty coalition, deletion shrinks from
// the full one.
double PrefixCurveAuc(const Game& game, const Eigen::VectorXd& phi, int top_k,
                      bool insertion) {
  const int d = game.dimension();
  if (phi.size() != d) throw std::invalid_argument("phi length differs from d");
  if (top_k < 1 || top_k > d) throw std::invalid_argument("top_k must lie in [1, d]");
  const std::vector<int> order = ImportanceOrder(phi);
  SubsetBatch batch(d);
  Subset s = insertion ? Subset(d) : Subset::Full(d);
  batch.Append(s);
  for (int k = 0; k < top_k; ++k) {
    if (insertion) {
      s.Insert(order[k]);
    } else {
      s.Erase(order[k]);
    }
    batch.Append(s);
  }
  const std::vector<double> v = game.EvaluateBatch(batch);
  const double lo = game.EmptyValue();
  const double span = game.FullValue() - lo;
  const double scale = span != 0.0 ? 1.0 / span : 1.0;
  double area = 0.0;
  for (int k = 0; k < top_k; ++k) {
    area += 0.5 * ((v[k] - lo) * scale + (v[k + 1] - lo) * scale);
  }
  return area / top_k;
}

std::vector<double> AverageRanks(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(x[a]) < std::abs(x[b]); });
  std::vector<double> rank(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && std::abs(x[order[j + 1]]) == std::abs(x[order[i]])) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double InsertionAuc(const Game& game, const Eigen::VectorXd& phi, int top_k) {
  return PrefixCurveAuc(game, phi, top_k, true);
}

double DeletionAuc(const Game& game, const Eigen::VectorXd& phi, int top_k) {
  return PrefixCurveAuc(game, phi, top_k, false);
}

double RankCorrelation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vectors differ in length");
  if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> ra = AverageRanks(a);
  const std::vector<double> rb = AverageRanks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace unishap
