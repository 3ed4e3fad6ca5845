#ifndef UNISHAP_GAMES_H_
#define UNISHAP_GAMES_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unishap/subset.h"

namespace unishap {

inline constexpr std::size_t kDefaultBatchSize = 4096;

// Value function v: 2^[d] -> R. Evaluation is batched only; batches larger
// than batch_size() are split into chunks and results concatenated in order.
// Implementations must be deterministic. Games that cannot be called from
// several threads report concurrent() == false and serialize internally.
class Game {
 public:
  explicit Game(int d);
  virtual ~Game() = default;
  Game(const Game&) = delete;
  Game& operator=(const Game&) = delete;

  int dimension() const { return d_; }

  std::vector<double> EvaluateBatch(const SubsetBatch& batch) const;
  void EvaluateBatch(const SubsetBatch& batch, std::span<double> out) const;

  std::size_t batch_size() const { return batch_size_; }
  void set_batch_size(std::size_t n);

  // v(empty) and v([d]), evaluated once and memoized.
  double EmptyValue() const;
  double FullValue() const;

  virtual bool concurrent() const { return true; }
  // Analytic Shapley values when the game has them.
  virtual std::optional<Eigen::VectorXd> KnownShapley() const {
    return std::nullopt;
  }
  virtual std::string Describe() const = 0;

 protected:
  // Writes v(batch[i]) to out[i - begin] for i in [begin, end).
  virtual void DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                          std::size_t end, double* out) const = 0;

 private:
  void EnsureEndpoints() const;

  int d_;
  std::size_t batch_size_ = kDefaultBatchSize;
  mutable std::once_flag endpoints_once_;
  mutable double empty_value_ = 0.0;
  mutable double full_value_ = 0.0;
};

using GamePtr = std::shared_ptr<const Game>;

// A model over R^d. Must be thread-safe if the owning game is used
// concurrently.
using Model = std::function<double(std::span<const double>)>;

// v(S) = model(x) with x_j = query_j for j in S and baseline_j otherwise.
class MaskedGame : public Game {
 public:
  MaskedGame(Model model, Eigen::VectorXd query, Eigen::VectorXd baseline,
             std::string name = "masked");

  const Model& model() const { return model_; }
  const Eigen::VectorXd& query() const { return query_; }
  const Eigen::VectorXd& baseline() const { return baseline_; }
  std::string Describe() const override { return name_; }

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  Model model_;
  Eigen::VectorXd query_;
  Eigen::VectorXd baseline_;
  std::string name_;
};

struct AdversarialParams {
  int d = 0;
  int n = 1;           // plateau width
  double xi = 1.0;     // quadratic coefficient
  double chi = 0.0;    // linear coefficient
  double eps0 = 0.5;   // input threshold, in (0, 1)
};

// Anonymous game v(S) = g(|S|) with g(x) = xi (x/d)^2 + chi x on
// [1, n] and [d-n, d-1], chi x elsewhere. This is the model
// g(sum_i [x_i > eps0]) masked between query 1 and baseline 0.
class AdversarialGame : public Game {
 public:
  explicit AdversarialGame(const AdversarialParams& params);

  const AdversarialParams& params() const { return params_; }
  double ValueAtSize(int size) const;
  // The underlying model on R^d, for use with MaskedGame.
  Model AsModel() const;

  std::optional<Eigen::VectorXd> KnownShapley() const override;
  std::string Describe() const override;

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  AdversarialParams params_;
};

// Anonymous game from an arbitrary size -> value function.
class SizeGame : public Game {
 public:
  SizeGame(int d, std::function<double(int)> value, std::string name);
  std::string Describe() const override { return name_; }

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  std::function<double(int)> value_;
  std::string name_;
};

// v(S) = table[mask(S)] over all 2^d coalitions.
class TabularGame : public Game {
 public:
  static constexpr int kMaxDimension = 25;
  TabularGame(int d, std::vector<double> table, std::string name = "table");

  const std::vector<double>& table() const { return table_; }
  std::string Describe() const override { return name_; }

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  std::vector<double> table_;
  std::string name_;
};

// Reads a CSV with header "mask,value". Every mask in [0, 2^d) must appear
// exactly once; d is inferred from the row count. Throws ConfigError.
std::shared_ptr<TabularGame> LoadTabularGame(const std::string& path);
void SaveTabularGame(const TabularGame& game, const std::string& path);

// v(S) = sum_{i in S} w_i.
class AdditiveGame : public Game {
 public:
  explicit AdditiveGame(Eigen::VectorXd weights);
  const Eigen::VectorXd& weights() const { return weights_; }
  std::optional<Eigen::VectorXd> KnownShapley() const override {
    return weights_;
  }
  std::string Describe() const override { return "additive"; }

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  Eigen::VectorXd weights_;
};

// v(S) = sum_k c_k v_k(S).
class LinearCombinationGame : public Game {
 public:
  LinearCombinationGame(std::vector<GamePtr> games,
                        std::vector<double> coefficients);
  bool concurrent() const override;
  std::optional<Eigen::VectorXd> KnownShapley() const override;
  std::string Describe() const override;

 protected:
  void DoEvaluate(const SubsetBatch& batch, std::size_t begin, std::size_t end,
                  double* out) const override;

 private:
  std::vector<GamePtr> games_;
  std::vector<double> coefficients_;
};

// Table of i.i.d. uniform[-1, 1] values.
std::shared_ptr<TabularGame> RandomTabularGame(int d, std::uint64_t seed);

// Player d-1 holds the only right glove; the others hold left gloves.
// v(S) = 1 iff S contains d-1 and at least one other player.
std::shared_ptr<TabularGame> GloveGame(int d = 3);

// v(S) = 1 iff 2|S| > d.
std::shared_ptr<SizeGame> MajorityGame(int d = 3);

}  // namespace unishap

#endif  // UNISHAP_GAMES_H_
