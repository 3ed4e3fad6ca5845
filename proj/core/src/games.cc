#include "unishap/games.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "unishap/errors.h"
#include "unishap/rng.h"

namespace unishap {
namespace {

std::string FormatDouble(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string DescribeSubset(SubsetView s) {
  std::string out = "{";
  bool first = true;
  for (int j : s.Members()) {
    if (!first) out += ",";
    out += std::to_string(j);
    first = false;
  }
  return out + "}";
}

}  // namespace

Game::Game(int d) : d_(d) {
  if (d < 1) throw std::invalid_argument("game dimension must be positive");
}

void Game::set_batch_size(std::size_t n) {
  if (n == 0) throw std::invalid_argument("batch size must be positive");
  batch_size_ = n;
}

std::vector<double> Game::EvaluateBatch(const SubsetBatch& batch) const {
  std::vector<double> out(batch.size());
  EvaluateBatch(batch, out);
  return out;
}

void Game::EvaluateBatch(const SubsetBatch& batch, std::span<double> out) const {
  if (batch.dimension() != d_) {
    throw std::invalid_argument("batch dimension " +
                                std::to_string(batch.dimension()) +
                                " does not match game dimension " +
                                std::to_string(d_));
  }
  if (out.size() != batch.size()) {
    throw std::invalid_argument("output span size mismatch");
  }
  for (std::size_t begin = 0; begin < batch.size(); begin += batch_size_) {
    const std::size_t end = std::min(batch.size(), begin + batch_size_);
    DoEvaluate(batch, begin, end, out.data() + begin);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw GameError(Describe() + ": non-finite value for coalition " +
                      DescribeSubset(batch[i]));
    }
  }
}

void Game::EnsureEndpoints() const {
  std::call_once(endpoints_once_, [this] {
    SubsetBatch batch(d_);
    batch.Append(Subset(d_));
    batch.Append(Subset::Full(d_));
    std::vector<double> v = EvaluateBatch(batch);
    empty_value_ = v[0];
    full_value_ = v[1];
  });
}

double Game::EmptyValue() const {
  EnsureEndpoints();
  return empty_value_;
}

double Game::FullValue() const {
  EnsureEndpoints();
  return full_value_;
}

MaskedGame::MaskedGame(Model model, Eigen::VectorXd query,
                       Eigen::VectorXd baseline, std::string name)
    : Game(static_cast<int>(query.size())),
      model_(std::move(model)),
      query_(std::move(query)),
      baseline_(std::move(baseline)),
      name_(std::move(name)) {
  if (baseline_.size() != query_.size()) {
    throw std::invalid_argument("query and baseline lengths differ");
  }
  if (!model_) throw std::invalid_argument("MaskedGame: empty model");
}

void MaskedGame::DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                            std::size_t end, double* out) const {
  const int d = dimension();
  std::vector<double> x(d);
  for (std::size_t i = begin; i < end; ++i) {
    SubsetView s = batch[i];
    for (int j = 0; j < d; ++j) x[j] = s.Contains(j) ? query_[j] : baseline_[j];
    try {
      out[i - begin] = model_(x);
    } catch (const std::exception& e) {
      throw GameError(name_ + ": model failed on coalition " +
                      DescribeSubset(s) + ": " + e.what());
    }
  }
}

AdversarialGame::AdversarialGame(const AdversarialParams& params)
    : Game(params.d), params_(params) {
  if (params.n < 1 || 2 * params.n >= params.d) {
    throw std::invalid_argument("adversarial game needs 1 <= n < d/2");
  }
  if (!(params.eps0 > 0.0 && params.eps0 < 1.0)) {
    throw std::invalid_argument("adversarial game needs eps0 in (0, 1)");
  }
  if (!std::isfinite(params.xi) || !std::isfinite(params.chi)) {
    throw std::invalid_argument("adversarial game coefficients must be finite");
  }
}

double AdversarialGame::ValueAtSize(int x) const {
  const int d = params_.d;
  const double linear = params_.chi * x;
  const bool plateau = (x >= 1 && x <= params_.n) || (x >= d - params_.n && x <= d - 1);
  if (!plateau) return linear;
  const double r = double(x) / d;
  return params_.xi * r * r + linear;
}

Model AdversarialGame::AsModel() const {
  const double eps0 = params_.eps0;
  // Captures a copy so the model outlives the game.
  auto game = std::make_shared<AdversarialGame>(params_);
  return [game, eps0](std::span<const double> x) {
    int count = 0;
    for (double xi : x) count += xi > eps0 ? 1 : 0;
    return game->ValueAtSize(count);
  };
}

std::optional<Eigen::VectorXd> AdversarialGame::KnownShapley() const {
  return Eigen::VectorXd::Constant(params_.d, params_.chi);
}

std::string AdversarialGame::Describe() const {
  return "adversarial:d=" + std::to_string(params_.d) +
         ",n=" + std::to_string(params_.n) + ",xi=" + FormatDouble(params_.xi) +
         ",chi=" + FormatDouble(params_.chi);
}

void AdversarialGame::DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                                 std::size_t end, double* out) const {
  for (std::size_t i = begin; i < end; ++i) {
    out[i - begin] = ValueAtSize(batch.SizeOf(i));
  }
}

SizeGame::SizeGame(int d, std::function<double(int)> value, std::string name)
    : Game(d), value_(std::move(value)), name_(std::move(name)) {}

void SizeGame::DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                          std::size_t end, double* out) const {
  for (std::size_t i = begin; i < end; ++i) out[i - begin] = value_(batch.SizeOf(i));
}

TabularGame::TabularGame(int d, std::vector<double> table, std::string name)
    : Game(d), table_(std::move(table)), name_(std::move(name)) {
  if (d > kMaxDimension) {
    throw CapabilityError("tabular games support d <= " +
                          std::to_string(kMaxDimension));
  }
  if (table_.size() != (std::size_t{1} << d)) {
    throw std::invalid_argument("tabular game needs 2^d entries");
  }
}

void TabularGame::DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                             std::size_t end, double* out) const {
  for (std::size_t i = begin; i < end; ++i) out[i - begin] = table_[batch[i].ToMask()];
}

std::shared_ptr<TabularGame> LoadTabularGame(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty table file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "mask,value") {
    throw ConfigError(path + ": expected header 'mask,value'");
  }
  std::vector<std::pair<std::uint64_t, double>> rows;
  std::uint64_t max_mask = 0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": missing ','");
    }
    std::uint64_t mask = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + comma, mask);
    if (ec != std::errc() || p != line.data() + comma) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad mask");
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad value");
    }
    rows.emplace_back(mask, value);
    max_mask = std::max(max_mask, mask);
  }
  if (rows.empty()) throw ConfigError(path + ": no entries");
  const int d = std::max(1, static_cast<int>(std::bit_width(max_mask)));
  if (d > TabularGame::kMaxDimension) {
    throw ConfigError(path + ": mask exceeds 2^" +
                      std::to_string(TabularGame::kMaxDimension));
  }
  const std::size_t n = std::size_t{1} << d;
  std::vector<double> table(n, 0.0);
  std::vector<bool> seen(n, false);
  for (const auto& [mask, value] : rows) {
    if (seen[mask]) {
      throw ConfigError(path + ": duplicate entry for mask " + std::to_string(mask));
    }
    seen[mask] = true;
    table[mask] = value;
  }
  for (std::size_t mask = 0; mask < n; ++mask) {
    if (!seen[mask]) {
      throw ConfigError(path + ": missing entry for mask " + std::to_string(mask));
    }
  }
  return std::make_shared<TabularGame>(d, std::move(table), "table:" + path);
}

void SaveTabularGame(const TabularGame& game, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write table file '" + path + "'");
  out << "mask,value\n";
  out.precision(17);
  for (std::size_t mask = 0; mask < game.table().size(); ++mask) {
    out << mask << ',' << game.table()[mask] << '\n';
  }
}

AdditiveGame::AdditiveGame(Eigen::VectorXd weights)
    : Game(static_cast<int>(weights.size())), weights_(std::move(weights)) {}

void AdditiveGame::DoEvaluate(const SubsetBatch& batch, std::size_t begin,
                              std::size_t end, double* out) const {
  std::vector<int> members;
  for (std::size_t i = begin; i < end; ++i) {
    members.clear();
    batch[i].CollectIndices(true, members);
    double sum = 0.0;
    for (int j : members) sum += weights_[j];
    out[i - begin] = sum;
  }
}

LinearCombinationGame::LinearCombinationGame(std::vector<GamePtr> games,
                                             std::vector<double> coefficients)
    : Game(games.empty() ? 1 : games.front()->dimension()),
      games_(std::move(games)),
      coefficients_(std::move(coefficients)) {
  if (games_.empty()) throw std::invalid_argument("no component games");
  if (coefficients_.size() != games_.size()) {
    throw std::invalid_argument("one coefficient per component game required");
  }
  for (const auto& g : games_) {
    if (!g || g->dimension() != dimension()) {
      throw std::invalid_argument("component games must share d");
    }
  }
}

bool LinearCombinationGame::concurrent() const {
  for (const auto& g : games_) {
    if (!g->concurrent()) return false;
  }
  return true;
}

std::optional<Eigen::VectorXd> LinearCombinationGame::KnownShapley() const {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(dimension());
  for (std::size_t k = 0; k < games_.size(); ++k) {
    auto part = games_[k]->KnownShapley();
    if (!part) return std::nullopt;
    phi += coefficients_[k] * *part;
  }
  return phi;
}

std::string LinearCombinationGame::Describe() const {
  std::string out;
  for (std::size_t k = 0; k < games_.size(); ++k) {
    if (k) out += "+";
    if (coefficients_[k] != 1.0) out += FormatDouble(coefficients_[k]) + "*";
    out += games_[k]->Describe();
  }
  return out;
}

void LinearCombinationGame::DoEvaluate(const SubsetBatch& batch,
                                       std::size_t begin, std::size_t end,
                                       double* out) const {
  SubsetBatch chunk(dimension());
  chunk.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) chunk.Append(batch[i]);
  std::fill(out, out + (end - begin), 0.0);
  for (std::size_t k = 0; k < games_.size(); ++k) {
    std::vector<double> part = games_[k]->EvaluateBatch(chunk);
    for (std::size_t i = 0; i < part.size(); ++i) out[i] += coefficients_[k] * part[i];
  }
}

std::shared_ptr<TabularGame> RandomTabularGame(int d, std::uint64_t seed) {
  if (d > TabularGame::kMaxDimension) {
    throw CapabilityError("random tabular games support d <= " +
                          std::to_string(TabularGame::kMaxDimension));
  }
  Rng rng(DeriveSeed(seed, 0x7461626cULL));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> table(std::size_t{1} << d);
  for (double& v : table) v = unif(rng);
  return std::make_shared<TabularGame>(
      d, std::move(table),
      "random:d=" + std::to_string(d) + ",seed=" + std::to_string(seed));
}

std::shared_ptr<TabularGame> GloveGame(int d) {
  if (d < 2 || d > TabularGame::kMaxDimension) {
    throw std::invalid_argument("glove game needs 2 <= d <= 25");
  }
  const std::uint64_t right = std::uint64_t{1} << (d - 1);
  std::vector<double> table(std::size_t{1} << d);
  for (std::uint64_t mask = 0; mask < table.size(); ++mask) {
    table[mask] = ((mask & right) && (mask & (right - 1))) ? 1.0 : 0.0;
  }
  return std::make_shared<TabularGame>(d, std::move(table),
                                       "glove:d=" + std::to_string(d));
}

std::shared_ptr<SizeGame> MajorityGame(int d) {
  return std::make_shared<SizeGame>(
      d, [d](int s) { return 2 * s > d ? 1.0 : 0.0; },
      "majority:d=" + std::to_string(d));
}

}  // namespace unishap
