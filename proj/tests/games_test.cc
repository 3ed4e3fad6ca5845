#include "unishap/games.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "unishap/base64.h"
#include "unishap/errors.h"
#include "unishap/external_game.h"

namespace unishap {
namespace {

double SumModel(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

TEST(Base64Test, RoundTrip) {
  EXPECT_EQ(Base64Encode(std::vector<std::uint8_t>{}), "");
  EXPECT_EQ(Base64Encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}), "Zm9vYg==");
  std::mt19937_64 rng(1);
  for (int len = 0; len < 40; ++len) {
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(Base64Decode(Base64Encode(bytes)), bytes);
  }
  EXPECT_THROW(Base64Decode("abc"), std::invalid_argument);
  EXPECT_THROW(Base64Decode("ab!c"), std::invalid_argument);
}

TEST(SubsetTest, SizeAndComplement) {
  for (int d : {1, 5, 63, 64, 65, 130, 3072}) {
    std::mt19937_64 rng(d);
    Subset s(d);
    for (int j = 0; j < d; ++j) {
      if (rng() & 1) s.Insert(j);
    }
    EXPECT_EQ(s.size(), s.view().Size());
    EXPECT_EQ(s.Complement().size(), d - s.size());
    EXPECT_TRUE(s.Complement().Complement() == s);
    EXPECT_EQ(Subset::FromBytes(d, s.view().ToBytes()), s);
  }
}

TEST(SubsetTest, BytesAreLittleEndian) {
  Subset s = Subset::FromMembers(10, {0, 9});
  const std::vector<std::uint8_t> bytes = s.view().ToBytes();
  ASSERT_EQ(bytes.size(), 2u);
  EXPECT_EQ(bytes[0], 0x01);
  EXPECT_EQ(bytes[1], 0x02);
  EXPECT_THROW(Subset::FromBytes(10, {0x00, 0x04}), std::invalid_argument);
}

TEST(SubsetBatchTest, AppendVariants) {
  SubsetBatch batch(70);
  std::vector<int> members = {1, 2, 69};
  batch.AppendMembers(members);
  batch.AppendComplementOfMembers(members);
  batch.AppendComplement(batch[0]);
  EXPECT_EQ(batch.SizeOf(0), 3);
  EXPECT_EQ(batch.SizeOf(1), 67);
  EXPECT_EQ(batch[1].Size(), 67);
  EXPECT_EQ(batch[2].Members(), batch[1].Members());
  EXPECT_TRUE(batch[0].Contains(69));
  EXPECT_FALSE(batch[1].Contains(69));
}

TEST(MaskedGameTest, CountsMembersUnderSumModel) {
  MaskedGame game(SumModel, Eigen::VectorXd::Ones(4), Eigen::VectorXd::Zero(4));
  SubsetBatch batch(4);
  batch.Append(Subset::FromMembers(4, {0, 2}));
  EXPECT_EQ(game.EvaluateBatch(batch)[0], 2.0);
  EXPECT_EQ(game.EmptyValue(), 0.0);
  EXPECT_EQ(game.FullValue(), 4.0);
}

TEST(MaskedGameTest, EndpointsUseBaselineAndQuery) {
  Eigen::VectorXd q(3), b(3);
  q << 1.5, -2.0, 4.0;
  b << 0.25, 0.5, -1.0;
  auto model = [](std::span<const double> x) { return x[0] * x[1] + x[2]; };
  MaskedGame game(model, q, b);
  EXPECT_DOUBLE_EQ(game.EmptyValue(), 0.25 * 0.5 - 1.0);
  EXPECT_DOUBLE_EQ(game.FullValue(), 1.5 * -2.0 + 4.0);
}

TEST(MaskedGameTest, EqualQueryAndBaselineGiveConstantGame) {
  Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  auto model = [](std::span<const double> x) { return std::exp(x[0]) * x[5] + x[3]; };
  MaskedGame game(model, q, q);
  SubsetBatch batch(6);
  for (std::uint64_t mask = 0; mask < 64; ++mask) batch.AppendMask(mask);
  const double want = model(std::vector<double>(q.data(), q.data() + 6));
  for (double v : game.EvaluateBatch(batch)) EXPECT_EQ(v, want);
}

TEST(MaskedGameTest, ModelFailureNamesCoalition) {
  auto model = [](std::span<const double> x) -> double {
    if (x[1] > 0.5) throw std::runtime_error("boom");
    return 0.0;
  };
  MaskedGame game(model, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3));
  SubsetBatch batch(3);
  batch.Append(Subset::FromMembers(3, {1, 2}));
  try {
    game.EvaluateBatch(batch);
    FAIL() << "expected GameError";
  } catch (const GameError& e) {
    EXPECT_NE(std::string(e.what()).find("{1,2}"), std::string::npos) << e.what();
  }
}

TEST(MaskedGameTest, RejectsLengthMismatch) {
  EXPECT_THROW(MaskedGame(SumModel, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(2)),
               std::invalid_argument);
}

TEST(AdversarialGameTest, EndpointsAndPlateau) {
  AdversarialGame game({.d = 16, .n = 2, .xi = 1.0, .chi = 0.0, .eps0 = 0.5});
  EXPECT_EQ(game.EmptyValue(), 0.0);
  EXPECT_EQ(game.FullValue(), 0.0);
  EXPECT_DOUBLE_EQ(game.ValueAtSize(1), 1.0 / 256.0);
  EXPECT_DOUBLE_EQ(game.ValueAtSize(2), 4.0 / 256.0);
  EXPECT_EQ(game.ValueAtSize(3), 0.0);
  EXPECT_EQ(game.ValueAtSize(13), 0.0);
  EXPECT_DOUBLE_EQ(game.ValueAtSize(14), 196.0 / 256.0);
  EXPECT_DOUBLE_EQ(game.ValueAtSize(15), 225.0 / 256.0);

  AdversarialGame linear({.d = 9, .n = 1, .xi = 3.0, .chi = 2.5, .eps0 = 0.1});
  EXPECT_EQ(linear.EmptyValue(), 0.0);
  EXPECT_EQ(linear.FullValue(), 2.5 * 9);
}

TEST(AdversarialGameTest, AnonymousAndMatchesMaskedModel) {
  const AdversarialParams p{.d = 10, .n = 3, .xi = 2.0, .chi = -0.5, .eps0 = 0.3};
  AdversarialGame game(p);
  MaskedGame masked(game.AsModel(), Eigen::VectorXd::Ones(10), Eigen::VectorXd::Zero(10));
  SubsetBatch batch(10);
  for (std::uint64_t mask = 0; mask < 1024; ++mask) batch.AppendMask(mask);
  const auto a = game.EvaluateBatch(batch);
  const auto b = masked.EvaluateBatch(batch);
  std::vector<double> by_size(11, std::nan(""));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    const int h = batch.SizeOf(i);
    if (std::isnan(by_size[h])) by_size[h] = a[i];
    EXPECT_EQ(a[i], by_size[h]);
  }
  // Any threshold in (0, 1) gives the same game at query 1, baseline 0.
  AdversarialParams other = p;
  other.eps0 = 0.9;
  MaskedGame masked2(AdversarialGame(other).AsModel(), Eigen::VectorXd::Ones(10),
                     Eigen::VectorXd::Zero(10));
  EXPECT_EQ(masked2.EvaluateBatch(batch), a);
}

TEST(AdversarialGameTest, RejectsBadParameters) {
  EXPECT_THROW(AdversarialGame({.d = 4, .n = 2}), std::invalid_argument);
  EXPECT_THROW(AdversarialGame({.d = 8, .n = 0}), std::invalid_argument);
  EXPECT_THROW(AdversarialGame({.d = 8, .n = 1, .eps0 = 1.0}), std::invalid_argument);
  EXPECT_THROW(AdversarialGame({.d = 8, .n = 1, .eps0 = 0.0}), std::invalid_argument);
}

TEST(TabularGameTest, GloveTable) {
  auto glove = GloveGame(3);
  SubsetBatch batch(3);
  for (std::uint64_t mask = 0; mask < 8; ++mask) batch.AppendMask(mask);
  const std::vector<double> want = {0, 0, 0, 0, 0, 1, 1, 1};
  EXPECT_EQ(glove->EvaluateBatch(batch), want);
}

TEST(TabularGameTest, AdditiveTableMatchesClosedForm) {
  Eigen::VectorXd w(5);
  w << 0.5, -1.0, 2.0, 0.25, 3.0;
  std::vector<double> table(32);
  for (std::uint64_t mask = 0; mask < 32; ++mask) {
    for (int j = 0; j < 5; ++j) table[mask] += (mask >> j) & 1 ? w[j] : 0.0;
  }
  TabularGame tab(5, table);
  AdditiveGame add(w);
  SubsetBatch batch(5);
  for (std::uint64_t mask = 0; mask < 32; ++mask) batch.AppendMask(mask);
  const auto a = tab.EvaluateBatch(batch);
  const auto b = add.EvaluateBatch(batch);
  for (int i = 0; i < 32; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("unishap_games_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string File(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

TEST(TabularGameTest, CsvRoundTripKeepsEmptySetEntry) {
  TempDir dir;
  auto game = RandomTabularGame(4, 3);
  SaveTabularGame(*game, dir.File("t.csv"));
  auto loaded = LoadTabularGame(dir.File("t.csv"));
  EXPECT_EQ(loaded->dimension(), 4);
  EXPECT_EQ(loaded->table(), game->table());
  EXPECT_EQ(loaded->EmptyValue(), game->table()[0]);
}

TEST(TabularGameTest, CsvRejectsMissingAndDuplicateEntries) {
  TempDir dir;
  {
    std::ofstream out(dir.File("missing.csv"));
    out << "mask,value\n0,1\n1,2\n3,4\n";
  }
  try {
    LoadTabularGame(dir.File("missing.csv"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("missing entry for mask 2"), std::string::npos);
  }
  {
    std::ofstream out(dir.File("dup.csv"));
    out << "mask,value\n0,1\n1,2\n1,4\n";
  }
  EXPECT_THROW(LoadTabularGame(dir.File("dup.csv")), ConfigError);
  {
    std::ofstream out(dir.File("header.csv"));
    out << "m,v\n0,1\n1,2\n";
  }
  EXPECT_THROW(LoadTabularGame(dir.File("header.csv")), ConfigError);
  EXPECT_THROW(LoadTabularGame(dir.File("nope.csv")), ConfigError);
}

TEST(GameTest, ChunkedEvaluationPreservesOrder) {
  auto game = RandomTabularGame(8, 11);
  SubsetBatch batch(8);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) batch.AppendMask(rng() & 255);
  const auto whole = game->EvaluateBatch(batch);
  auto chunked = RandomTabularGame(8, 11);
  chunked->set_batch_size(7);
  EXPECT_EQ(chunked->EvaluateBatch(batch), whole);
}

TEST(GameTest, NonFiniteValuesAreRejected) {
  SizeGame bad(3, [](int s) { return s == 2 ? std::nan("") : 0.0; }, "bad");
  SubsetBatch batch(3);
  batch.AppendMask(3);
  EXPECT_THROW(bad.EvaluateBatch(batch), GameError);
}

TEST(LinearCombinationGameTest, SumsComponentsAndShapley) {
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(10, 0.1, 1.0);
  auto add = std::make_shared<AdditiveGame>(w);
  auto adv = std::make_shared<AdversarialGame>(
      AdversarialParams{.d = 10, .n = 2, .xi = 1.0, .chi = 0.5});
  LinearCombinationGame sum({add, adv}, {2.0, 1.0});
  SubsetBatch batch(10);
  batch.AppendMask(0b1011);
  EXPECT_NEAR(sum.EvaluateBatch(batch)[0],
              2.0 * (w[0] + w[1] + w[3]) + adv->ValueAtSize(3), 1e-14);
  auto known = sum.KnownShapley();
  ASSERT_TRUE(known.has_value());
  EXPECT_NEAR((*known - (2.0 * w.array() + 0.5).matrix()).norm(), 0.0, 1e-14);
}

// Reference subprocess path is injected by CMake.
std::string ServerCommand(const std::string& args) {
  return std::string(UNISHAP_REFERENCE_SERVER) + " " + args;
}

TEST(ExternalGameTest, EchoContract) {
  ExternalGame game(ServerCommand("--d 5"), 5);
  SubsetBatch batch(5);
  batch.AppendMask(0b00011);
  batch.AppendMask(0b10100);
  const auto v = game.EvaluateBatch(batch);
  ASSERT_EQ(v.size(), 2u);
  // The reference server answers sum_{i in S} (i + 1) + 0.5 |S|^2.
  EXPECT_DOUBLE_EQ(v[0], 1 + 2 + 0.5 * 4);
  EXPECT_DOUBLE_EQ(v[1], 3 + 5 + 0.5 * 4);
  EXPECT_EQ(game.EmptyValue(), 0.0);
  EXPECT_DOUBLE_EQ(game.FullValue(), 15 + 0.5 * 25);
  EXPECT_FALSE(game.concurrent());
}

TEST(ExternalGameTest, ChunkedMatchesUnchunked) {
  const int d = 70;
  SubsetBatch batch(d);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 500; ++i) {
    Subset s(d);
    for (int j = 0; j < d; ++j) {
      if (rng() % 3 == 0) s.Insert(j);
    }
    batch.Append(s);
  }
  ExternalGame whole(ServerCommand("--d 70"), d, {.timeout_ms = 10000, .batch_size = 1000});
  ExternalGame chunked(ServerCommand("--d 70"), d, {.timeout_ms = 10000, .batch_size = 37});
  EXPECT_EQ(chunked.EvaluateBatch(batch), whole.EvaluateBatch(batch));
}

TEST(ExternalGameTest, MalformedResponseNamesLine) {
  ExternalGame game(ServerCommand("--d 4 --fault malformed --fault-after 1"), 4);
  SubsetBatch batch(4);
  batch.AppendMask(1);
  batch.AppendMask(2);
  batch.AppendMask(3);
  EXPECT_EQ(game.EvaluateBatch(batch).size(), 3u);
  try {
    game.EvaluateBatch(batch);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    // Handshake is line 1, the first response lines 2-5; the second
    // response has its header on line 6 and a bad second value on line 8.
    EXPECT_EQ(e.line(), 8);
    EXPECT_NE(std::string(e.what()).find("line 8"), std::string::npos) << e.what();
  }
}

TEST(ExternalGameTest, SubprocessExitIsReported) {
  ExternalGame game(ServerCommand("--d 4 --fault exit --fault-after 0"), 4);
  SubsetBatch batch(4);
  batch.AppendMask(1);
  EXPECT_THROW(game.EvaluateBatch(batch), ProcessExitError);
}

TEST(ExternalGameTest, TimeoutIsReported) {
  ExternalGame game(ServerCommand("--d 4 --fault hang --fault-after 0"), 4,
                    {.timeout_ms = 300, .batch_size = 16});
  SubsetBatch batch(4);
  batch.AppendMask(1);
  EXPECT_THROW(game.EvaluateBatch(batch), TimeoutError);
}

TEST(ExternalGameTest, BadHandshakeOrMissingCommand) {
  EXPECT_THROW(ExternalGame(ServerCommand("--d 5"), 6), ProtocolError);
  EXPECT_THROW(ExternalGame("exit 3", 4), ProcessExitError);
}

}  // namespace
}  // namespace unishap
