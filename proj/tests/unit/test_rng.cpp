#include <gtest/gtest.h>

#include "support.hpp"
#include "truncgen/rng.hpp"

using namespace truncgen;

TEST(Rng, Mt19937_64MatchesReferenceStream) {
  const auto fx = tgtest::load("rng.json");
  for (const auto& c : fx["mt19937_64"]) {
    std::mt19937_64 e(c["seed"].get<std::uint64_t>());
    for (const auto& v : c["outputs"]) EXPECT_EQ(e(), v.get<std::uint64_t>());
  }
}

TEST(Rng, DeriveSeedMatchesReference) {
  const auto fx = tgtest::load("rng.json")["derive_seed"];
  const std::vector<std::uint64_t> got{
      derive_seed({}),
      derive_seed({0}),
      derive_seed({1, 2, 3}),
      derive_seed({0x5eed, 7, 1343}),
      derive_seed({~0ULL, 0}),
      derive_seed({0, 0x6d65616e5f777}),
  };
  ASSERT_EQ(fx.size(), got.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], fx[i]["seed"].get<std::uint64_t>()) << i;
}

TEST(Rng, NormalStreamMatchesBoxMullerReference) {
  const auto fx = tgtest::load("rng.json");
  for (const auto& c : fx["normal"]) {
    NormalStream n(c["seed"].get<std::uint64_t>());
    for (const auto& v : c["draws"]) EXPECT_NEAR(n(), v.get<double>(), 1e-14);
  }
}

TEST(Rng, NormalVectorConsumesStreamInOrder) {
  NormalStream a(42), b(42);
  const Eigen::VectorXd v = a.vector(5);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(v[i], b());
  EXPECT_EQ(a(), b());
}
