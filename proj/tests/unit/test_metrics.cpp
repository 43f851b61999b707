#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "truncgen/metrics.hpp"

using namespace truncgen;

TEST(Ssim, MatchesReferencePairs) {
  const auto fx = tgtest::load("ssim_pairs.json");
  ASSERT_EQ(fx["pairs"].size(), 20u);
  for (const auto& p : fx["pairs"]) {
    const Image x = tgtest::image(p["shape"], p["x"]);
    const Image y = tgtest::image(p["shape"], p["y"]);
    EXPECT_NEAR(ssim(x, y), p["ssim"].get<double>(), 1e-9) << p["kind"];
    EXPECT_NEAR(l2(x, y), p["l2"].get<double>(), 1e-12) << p["kind"];
  }
}

TEST(Ssim, IdenticalImagesScoreOne) {
  std::mt19937_64 e(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (ImageShape s : {ImageShape{32, 32, 1}, ImageShape{17, 9, 3}, ImageShape{3, 3, 1}}) {
    Image x(s);
    for (Eigen::Index i = 0; i < x.pixels.size(); ++i) x.pixels[i] = u(e);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
  }
}

TEST(Ssim, ConstantBlackVersusWhiteClosedForm) {
  const double c1 = kSsimK1 * kSsimK1;
  const Image a(ImageShape{16, 16, 1}, 0.0), b(ImageShape{16, 16, 1}, 1.0);
  EXPECT_NEAR(ssim(a, b), c1 / (1.0 + c1), 1e-15);
}

TEST(Ssim, SymmetricAndShapeChecked) {
  Image x(ImageShape{10, 10, 1}), y(ImageShape{10, 10, 1});
  for (int i = 0; i < 100; ++i) {
    x.pixels[i] = (i % 7) / 7.0;
    y.pixels[i] = (i % 5) / 5.0;
  }
  EXPECT_DOUBLE_EQ(ssim(x, y), ssim(y, x));
  EXPECT_THROW(ssim(x, Image(ImageShape{10, 11, 1})), InvalidArgument);
  EXPECT_THROW(l2(x, Image(ImageShape{10, 10, 3})), InvalidArgument);
}

TEST(L2, ClosedForms) {
  EXPECT_DOUBLE_EQ(l2(Image(ImageShape{8, 8, 1}, 0.0), Image(ImageShape{8, 8, 1}, 1.0)), 1.0);
  Image a(ImageShape{28, 28, 1}, 0.2), b = a;
  b.at(13, 7, 0) = 0.7;
  EXPECT_NEAR(l2(a, b), 0.5 / 28.0, 1e-15);
  EXPECT_EQ(l2(a, a), 0.0);
}

TEST(L2, MetricAxiomsOnRandomTriples) {
  std::mt19937_64 e(8);
  std::uniform_real_distribution<double> u(0, 1);
  auto rnd = [&] {
    Image x(ImageShape{6, 5, 3});
    for (Eigen::Index i = 0; i < x.pixels.size(); ++i) x.pixels[i] = u(e);
    return x;
  };
  for (int t = 0; t < 200; ++t) {
    const Image a = rnd(), b = rnd(), c = rnd();
    EXPECT_GE(l2(a, b), 0.0);
    EXPECT_NEAR(l2(a, b), l2(b, a), 1e-15);
    EXPECT_LE(l2(a, c), l2(a, b) + l2(b, c) + 1e-12);
  }
}

TEST(Embedder, MatchesReference) {
  const auto fx = tgtest::load("embedder.json");
  const PyramidEmbedder emb(fx["levels"], fx["dim"], fx["seed"].get<std::uint64_t>());
  EXPECT_EQ(emb.id(), "pyramid-rademacher/levels=3/dim=64/seed=24301");
  for (const auto& im : fx["images"]) {
    const Image img = tgtest::image(im["shape"], im["pixels"]);
    EXPECT_EQ(emb.pyramid_features(img).size(), im["features"].get<Eigen::Index>()) << im["name"];
    const Eigen::VectorXd got = emb.embed(img);
    EXPECT_LT((got - tgtest::vec(im["embedding"])).cwiseAbs().maxCoeff(), 1e-12) << im["name"];
  }
}

TEST(Embedder, DiversityIsMeanOfPairDistances) {
  const auto fx = tgtest::load("embedder.json");
  std::vector<Eigen::VectorXd> e;
  for (int i = 0; i < 3; ++i) e.push_back(tgtest::vec(fx["images"][i]["embedding"]));
  EXPECT_NEAR(embedding_distance(e[0], e[1]), fx["pair_distances_first3"][0].get<double>(), 1e-12);
  EXPECT_NEAR(embedding_distance(e[0], e[2]), fx["pair_distances_first3"][1].get<double>(), 1e-12);
  EXPECT_NEAR(embedding_distance(e[1], e[2]), fx["pair_distances_first3"][2].get<double>(), 1e-12);
  const Diversity d = mean_pairwise_diversity(e);
  EXPECT_TRUE(d.defined);
  EXPECT_EQ(d.pairs, 3u);
  EXPECT_NEAR(d.value, fx["diversity_first3"].get<double>(), 1e-12);

  std::vector<Image> imgs;
  for (int i = 0; i < 2; ++i) imgs.push_back(tgtest::image(fx["images"][i]["shape"], fx["images"][i]["pixels"]));
  EXPECT_NEAR(mean_pairwise_diversity(imgs, PyramidEmbedder()).value, fx["pair_distances_first3"][0].get<double>(),
              1e-12);
}

TEST(Embedder, DegenerateInputs) {
  EXPECT_FALSE(mean_pairwise_diversity(std::vector<Eigen::VectorXd>{}).defined);
  EXPECT_FALSE(mean_pairwise_diversity(std::vector<Eigen::VectorXd>{Eigen::VectorXd::Ones(4)}).defined);
  EXPECT_EQ(unit_normalized(Eigen::VectorXd::Zero(3)), Eigen::VectorXd::Zero(3));
  Eigen::VectorXd v(2);
  v << 3, 4;
  EXPECT_NEAR(unit_normalized(v)[1], 0.8, 1e-15);
  EXPECT_NEAR(embedding_distance(v, 2 * v), 0.0, 1e-15);
  const Image a(ImageShape{8, 8, 1}, 0.3);
  EXPECT_NEAR(perceptual_distance(a, a, PyramidEmbedder()), 0.0, 1e-15);
}
