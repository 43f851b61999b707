#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "truncgen/latent.hpp"

using namespace truncgen;

namespace {

MeanStyle mean_of(std::initializer_list<double> v) {
  MeanStyle m;
  m.w_bar = Eigen::VectorXd(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m.w_bar[i++] = x;
  return m;
}

StyleCode rows(std::initializer_list<std::initializer_list<double>> r) {
  StyleCode w(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double x : row) w(i, j++) = x;
    ++i;
  }
  return w;
}

}  // namespace

TEST(Truncate, HalvesTowardZeroMean) {
  const StyleCode out = truncate(rows({{2, 4}}), mean_of({0, 0}), 0.5, 1);
  EXPECT_EQ(out, rows({{1, 2}}));
}

TEST(Truncate, CutoffLeavesDeepRowsUntouched) {
  const StyleCode out = truncate(rows({{3, 1}, {5, 5}}), mean_of({1, 1}), 0.5, 1);
  EXPECT_EQ(out, rows({{2, 1}, {5, 5}}));
}

TEST(Truncate, PsiOneIsExactCopy) {
  std::mt19937_64 e(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  StyleCode w(6, 7);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(e);
  MeanStyle m;
  m.w_bar = Eigen::VectorXd::Constant(7, 0.123456789);
  EXPECT_EQ(truncate(w, m, 1.0, 6), w);
}

TEST(Truncate, TinyPsiCollapsesOntoMean) {
  const StyleCode out = truncate(rows({{10, -10}, {4, 4}}), mean_of({1, 2}), 1e-9, 2);
  EXPECT_NEAR(out(0, 0), 1.0, 1e-7);
  EXPECT_NEAR(out(0, 1), 2.0, 1e-7);
  EXPECT_NEAR(out(1, 0), 1.0, 1e-7);
}

TEST(Truncate, RejectsBadArguments) {
  const StyleCode w = rows({{1, 2}, {3, 4}});
  EXPECT_THROW(truncate(w, mean_of({0, 0}), 0.0, 1), InvalidArgument);
  EXPECT_THROW(truncate(w, mean_of({0, 0}), 1.5, 1), InvalidArgument);
  EXPECT_THROW(truncate(w, mean_of({0, 0}), 0.5, 0), InvalidArgument);
  EXPECT_THROW(truncate(w, mean_of({0, 0}), 0.5, 3), InvalidArgument);
  EXPECT_THROW(truncate(w, mean_of({0, 0, 0}), 0.5, 1), InvalidArgument);
}

TEST(Truncate, WorksForFloatScalar) {
  StyleCodeT<float> w(1, 2);
  w << 2.f, 4.f;
  MeanStyleT<float> m;
  m.w_bar = StyleVectorT<float>::Zero(2);
  const auto out = truncate<float>(w, m, 0.5f, 1);
  EXPECT_EQ(out(0, 0), 1.f);
  EXPECT_EQ(out(0, 1), 2.f);
}

TEST(StyleMix, QuarterWeightOnLayerZero) {
  const StyleCode out = style_mix(rows({{0, 0}}), rows({{2, 4}}), {0}, 0.25);
  EXPECT_EQ(out, rows({{0.5, 1}}));
}

TEST(StyleMix, EndpointsAreExact) {
  const StyleCode src = rows({{0.1, 0.7}, {0.3, 0.9}});
  const StyleCode riv = rows({{-0.4, 0.2}, {0.6, -0.8}});
  EXPECT_EQ(style_mix(src, riv, {0, 1}, 0.0), src);
  EXPECT_EQ(style_mix(src, riv, {0, 1}, 1.0), riv);
  const StyleCode half = style_mix(src, riv, {1}, 1.0);
  EXPECT_EQ(half.row(0), src.row(0));
  EXPECT_EQ(half.row(1), riv.row(1));
}

TEST(StyleMix, RejectsBadArguments) {
  const StyleCode a = rows({{1, 2}});
  EXPECT_THROW(style_mix(a, rows({{1, 2, 3}}), {0}, 0.5), InvalidArgument);
  EXPECT_THROW(style_mix(a, a, {1}, 0.5), InvalidArgument);
  EXPECT_THROW(style_mix(a, a, {0}, -0.1), InvalidArgument);
  EXPECT_THROW(style_mix(a, a, {0}, 1.1), InvalidArgument);
}

TEST(MeanStyle, ConstantMapperIsExact) {
  Eigen::VectorXd c(3);
  c << 0.1, -2.5, 7.0 / 3.0;
  const auto m = estimate_mean_style<double>([&](const Eigen::VectorXd&) { return c; }, 4, 777, 9);
  EXPECT_EQ(m.w_bar, c);
  EXPECT_EQ(m.sample_count, 777);
}

TEST(MeanStyle, SingleSampleIsThatSample) {
  const auto m = estimate_mean_style<double>([](const Eigen::VectorXd& z) { return Eigen::VectorXd(2 * z); }, 3, 1, 5);
  NormalStream n(5);
  EXPECT_EQ(m.w_bar, Eigen::VectorXd(2 * n.vector(3)));
}

TEST(MeanStyle, IdentityMapperMeanMatchesSeededDraws) {
  const auto fx = tgtest::load("rng.json")["identity_mean"];
  const auto m = estimate_mean_style<double>([](const Eigen::VectorXd& z) { return z; }, 1,
                                             fx["samples"].get<std::int64_t>(), fx["seed"].get<std::uint64_t>());
  EXPECT_NEAR(m.w_bar[0], fx["mean"].get<double>(), 1e-12);
  EXPECT_LT(std::abs(m.w_bar[0]), 0.02);
}

TEST(MeanStyle, RejectsBadArguments) {
  auto id = [](const Eigen::VectorXd& z) { return z; };
  EXPECT_THROW(estimate_mean_style<double>(id, 2, 0, 1), InvalidArgument);
  EXPECT_THROW(estimate_mean_style<double>(id, 0, 5, 1), InvalidArgument);
}

TEST(Schedule, PresetsAndValidation) {
  EXPECT_EQ(fixed_schedule(), (std::vector<double>{1.0, 0.9, 0.8, 0.7, 0.6, 0.5}));
  EXPECT_EQ(adaptive_schedule(), (std::vector<double>{1.0, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.60, 0.50}));
  EXPECT_NO_THROW(validate_schedule(adaptive_schedule()));
  EXPECT_THROW(validate_schedule({}), InvalidArgument);
  EXPECT_THROW(validate_schedule({0.9, 0.8}), InvalidArgument);
  EXPECT_THROW(validate_schedule({1.0, 0.8, 0.8}), InvalidArgument);
  EXPECT_THROW(validate_schedule({1.0, 0.0}), InvalidArgument);
}

TEST(Schedule, PolicyValidation) {
  TruncationPolicy p;
  p.cutoff = 2;
  EXPECT_NO_THROW(p.validate(4));
  p.psi = 0.7;
  EXPECT_THROW(p.validate(4), InvalidArgument);
  p.mode = TruncationMode::Fixed;
  EXPECT_NO_THROW(p.validate(4));
  p.cutoff = 5;
  EXPECT_THROW(p.validate(4), InvalidArgument);
  EXPECT_EQ(truncation_mode_from_string(to_string(TruncationMode::Adaptive)), TruncationMode::Adaptive);
  EXPECT_THROW(truncation_mode_from_string("gradual"), InvalidArgument);
}
