#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "drivegaze/metrics.hpp"
#include "test_support.hpp"

namespace drivegaze {
namespace {

using testing::cc_oracle;
using testing::kl_oracle;
using testing::random_tensor;
using testing::tau_oracle;

TEST(Cc, MatchesBruteForce) {
  std::mt19937_64 rng(60);
  for (int i = 0; i < 100; ++i) {
    const Tensor p = random_tensor({1, 9, 11}, rng, 0.0, 1.0);
    const Tensor g = random_tensor({1, 9, 11}, rng, 0.0, 1.0);
    EXPECT_NEAR(*metrics::cc(p, g), cc_oracle(p, g), 1e-10);
  }
}

TEST(Cc, IdentityAffineInvarianceAndUndefined) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = random_tensor({1, 6, 7}, rng, 0.0, 1.0);
    const Tensor y = random_tensor({1, 6, 7}, rng, 0.0, 1.0);
    EXPECT_NEAR(*metrics::cc(x, x), 1.0, 1e-12);
    Tensor ax = x * 3.7;
    for (auto& v : ax.data()) v += 0.25;
    EXPECT_NEAR(*metrics::cc(ax, y), *metrics::cc(x, y), 1e-12);
    EXPECT_NEAR(*metrics::cc(x * -1.0, y), -*metrics::cc(x, y), 1e-12);
    const double c = *metrics::cc(x, y);
    EXPECT_LE(std::abs(c), 1.0);
    EXPECT_NEAR(c, *metrics::cc(y, x), 1e-14);
  }
  EXPECT_FALSE(metrics::cc(Tensor({1, 3, 3}, 0.5), random_tensor({1, 3, 3}, rng)).has_value());
  EXPECT_THROW(metrics::cc(Tensor({1, 3, 3}), Tensor({1, 3, 4})), ShapeError);
}

TEST(Kl, MatchesBruteForce) {
  std::mt19937_64 rng(62);
  for (int i = 0; i < 100; ++i) {
    const Tensor g = random_tensor({1, 8, 10}, rng, 0.0, 1.0);
    const Tensor p = random_tensor({1, 8, 10}, rng, 0.0, 1.0);
    EXPECT_NEAR(metrics::kl(g, p), kl_oracle(g, p, 1e-7), 1e-10);
  }
}

TEST(Kl, PropertiesAndDirection) {
  std::mt19937_64 rng(63);
  const Tensor x = random_tensor({1, 5, 5}, rng, 0.0, 1.0);
  EXPECT_NEAR(metrics::kl(x, x), 0.0, 1e-15);
  EXPECT_NEAR(metrics::kl(x, x * 4.0), 0.0, 1e-9);  // scale only moves epsilon's weight
  const Tensor y = random_tensor({1, 5, 5}, rng, 0.0, 1.0);
  EXPECT_GT(metrics::kl(x, y), 0.0);
  // Peaked target against flat prediction is finite; the reverse direction is large.
  Tensor peak({1, 5, 5});
  peak[12] = 1.0;
  const Tensor flat({1, 5, 5}, 1.0);
  EXPECT_NEAR(metrics::kl(peak, flat), std::log(25.0), 1e-4);
  EXPECT_GT(metrics::kl(flat, peak), 10.0);
}

TEST(KendallTau, MatchesPairCounting) {
  std::mt19937_64 rng(64);
  std::uniform_int_distribution<int> small(0, 6);
  std::uniform_int_distribution<std::size_t> len(2, 60);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = len(rng);
    std::vector<double> a(n), b(n);
    // Half of the series draw from a small alphabet so ties are common.
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = i % 2 ? small(rng) : std::uniform_real_distribution<double>()(rng);
      b[k] = small(rng);
    }
    const auto tau = metrics::kendall_tau(a, b);
    const double ref = tau_oracle(a, b);
    if (std::isnan(ref)) {
      EXPECT_FALSE(tau.has_value());
    } else {
      ASSERT_TRUE(tau.has_value());
      EXPECT_NEAR(*tau, ref, 1e-12);
    }
  }
}

TEST(KendallTau, EdgeCases) {
  const std::vector<double> a{1, 2, 3, 4}, rev{4, 3, 2, 1}, flat{1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(*metrics::kendall_tau(a, a), 1.0);
  EXPECT_DOUBLE_EQ(*metrics::kendall_tau(a, rev), -1.0);
  EXPECT_FALSE(metrics::kendall_tau(a, flat).has_value());
  EXPECT_THROW(metrics::kendall_tau(std::vector<double>{1, 2}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(metrics::kendall_tau(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Baselines, CenteredGaussian) {
  const auto b = metrics::gaussian_baseline(6, 8, 0.25);
  EXPECT_EQ(b.map.shape(), (Shape{1, 6, 8}));
  EXPECT_DOUBLE_EQ(b.sigma_y, 1.5);
  EXPECT_DOUBLE_EQ(b.sigma_x, 2.0);
  EXPECT_NEAR(b.map.max(), 1.0, 1e-12);
  // Symmetric about the centre in both axes.
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      EXPECT_NEAR(b.map.at({0, y, x}), b.map.at({0, 5 - y, x}), 1e-15);
      EXPECT_NEAR(b.map.at({0, y, x}), b.map.at({0, y, 7 - x}), 1e-15);
    }
  // Pixel (0, 0) relative to centre (2.5, 3.5).
  const double expected = std::exp(-(2.5 * 2.5 / (2 * 1.5 * 1.5) + 3.5 * 3.5 / (2 * 2.0 * 2.0)));
  const double peak = std::exp(-(0.25 / (2 * 1.5 * 1.5) + 0.25 / (2 * 2.0 * 2.0)));
  EXPECT_NEAR(b.map.at({0, 0, 0}), expected / peak, 1e-12);
  EXPECT_THROW(metrics::gaussian_baseline(6, 8, 0.0), std::invalid_argument);
}

TEST(Baselines, MeanGt) {
  const std::vector<Tensor> maps{Tensor({1, 2, 2}, std::vector<double>{1, 0, 0, 0}),
                                 Tensor({1, 2, 2}, std::vector<double>{0, 1, 0, 1})};
  const auto b = metrics::mean_gt_baseline(maps);
  EXPECT_EQ(b.map, Tensor({1, 2, 2}, std::vector<double>{0.5, 0.5, 0, 0.5}));
  EXPECT_EQ(b.kind, metrics::BaselineKind::MeanTrainGt);
  EXPECT_THROW(metrics::mean_gt_baseline(std::vector<Tensor>{}), std::invalid_argument);
}

TEST(Aggregate, PopulationStatistics) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto a = metrics::aggregate(v);
  EXPECT_DOUBLE_EQ(a.mean, 2.5);
  EXPECT_DOUBLE_EQ(a.std, std::sqrt(1.25));
  EXPECT_EQ(a.count, 4u);
  EXPECT_EQ(metrics::aggregate(std::vector<double>{}).count, 0u);
}

Sequence two_frame_sequence() {
  Sequence s;
  s.id = "s0";
  std::mt19937_64 rng(65);
  for (std::size_t i = 0; i < 20; ++i) {
    s.frames.emplace_back(Shape{3, 4, 4});
    s.maps.push_back(random_tensor({1, 4, 4}, rng, 0.0, 1.0));
  }
  return s;
}

TEST(Evaluate, ScoresResampleAndCsv) {
  const std::vector<Sequence> seqs{two_frame_sequence()};
  const std::vector<ClipRef> clips{{0, 15}, {0, 16}, {0, 19}};
  metrics::EvalOptions opts;
  opts.hard_frames = {std::vector<bool>(20, false)};
  opts.hard_frames[0][16] = true;

  // Perfect predictor at twice the resolution.
  auto upsampled = [](const Sequence& s, std::size_t e) { return ops::upsample2x(s.maps[e]); };
  const auto exact = metrics::evaluate([](const Sequence& s, std::size_t e) { return s.maps[e]; }, seqs, clips, opts);
  for (const auto& c : exact.clips) {
    EXPECT_NEAR(*c.cc, 1.0, 1e-12);
    EXPECT_NEAR(c.kl, 0.0, 1e-12);
  }
  EXPECT_TRUE(exact.clips[1].hard);
  EXPECT_FALSE(exact.clips[0].hard);
  EXPECT_EQ(exact.cc_aggregate([](const auto& c) { return c.hard; }).count, 1u);

  const auto resampled = metrics::evaluate(upsampled, seqs, clips, opts);
  EXPECT_EQ(resampled.clips.size(), 3u);
  opts.resample = false;
  EXPECT_THROW(metrics::evaluate(upsampled, seqs, clips, opts), ShapeError);

  // Constant predictor: undefined CC excluded from the aggregate.
  auto flat = [](const Sequence&, std::size_t) { return Tensor({1, 4, 4}, 1.0); };
  opts.resample = true;
  auto report = metrics::evaluate(flat, seqs, clips, opts);
  report.predictor = "flat";
  EXPECT_EQ(report.cc_aggregate([](const auto&) { return true; }).count, 0u);
  EXPECT_EQ(report.kl_aggregate([](const auto&) { return true; }).count, 3u);
  std::ostringstream csv;
  report.write_csv(csv);
  const std::string text = csv.str();
  EXPECT_NE(text.find("sequence_id,clip_end_frame,cc,kl,hard\n"), std::string::npos);
  EXPECT_NE(text.find("s0,15,undefined,"), std::string::npos);
  EXPECT_NE(text.find("ALL,full:count,0,3,0"), std::string::npos);
  EXPECT_NE(text.find("ALL,hard:count,0,1,1"), std::string::npos);
  EXPECT_NE(text.find("ALL,s0:mean,"), std::string::npos);
}

}  // namespace
}  // namespace drivegaze
