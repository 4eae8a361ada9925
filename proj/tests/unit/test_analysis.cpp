#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "drivegaze/analysis.hpp"
#include "drivegaze/metrics.hpp"
#include "test_support.hpp"

namespace drivegaze {
namespace {

using testing::random_tensor;

Tensor blob(std::size_t h, std::size_t w, double cy, double cx, double sigma) {
  Tensor t({1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      t.at({0, y, x}) = std::exp(-((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2 * sigma * sigma));
  return t;
}

TEST(SpeedBucket, HalfOpenEdges) {
  EXPECT_EQ(analysis::speed_bucket(0.0), 0u);
  EXPECT_EQ(analysis::speed_bucket(9.999), 0u);
  EXPECT_EQ(analysis::speed_bucket(10.0), 1u);
  EXPECT_EQ(analysis::speed_bucket(29.999), 1u);
  EXPECT_EQ(analysis::speed_bucket(30.0), 2u);
  EXPECT_EQ(analysis::speed_bucket(50.0), 3u);
  EXPECT_EQ(analysis::speed_bucket(70.0), 4u);
  EXPECT_EQ(analysis::speed_bucket(250.0), 4u);
  EXPECT_THROW(analysis::speed_bucket(-1.0), std::invalid_argument);
  EXPECT_THROW(analysis::speed_bucket(std::nan("")), std::invalid_argument);
}

TEST(SpeedBucket, MeansCountsAndLandscapes) {
  const std::vector<Tensor> maps{Tensor({1, 2, 2}, 1.0), Tensor({1, 2, 2}, 3.0), Tensor({1, 2, 2}, 5.0)};
  std::vector<FrameRecord> rec(3);
  rec[0].speed_kmh = 5;
  rec[1].speed_kmh = 8;
  rec[1].landscape = Landscape::Highway;
  rec[2].speed_kmh = 75;
  const auto s = analysis::speed_bucket_maps(maps, rec);
  EXPECT_EQ(s.buckets[0].count, 2u);
  EXPECT_EQ(s.buckets[0].mean_map, Tensor({1, 2, 2}, 2.0));
  EXPECT_EQ(s.buckets[0].landscapes[0], 1u);
  EXPECT_EQ(s.buckets[0].landscapes[2], 1u);
  EXPECT_TRUE(s.buckets[1].empty());
  EXPECT_EQ(s.buckets[4].count, 1u);
  std::ostringstream csv;
  analysis::write_bucket_csv(csv, s);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "bucket,lo_kmh,hi_kmh,frames,downtown,countryside,highway,spread");
}

TEST(SpatialSpread, ScalesWithBlobWidth) {
  const double narrow = analysis::spatial_spread(blob(40, 40, 20, 20, 2));
  const double wide = analysis::spatial_spread(blob(40, 40, 20, 20, 6));
  EXPECT_LT(narrow, wide);
  // Point mass has zero spread; translation leaves it unchanged away from borders.
  Tensor point({1, 9, 9});
  point.at({0, 4, 4}) = 1.0;
  EXPECT_DOUBLE_EQ(analysis::spatial_spread(point), 0.0);
  EXPECT_NEAR(analysis::spatial_spread(blob(60, 60, 25, 25, 3)), analysis::spatial_spread(blob(60, 60, 33, 30, 3)),
              1e-9);
  // Two unit masses at opposite corners, coordinates y / H and x / W: variance 0.16 per axis.
  Tensor corners({1, 5, 5});
  corners.at({0, 0, 0}) = 1;
  corners.at({0, 4, 4}) = 1;
  EXPECT_NEAR(analysis::spatial_spread(corners), 0.32, 1e-12);
}

TEST(MeanAndMode, FirstArgmaxTieBreak) {
  Tensor a({1, 3, 3}), b({1, 3, 3});
  a.at({0, 1, 2}) = 1.0;
  b.at({0, 2, 0}) = 1.0;
  const std::vector<Tensor> maps{a, b};
  const auto m = analysis::sequence_mean_and_mode(maps);
  EXPECT_EQ(m.mean.at({0, 1, 2}), 0.5);
  EXPECT_EQ(m.mode_y, 1u);
  EXPECT_EQ(m.mode_x, 2u);
}

TEST(ThresholdSweep, ProportionsSumToOneAndSlopes) {
  // Map is high on label 8 (vehicles) and low on label 6 (sky).
  const std::size_t H = 6, W = 6;
  LabelMap seg{H, W, std::vector<std::uint8_t>(H * W, 0)};
  Tensor map({1, H, W});
  for (std::size_t i = 0; i < H * W; ++i) {
    if (i < 6) {
      seg.labels[i] = 6;
      map[i] = 0.05;
    } else if (i >= 30) {
      seg.labels[i] = 8;
      map[i] = 1.0;
    } else {
      map[i] = 0.05 + 0.9 * double(i - 6) / 24.0;
    }
  }
  const std::vector<Tensor> maps{map};
  const std::vector<LabelMap> segs{seg};
  const auto sweep = analysis::threshold_sweep(maps, segs, 10);
  ASSERT_EQ(sweep.thresholds, analysis::linear_thresholds(10));
  for (std::size_t k = 0; k < sweep.thresholds.size(); ++k) {
    if (sweep.empty[k]) continue;
    double total = 0;
    for (double p : sweep.proportions[k]) total += p;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  EXPECT_GT(sweep.slopes[8], 0.0);
  EXPECT_LT(sweep.slopes[6], 0.0);
  std::ostringstream csv;
  analysis::write_sweep_csv(csv, sweep, "gt");
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
}

TEST(ThresholdSweep, EmptyThresholdsAndMismatch) {
  const std::vector<Tensor> maps{Tensor({1, 2, 2}, 0.2)};
  const std::vector<LabelMap> segs{LabelMap{2, 2, {0, 1, 2, 3}}};
  const std::vector<double> t{0.1, 0.5};
  const auto s = analysis::threshold_sweep(maps, segs, t);
  EXPECT_FALSE(s.empty[0]);
  EXPECT_TRUE(s.empty[1]);
  EXPECT_DOUBLE_EQ(s.proportions[0][3], 0.25);
  const std::vector<LabelMap> bad{LabelMap{3, 2, {0, 0, 0, 0, 0, 0}}};
  EXPECT_THROW(analysis::threshold_sweep(maps, bad, t), ShapeError);
}

TEST(HardSelection, FindsPlantedWindow) {
  std::vector<Tensor> maps;
  for (std::size_t f = 0; f < 96; ++f) {
    const bool drift = f >= 32 && f < 48;
    maps.push_back(drift ? blob(16, 16, 3, 13, 1.5) : blob(16, 16, 10, 8, 2.0));
  }
  const auto sel = analysis::select_hard_subsequences(maps, 16, 0.3);
  ASSERT_EQ(sel.windows.size(), 1u);
  EXPECT_EQ(sel.windows[0], (FrameRange{32, 48}));
  EXPECT_EQ(sel.tiles.size(), 6u);
  const auto mask = sel.frame_mask(96);
  std::vector<bool> truth(96, false);
  for (std::size_t f = 32; f < 48; ++f) truth[f] = true;
  EXPECT_DOUBLE_EQ(analysis::jaccard(mask, truth), 1.0);
}

TEST(HardSelection, MergesAndHandlesShortTail) {
  std::vector<Tensor> maps;
  // Drift stays a minority so the sequence mean is dominated by the usual blob.
  for (std::size_t f = 0; f < 134; ++f) {
    const bool drift = f >= 16 && f < 48;
    maps.push_back(drift ? blob(12, 12, 1, 10, 1.0) : blob(12, 12, 8, 4, 1.5));
  }
  const auto sel = analysis::select_hard_subsequences(maps, 16);
  EXPECT_EQ(sel.tiles.back(), (FrameRange{128, 134}));
  ASSERT_EQ(sel.windows.size(), 1u);
  EXPECT_EQ(sel.windows[0], (FrameRange{16, 48}));
  const std::vector<Tensor> flat(20, Tensor({1, 4, 4}, 1.0));
  EXPECT_TRUE(analysis::select_hard_subsequences(flat).unselectable);
}

TEST(Jaccard, Values) {
  EXPECT_DOUBLE_EQ(analysis::jaccard({false, false}, {false, false}), 1.0);
  EXPECT_DOUBLE_EQ(analysis::jaccard({true, true, false}, {false, true, true}), 1.0 / 3.0);
  EXPECT_THROW(analysis::jaccard({true}, {true, false}), std::invalid_argument);
}

TEST(Deviation, PartitionsPixels) {
  std::mt19937_64 rng(70);
  const Tensor p = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  const Tensor g = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  const auto d = analysis::deviation_overlay(p, g);
  for (std::size_t i : d.precision) EXPECT_GT(p[i] - g[i], 0.10);
  for (std::size_t i : d.recall) EXPECT_GT(g[i] - p[i], 0.10);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 64; ++i) expected += std::abs(p[i] - g[i]) > 0.10;
  EXPECT_EQ(d.precision.size() + d.recall.size(), expected);
  EXPECT_TRUE(analysis::deviation_overlay(p, p).precision.empty());
}

TEST(RankAgreement, IdenticalSweepsAgree) {
  analysis::CategorySweep a;
  a.thresholds = {0.0};
  a.empty = {false};
  a.proportions = {{0.3, 0.2, 0.1, 0.05, 0.15, 0.04, 0.06, 0.02, 0.07, 0.01}};
  EXPECT_DOUBLE_EQ(*analysis::category_rank_agreement(a, a), 1.0);
}

TEST(Export, PgmAndPpmHeaders) {
  const auto dir = std::filesystem::temp_directory_path() / "drivegaze_test_export";
  std::filesystem::create_directories(dir);
  Tensor m({1, 2, 3}, std::vector<double>{0, 0.5, 1, 0, 0, 2});
  analysis::write_pgm(dir / "m.pgm", m);
  std::ifstream in(dir / "m.pgm", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(bytes.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 6u);
  EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 255);

  analysis::DeviationOverlay o{2, 3, {0}, {5}};
  analysis::write_overlay_ppm(dir / "o.ppm", m, o);
  std::ifstream pin(dir / "o.ppm", std::ios::binary);
  std::string ppm((std::istreambuf_iterator<char>(pin)), {});
  EXPECT_EQ(ppm.substr(0, 11), "P6\n3 2\n255\n");
  EXPECT_EQ(ppm.size(), 11u + 18u);
}

}  // namespace
}  // namespace drivegaze
