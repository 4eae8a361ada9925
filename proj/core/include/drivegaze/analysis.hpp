#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "drivegaze/clip.hpp"
#include "drivegaze/net.hpp"
#include "drivegaze/tensor.hpp"

namespace drivegaze::analysis {

inline constexpr std::size_t kSpeedBuckets = 5;
/// Half-open bucket edges in km/h; the last bucket is unbounded.
inline constexpr std::array<double, kSpeedBuckets> kBucketLo{0.0, 10.0, 30.0, 50.0, 70.0};
inline constexpr std::array<double, kSpeedBuckets> kBucketHi{10.0, 30.0, 50.0, 70.0, std::numeric_limits<double>::infinity()};

/// Bucket index of a nonnegative speed. Throws std::invalid_argument for
/// negative or non-finite speeds.
std::size_t speed_bucket(double speed_kmh);

struct SpeedBucket {
  double lo = 0.0;
  double hi = 0.0;
  Tensor mean_map;  // empty when no frame fell in the bucket
  std::size_t count = 0;
  std::array<std::size_t, kLandscapeCount> landscapes{};

  bool empty() const { return count == 0; }
};

struct SpeedBucketSummary {
  std::array<SpeedBucket, kSpeedBuckets> buckets;
};

/// maps[i] is paired with records[i] (speed and landscape).
SpeedBucketSummary speed_bucket_maps(std::span<const Tensor> maps, std::span<const FrameRecord> records);
SpeedBucketSummary speed_bucket_maps(const std::vector<Sequence>& sequences);

/// Second central spatial moment of a nonnegative map, with coordinates
/// y / H and x / W: sum w ((y - my)^2 + (x - mx)^2) / sum w.
double spatial_spread(const Tensor& map);

struct MeanAndMode {
  Tensor mean;
  std::size_t mode_y = 0;
  std::size_t mode_x = 0;
};

/// Pixelwise mean; the mode is the argmax of the mean with ties broken by
/// smallest y, then smallest x.
MeanAndMode sequence_mean_and_mode(std::span<const Tensor> maps);

struct CategorySweep {
  std::vector<double> thresholds;
  std::vector<std::array<double, kCategoryCount>> proportions;  // per threshold
  std::vector<bool> empty;                                      // mask held no pixel
  std::array<double, kCategoryCount> slopes{};                  // least squares over nonempty thresholds

  /// Mean proportion per category across nonempty thresholds.
  std::array<double, kCategoryCount> mean_proportions() const;
};

/// Thresholds k / n for k = 0 .. n - 1.
std::vector<double> linear_thresholds(std::size_t n);

/// For every threshold t: labels of pixels with map >= t, pooled over all
/// pairs and normalised to proportions. Maps are 1 x H x W (or H x W) and
/// must align with their label maps.
CategorySweep threshold_sweep(std::span<const Tensor> maps, std::span<const LabelMap> segmentation,
                              std::span<const double> thresholds);
CategorySweep threshold_sweep(std::span<const Tensor> maps, std::span<const LabelMap> segmentation,
                              std::size_t n_thresholds = 10);

inline constexpr double kHardCcThreshold = 0.3;

struct HardSelection {
  std::vector<FrameRange> windows;      // merged selected frame ranges
  std::vector<FrameRange> tiles;        // every evaluated window
  std::vector<std::optional<double>> tile_cc;
  bool unselectable = false;            // sequence-mean map is constant

  std::vector<bool> frame_mask(std::size_t length) const;
};

/// Tiles the sequence into consecutive windows of `window` frames (the last
/// may be shorter), scores each by the mean CC of its maps against the
/// sequence-mean map and keeps windows scoring strictly below `threshold`.
/// Touching kept windows are merged.
HardSelection select_hard_subsequences(std::span<const Tensor> maps, std::size_t window = kClipFrames,
                                       double threshold = kHardCcThreshold);

inline constexpr double kDeviationThreshold = 0.10;

struct DeviationOverlay {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> precision;  // flat indices where P - G > threshold
  std::vector<std::size_t> recall;     // flat indices where G - P > threshold
};

DeviationOverlay deviation_overlay(const Tensor& prediction, const Tensor& target,
                                   double threshold = kDeviationThreshold);

/// Kendall tau-b between the per-category mean proportions of two sweeps.
std::optional<double> category_rank_agreement(const CategorySweep& gt, const CategorySweep& prediction);

/// Jaccard index of two frame masks; 1 when both are empty.
double jaccard(const std::vector<bool>& a, const std::vector<bool>& b);

// Exports. Maps are written as 8-bit binary PGM scaled by their maximum;
// the overlay is a binary PPM with the map in grey, precision errors in
// green and recall errors in red.
void write_pgm(const std::filesystem::path& path, const Tensor& map);
void write_overlay_ppm(const std::filesystem::path& path, const Tensor& background, const DeviationOverlay& overlay);

void write_bucket_csv(std::ostream& out, const SpeedBucketSummary& summary);
void write_sweep_csv(std::ostream& out, const CategorySweep& sweep, const std::string& source);
void write_slopes_csv(std::ostream& out, const CategorySweep& sweep, const std::string& source);

}  // namespace drivegaze::analysis
