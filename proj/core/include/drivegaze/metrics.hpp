#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drivegaze/clip.hpp"
#include "drivegaze/tensor.hpp"

namespace drivegaze::metrics {

inline constexpr double kKlEpsilon = 1e-7;
inline constexpr double kDefaultSigmaFraction = 0.25;

/// Pearson correlation over all cells with population moments. nullopt when
/// either map is constant.
std::optional<double> cc(const Tensor& prediction, const Tensor& target);

/// KL(G || P) after adding epsilon to every cell and sum-normalising both maps.
double kl(const Tensor& target, const Tensor& prediction, double epsilon = kKlEpsilon);

/// Tau-b with tie correction, O(n log n). nullopt when either series is all ties.
/// Throws std::invalid_argument for unequal lengths or fewer than two items.
std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b);

enum class BaselineKind { CenteredGaussian, MeanTrainGt };

struct BaselinePredictor {
  BaselineKind kind = BaselineKind::CenteredGaussian;
  double sigma_y = 0.0;  // pixels; Gaussian only
  double sigma_x = 0.0;
  Tensor map;            // 1 x H x W, the prediction emitted for every clip
};

/// exp(-((y - cy)^2 / 2 sy^2 + (x - cx)^2 / 2 sx^2)) with s = fraction * extent,
/// centred at ((H - 1) / 2, (W - 1) / 2), max-normalised.
BaselinePredictor gaussian_baseline(std::size_t height, std::size_t width, double sigma_fraction = kDefaultSigmaFraction);

/// Pixelwise mean of the given maps.
BaselinePredictor mean_gt_baseline(std::span<const Tensor> maps);

struct ClipScore {
  std::string sequence_id;
  std::size_t end_frame = 0;
  std::optional<double> cc;
  double kl = 0.0;
  bool hard = false;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

struct MetricReport {
  std::vector<ClipScore> clips;
  double sigma_fraction = kDefaultSigmaFraction;
  std::string predictor;

  Aggregate cc_aggregate(const std::function<bool(const ClipScore&)>& keep) const;
  Aggregate kl_aggregate(const std::function<bool(const ClipScore&)>& keep) const;

  /// Columns sequence_id, clip_end_frame, cc, kl, hard. Aggregate rows carry
  /// sequence_id ALL and clip_end_frame "<scope>:<stat>" where scope is
  /// full, hard or a sequence id and stat is mean, std or count.
  void write_csv(std::ostream& out) const;
};

Aggregate aggregate(std::span<const double> values);

/// Map predicted for the clip ending at `end_index` of `sequence`.
using MapPredictor = std::function<Tensor(const Sequence& sequence, std::size_t end_index)>;

struct EvalOptions {
  /// Bilinearly resample predictions to the ground-truth extent when they
  /// differ. When false a mismatch throws ShapeError.
  bool resample = true;
  /// Per sequence, per frame: frame belongs to the hard subset. May be empty.
  std::vector<std::vector<bool>> hard_frames;
};

MetricReport evaluate(const MapPredictor& predictor, const std::vector<Sequence>& sequences,
                      std::span<const ClipRef> clips, const EvalOptions& options);

}  // namespace drivegaze::metrics
