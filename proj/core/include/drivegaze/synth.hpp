#pragma once

// Procedural driving sequences with a planted gaze policy.
//
// Each frame shows a road converging to a vanishing point, side scenery
// that streams towards the camera at the current speed and a lead vehicle
// just below the vanishing point. The ground-truth map is a Gaussian on the
// lead vehicle whose spread shrinks with speed; during planted event
// segments most of the mass moves to a salient object at the roadside.

#include <cstdint>
#include <vector>

#include "drivegaze/clip.hpp"

namespace drivegaze {

struct SynthConfig {
  std::size_t sequences = 6;
  std::size_t frames = 800;
  std::size_t height = 48;
  std::size_t width = 64;
  double event_fraction = 0.10;
  std::size_t event_length = 32;
  std::size_t speed_unit = 16;  // frames per dwell unit of the speed cycle
};

/// Per-frame planted truth, in native pixel coordinates.
struct SynthTruth {
  std::vector<double> vanishing_y, vanishing_x;
  std::vector<double> gaze_y, gaze_x;
  std::vector<double> spread;  // Gaussian sigma as a fraction of each extent
  std::vector<bool> event;
  std::vector<FrameRange> event_segments;
};

struct SynthSequence {
  Sequence sequence;
  SynthTruth truth;
};

/// Representative speeds used for the five speed buckets of the cycle.
inline constexpr std::array<double, 5> kBucketSpeedLo{0.0, 10.0, 30.0, 50.0, 70.0};
inline constexpr std::array<double, 5> kBucketSpeedHi{10.0, 30.0, 50.0, 70.0, 110.0};

/// Gaze spread (sigma / extent) at a given speed; strictly decreasing.
double gaze_spread(double speed_kmh);
/// Horizontal swing of the vanishing point (fraction of width); decreasing in speed.
double curve_amplitude(double speed_kmh);

/// Sequence i gets landscape i % 3 and id "seqNN". Deterministic in (config, seed).
std::vector<SynthSequence> synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace drivegaze
