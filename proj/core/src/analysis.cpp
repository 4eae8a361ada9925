#include "drivegaze/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "drivegaze/metrics.hpp"

namespace drivegaze::analysis {

namespace {

void require_map(const Tensor& map, const char* what) {
  if (!(map.rank() == 3 && map.dim(0) == 1) && map.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a 1 x H x W map, got " + shape_str(map.shape()));
  }
}

std::size_t map_height(const Tensor& m) { return m.dim(m.rank() - 2); }
std::size_t map_width(const Tensor& m) { return m.dim(m.rank() - 1); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

}  // namespace

std::size_t speed_bucket(double speed_kmh) {
  if (!std::isfinite(speed_kmh) || speed_kmh < 0.0) {
    throw std::invalid_argument("speed must be finite and nonnegative, got " + std::to_string(speed_kmh));
  }
  for (std::size_t b = 0; b + 1 < kSpeedBuckets; ++b) {
    if (speed_kmh < kBucketHi[b]) return b;
  }
  return kSpeedBuckets - 1;
}

SpeedBucketSummary speed_bucket_maps(std::span<const Tensor> maps, std::span<const FrameRecord> records) {
  if (maps.size() != records.size()) throw std::invalid_argument("speed_bucket_maps: one record per map required");
  SpeedBucketSummary s;
  for (std::size_t b = 0; b < kSpeedBuckets; ++b) {
    s.buckets[b].lo = kBucketLo[b];
    s.buckets[b].hi = kBucketHi[b];
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    require_map(maps[i], "speed_bucket_maps");
    SpeedBucket& bucket = s.buckets[speed_bucket(records[i].speed_kmh)];
    if (bucket.mean_map.empty()) {
      bucket.mean_map = Tensor(maps[i].shape());
    }
    require_same_shape(bucket.mean_map, maps[i], "speed_bucket_maps");
    bucket.mean_map += maps[i];
    ++bucket.count;
    ++bucket.landscapes[static_cast<std::size_t>(records[i].landscape)];
  }
  for (auto& bucket : s.buckets) {
    if (bucket.count > 0) bucket.mean_map *= 1.0 / static_cast<double>(bucket.count);
  }
  return s;
}

SpeedBucketSummary speed_bucket_maps(const std::vector<Sequence>& sequences) {
  std::vector<Tensor> maps;
  std::vector<FrameRecord> records;
  for (const auto& seq : sequences) {
    maps.insert(maps.end(), seq.maps.begin(), seq.maps.end());
    records.insert(records.end(), seq.records.begin(), seq.records.end());
  }
  return speed_bucket_maps(maps, records);
}

double spatial_spread(const Tensor& map) {
  require_map(map, "spatial_spread");
  const std::size_t H = map_height(map), W = map_width(map);
  double total = 0.0, my = 0.0, mx = 0.0;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double w = map[y * W + x];
      if (w < 0.0) throw std::invalid_argument("spatial_spread needs a nonnegative map");
      total += w;
      my += w * static_cast<double>(y) / static_cast<double>(H);
      mx += w * static_cast<double>(x) / static_cast<double>(W);
    }
  }
  if (total <= 0.0) throw std::invalid_argument("spatial_spread of an all-zero map");
  my /= total;
  mx /= total;
  double m2 = 0.0;
  for (std::size_t y = 0; y < H; ++y) {
    const double dy = static_cast<double>(y) / static_cast<double>(H) - my;
    for (std::size_t x = 0; x < W; ++x) {
      const double dx = static_cast<double>(x) / static_cast<double>(W) - mx;
      m2 += map[y * W + x] * (dy * dy + dx * dx);
    }
  }
  return m2 / total;
}

MeanAndMode sequence_mean_and_mode(std::span<const Tensor> maps) {
  if (maps.empty()) throw std::invalid_argument("sequence_mean_and_mode needs at least one map");
  MeanAndMode r;
  r.mean = Tensor(maps.front().shape());
  for (const auto& m : maps) {
    require_map(m, "sequence_mean_and_mode");
    require_same_shape(r.mean, m, "sequence_mean_and_mode");
    r.mean += m;
  }
  r.mean *= 1.0 / static_cast<double>(maps.size());
  const std::size_t W = map_width(r.mean);
  // max_element returns the first maximum, which in row-major order is the
  // smallest (y, x).
  const auto data = r.mean.data();
  const auto best = static_cast<std::size_t>(std::max_element(data.begin(), data.end()) - data.begin());
  r.mode_y = best / W;
  r.mode_x = best % W;
  return r;
}

std::array<double, kCategoryCount> CategorySweep::mean_proportions() const {
  std::array<double, kCategoryCount> mean{};
  std::size_t used = 0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (empty[t]) continue;
    for (std::size_t c = 0; c < kCategoryCount; ++c) mean[c] += proportions[t][c];
    ++used;
  }
  if (used > 0) {
    for (auto& v : mean) v /= static_cast<double>(used);
  }
  return mean;
}

std::vector<double> linear_thresholds(std::size_t n) {
  if (n < 2) throw std::invalid_argument("threshold sweep needs at least two thresholds");
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) / static_cast<double>(n);
  return t;
}

CategorySweep threshold_sweep(std::span<const Tensor> maps, std::span<const LabelMap> segmentation,
                              std::span<const double> thresholds) {
  if (maps.size() != segmentation.size()) throw std::invalid_argument("threshold_sweep: one label map per map required");
  if (thresholds.size() < 2) throw std::invalid_argument("threshold sweep needs at least two thresholds");
  const std::size_t n = thresholds.size();
  std::vector<std::array<std::uint64_t, kCategoryCount>> counts(n);
  for (auto& c : counts) c.fill(0);

  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Tensor& map = maps[i];
    const LabelMap& seg = segmentation[i];
    require_map(map, "threshold_sweep");
    if (map_height(map) != seg.height || map_width(map) != seg.width) {
      throw ShapeError("threshold_sweep: map " + shape_str(map.shape()) + " does not align with a " +
                       std::to_string(seg.height) + " x " + std::to_string(seg.width) + " label map");
    }
    for (std::size_t p = 0; p < seg.labels.size(); ++p) {
      const std::uint8_t label = seg.labels[p];
      if (label >= kCategoryCount) throw std::invalid_argument("label id " + std::to_string(label) + " out of range");
      for (std::size_t t = 0; t < n; ++t) {
        if (map[p] >= thresholds[t]) ++counts[t][label];
      }
    }
  }

  CategorySweep sweep;
  sweep.thresholds.assign(thresholds.begin(), thresholds.end());
  sweep.proportions.resize(n);
  sweep.empty.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::uint64_t total = 0;
    for (auto c : counts[t]) total += c;
    sweep.empty[t] = total == 0;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      sweep.proportions[t][c] = total == 0 ? 0.0 : static_cast<double>(counts[t][c]) / static_cast<double>(total);
    }
  }

  std::vector<std::size_t> used;
  for (std::size_t t = 0; t < n; ++t) {
    if (!sweep.empty[t]) used.push_back(t);
  }
  if (used.size() >= 2) {
    double mt = 0.0;
    for (auto t : used) mt += thresholds[t];
    mt /= static_cast<double>(used.size());
    double stt = 0.0;
    for (auto t : used) stt += (thresholds[t] - mt) * (thresholds[t] - mt);
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      double mp = 0.0;
      for (auto t : used) mp += sweep.proportions[t][c];
      mp /= static_cast<double>(used.size());
      double stp = 0.0;
      for (auto t : used) stp += (thresholds[t] - mt) * (sweep.proportions[t][c] - mp);
      sweep.slopes[c] = stp / stt;
    }
  }
  return sweep;
}

CategorySweep threshold_sweep(std::span<const Tensor> maps, std::span<const LabelMap> segmentation,
                              std::size_t n_thresholds) {
  const auto t = linear_thresholds(n_thresholds);
  return threshold_sweep(maps, segmentation, t);
}

std::vector<bool> HardSelection::frame_mask(std::size_t length) const {
  std::vector<bool> mask(length, false);
  for (const auto& w : windows) {
    for (std::size_t f = w.begin; f < std::min(w.end, length); ++f) mask[f] = true;
  }
  return mask;
}

HardSelection select_hard_subsequences(std::span<const Tensor> maps, std::size_t window, double threshold) {
  if (window == 0) throw std::invalid_argument("window length must be at least 1");
  HardSelection sel;
  if (maps.empty()) return sel;
  const Tensor mean = sequence_mean_and_mode(maps).mean;
  if (mean.min() == mean.max()) {
    sel.unselectable = true;
    return sel;
  }
  for (std::size_t begin = 0; begin < maps.size(); begin += window) {
    const FrameRange tile{begin, std::min(begin + window, maps.size())};
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t f = tile.begin; f < tile.end; ++f) {
      if (auto c = metrics::cc(maps[f], mean)) {
        sum += *c;
        ++defined;
      }
    }
    std::optional<double> score;
    if (defined > 0) score = sum / static_cast<double>(defined);
    sel.tiles.push_back(tile);
    sel.tile_cc.push_back(score);
    if (score && *score < threshold) {
      if (!sel.windows.empty() && sel.windows.back().end == tile.begin) {
        sel.windows.back().end = tile.end;
      } else {
        sel.windows.push_back(tile);
      }
    }
  }
  return sel;
}

DeviationOverlay deviation_overlay(const Tensor& prediction, const Tensor& target, double threshold) {
  require_map(prediction, "deviation_overlay");
  require_same_shape(prediction, target, "deviation_overlay");
  DeviationOverlay o;
  o.height = map_height(prediction);
  o.width = map_width(prediction);
  for (std::size_t i = 0; i < prediction.numel(); ++i) {
    const double d = prediction[i] - target[i];
    if (d > threshold) {
      o.precision.push_back(i);
    } else if (-d > threshold) {
      o.recall.push_back(i);
    }
  }
  return o;
}

std::optional<double> category_rank_agreement(const CategorySweep& gt, const CategorySweep& prediction) {
  const auto a = gt.mean_proportions();
  const auto b = prediction.mean_proportions();
  return metrics::kendall_tau(a, b);
}

double jaccard(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("jaccard: masks differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::ofstream open_binary(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Tensor& map) {
  require_map(map, "write_pgm");
  const std::size_t H = map_height(map), W = map_width(map);
  const double peak = map.max();
  const double scale = peak > 0.0 ? 1.0 / peak : 0.0;
  auto out = open_binary(path);
  out << "P5\n" << W << ' ' << H << "\n255\n";
  for (std::size_t i = 0; i < H * W; ++i) out.put(static_cast<char>(to_byte(map[i] * scale)));
}

void write_overlay_ppm(const std::filesystem::path& path, const Tensor& background, const DeviationOverlay& overlay) {
  require_map(background, "write_overlay_ppm");
  const std::size_t H = overlay.height, W = overlay.width;
  if (map_height(background) != H || map_width(background) != W) {
    throw ShapeError("overlay background does not match overlay size");
  }
  const double peak = background.max();
  const double scale = peak > 0.0 ? 0.6 / peak : 0.0;
  std::vector<std::uint8_t> rgb(3 * H * W);
  for (std::size_t i = 0; i < H * W; ++i) {
    const std::uint8_t g = to_byte(background[i] * scale);
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = g;
  }
  for (auto i : overlay.precision) rgb[3 * i] = 0, rgb[3 * i + 1] = 255, rgb[3 * i + 2] = 0;
  for (auto i : overlay.recall) rgb[3 * i] = 255, rgb[3 * i + 1] = 0, rgb[3 * i + 2] = 0;
  auto out = open_binary(path);
  out << "P6\n" << W << ' ' << H << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void write_bucket_csv(std::ostream& out, const SpeedBucketSummary& summary) {
  out << "bucket,lo_kmh,hi_kmh,frames,downtown,countryside,highway,spread\n";
  for (std::size_t b = 0; b < kSpeedBuckets; ++b) {
    const auto& bucket = summary.buckets[b];
    out << static_cast<char>('a' + b) << ',' << bucket.lo << ',';
    if (std::isinf(bucket.hi)) {
      out << "inf";
    } else {
      out << bucket.hi;
    }
    out << ',' << bucket.count;
    for (auto n : bucket.landscapes) out << ',' << n;
    out << ',' << (bucket.empty() ? std::string("empty") : fmt(spatial_spread(bucket.mean_map))) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const CategorySweep& sweep, const std::string& source) {
  out << "source,threshold,empty";
  for (std::size_t c = 0; c < kCategoryCount; ++c) out << ',' << category_name(c);
  out << '\n';
  for (std::size_t t = 0; t < sweep.thresholds.size(); ++t) {
    out << source << ',' << fmt(sweep.thresholds[t]) << ',' << (sweep.empty[t] ? 1 : 0);
    for (double p : sweep.proportions[t]) out << ',' << fmt(p);
    out << '\n';
  }
}

void write_slopes_csv(std::ostream& out, const CategorySweep& sweep, const std::string& source) {
  const auto mean = sweep.mean_proportions();
  out << "source,category,mean_proportion,slope,trend\n";
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    const double s = sweep.slopes[c];
    out << source << ',' << category_name(c) << ',' << fmt(mean[c]) << ',' << fmt(s) << ','
        << (s > 0.0 ? "up" : s < 0.0 ? "down" : "flat") << '\n';
  }
}

}  // namespace drivegaze::analysis
