#include "drivegaze/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "drivegaze/image.hpp"

namespace drivegaze::metrics {

std::optional<double> cc(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "cc");
  const auto p = prediction.data();
  const auto g = target.data();
  const auto [pmin, pmax] = std::minmax_element(p.begin(), p.end());
  const auto [gmin, gmax] = std::minmax_element(g.begin(), g.end());
  if (*pmin == *pmax || *gmin == *gmax) return std::nullopt;

  const double n = static_cast<double>(p.size());
  const double mp = std::accumulate(p.begin(), p.end(), 0.0) / n;
  const double mg = std::accumulate(g.begin(), g.end(), 0.0) / n;
  double spg = 0.0, spp = 0.0, sgg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - mp;
    const double dg = g[i] - mg;
    spg += dp * dg;
    spp += dp * dp;
    sgg += dg * dg;
  }
  if (spp == 0.0 || sgg == 0.0) return std::nullopt;
  return std::clamp(spg / std::sqrt(spp * sgg), -1.0, 1.0);
}

double kl(const Tensor& target, const Tensor& prediction, double epsilon) {
  require_same_shape(target, prediction, "kl");
  const auto g = target.data();
  const auto p = prediction.data();
  const double eps_total = epsilon * static_cast<double>(g.size());
  const double zg = std::accumulate(g.begin(), g.end(), 0.0) + eps_total;
  const double zp = std::accumulate(p.begin(), p.end(), 0.0) + eps_total;
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = (g[i] + epsilon) / zg;
    const double pi = (p[i] + epsilon) / zp;
    sum += gi * std::log(gi / pi);
  }
  return std::max(sum, 0.0);
}

namespace {

// Number of pairs tied within each run of equal keys, in a sorted range.
template <typename It, typename Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t ties = 0;
  while (first != last) {
    It run = first;
    std::uint64_t len = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++len;
    }
    ties += len * (len - 1) / 2;
    first = run;
  }
  return ties;
}

// Merge sort on y, returning the number of inversions (swaps).
std::uint64_t sort_count_swaps(std::vector<double>& y, std::vector<double>& buffer, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_count_swaps(y, buffer, lo, mid) + sort_count_swaps(y, buffer, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (y[j] < y[i]) {
      swaps += mid - i;
      buffer[k++] = y[j++];
    } else {
      buffer[k++] = y[i++];
    }
  }
  while (i < mid) buffer[k++] = y[i++];
  while (j < hi) buffer[k++] = y[j++];
  std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
            y.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: series lengths differ");
  if (a.size() < 2) throw std::invalid_argument("kendall_tau: need at least two items");
  const std::size_t n = a.size();

  std::vector<std::pair<double, double>> pairs(n);
  for (std::size_t i = 0; i < n; ++i) pairs[i] = {a[i], b[i]};
  std::sort(pairs.begin(), pairs.end());

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t ties_a =
      tied_pairs(pairs.begin(), pairs.end(), [](const auto& p, const auto& q) { return p.first == q.first; });
  const std::uint64_t ties_joint = tied_pairs(pairs.begin(), pairs.end(), [](const auto& p, const auto& q) { return p == q; });

  std::vector<double> y(n), buffer(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = pairs[i].second;
  const std::uint64_t swaps = sort_count_swaps(y, buffer, 0, n);
  const std::uint64_t ties_b = tied_pairs(y.begin(), y.end(), [](double p, double q) { return p == q; });

  if (ties_a == n0 || ties_b == n0) return std::nullopt;
  // concordant - discordant = n0 - ties_a - ties_b + ties_joint - 2 * swaps
  const double numerator = static_cast<double>(n0) - static_cast<double>(ties_a) - static_cast<double>(ties_b) +
                           static_cast<double>(ties_joint) - 2.0 * static_cast<double>(swaps);
  const double denominator =
      std::sqrt(static_cast<double>(n0 - ties_a)) * std::sqrt(static_cast<double>(n0 - ties_b));
  return std::clamp(numerator / denominator, -1.0, 1.0);
}

BaselinePredictor gaussian_baseline(std::size_t height, std::size_t width, double sigma_fraction) {
  if (!(sigma_fraction > 0.0)) throw std::invalid_argument("sigma_fraction must be positive");
  if (height == 0 || width == 0) throw std::invalid_argument("gaussian baseline needs a non-empty grid");
  BaselinePredictor b;
  b.kind = BaselineKind::CenteredGaussian;
  b.sigma_y = sigma_fraction * static_cast<double>(height);
  b.sigma_x = sigma_fraction * static_cast<double>(width);
  b.map = Tensor({1, height, width});
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  for (std::size_t y = 0; y < height; ++y) {
    const double dy = (static_cast<double>(y) - cy) / b.sigma_y;
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = (static_cast<double>(x) - cx) / b.sigma_x;
      b.map[y * width + x] = std::exp(-0.5 * (dy * dy + dx * dx));
    }
  }
  b.map = image::max_normalized(b.map);
  return b;
}

BaselinePredictor mean_gt_baseline(std::span<const Tensor> maps) {
  if (maps.empty()) throw std::invalid_argument("mean_gt_baseline needs at least one map");
  Tensor sum(maps.front().shape());
  for (const auto& m : maps) {
    require_same_shape(sum, m, "mean_gt_baseline");
    sum += m;
  }
  sum *= 1.0 / static_cast<double>(maps.size());
  return {BaselineKind::MeanTrainGt, 0.0, 0.0, std::move(sum)};
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / n);
  return a;
}

Aggregate MetricReport::cc_aggregate(const std::function<bool(const ClipScore&)>& keep) const {
  std::vector<double> v;
  for (const auto& c : clips) {
    if (keep(c) && c.cc) v.push_back(*c.cc);
  }
  return aggregate(v);
}

Aggregate MetricReport::kl_aggregate(const std::function<bool(const ClipScore&)>& keep) const {
  std::vector<double> v;
  for (const auto& c : clips) {
    if (keep(c)) v.push_back(c.kl);
  }
  return aggregate(v);
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

}  // namespace

void MetricReport::write_csv(std::ostream& out) const {
  out << "# predictor: " << predictor << '\n';
  out << "# kl: sum_i G_i * log(G_i / P_i), target G and prediction P sum-normalised after adding " << kKlEpsilon
      << " per cell\n";
  out << "# cc: Pearson, population moments; undefined for constant maps and excluded from aggregates\n";
  out << "# std: population standard deviation\n";
  out << "# gaussian sigma_fraction: " << sigma_fraction << '\n';
  out << "sequence_id,clip_end_frame,cc,kl,hard\n";
  for (const auto& c : clips) {
    out << c.sequence_id << ',' << c.end_frame << ',' << (c.cc ? fmt(*c.cc) : "undefined") << ',' << fmt(c.kl) << ','
        << (c.hard ? 1 : 0) << '\n';
  }

  auto emit = [&](const std::string& scope, const std::function<bool(const ClipScore&)>& keep, int hard_flag) {
    const Aggregate a = cc_aggregate(keep);
    const Aggregate k = kl_aggregate(keep);
    out << "ALL," << scope << ":mean," << fmt(a.mean) << ',' << fmt(k.mean) << ',' << hard_flag << '\n';
    out << "ALL," << scope << ":std," << fmt(a.std) << ',' << fmt(k.std) << ',' << hard_flag << '\n';
    out << "ALL," << scope << ":count," << a.count << ',' << k.count << ',' << hard_flag << '\n';
  };
  emit("full", [](const ClipScore&) { return true; }, 0);
  emit("hard", [](const ClipScore& c) { return c.hard; }, 1);
  std::vector<std::string> ids;
  for (const auto& c : clips) {
    if (std::find(ids.begin(), ids.end(), c.sequence_id) == ids.end()) ids.push_back(c.sequence_id);
  }
  for (const auto& id : ids) emit(id, [&id](const ClipScore& c) { return c.sequence_id == id; }, 0);
}

MetricReport evaluate(const MapPredictor& predictor, const std::vector<Sequence>& sequences,
                      std::span<const ClipRef> clips, const EvalOptions& options) {
  MetricReport report;
  report.clips.reserve(clips.size());
  for (const auto& ref : clips) {
    const Sequence& seq = sequences.at(ref.sequence);
    const Tensor& gt = seq.maps.at(ref.end_index);
    Tensor pred = predictor(seq, ref.end_index);
    if (pred.shape() != gt.shape()) {
      if (!options.resample || pred.rank() != 3 || pred.dim(0) != 1) {
        throw ShapeError("prediction " + shape_str(pred.shape()) + " does not match ground truth " +
                         shape_str(gt.shape()) + " and resampling is disabled");
      }
      pred = image::resize_bilinear(pred, gt.dim(1), gt.dim(2));
    }
    ClipScore score;
    score.sequence_id = seq.id;
    score.end_frame = ref.end_index;
    score.cc = cc(pred, gt);
    score.kl = kl(gt, pred);
    if (ref.sequence < options.hard_frames.size() && ref.end_index < options.hard_frames[ref.sequence].size()) {
      score.hard = options.hard_frames[ref.sequence][ref.end_index];
    }
    report.clips.push_back(std::move(score));
  }
  return report;
}

}  // namespace drivegaze::metrics
