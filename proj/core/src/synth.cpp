#include "drivegaze/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "drivegaze/net.hpp"

namespace drivegaze {

double gaze_spread(double speed_kmh) { return std::clamp(0.16 - 0.0013 * speed_kmh, 0.035, 0.16); }

double curve_amplitude(double speed_kmh) { return std::clamp(0.15 - 0.0012 * speed_kmh, 0.03, 0.15); }

namespace {

using Color = std::array<double, 3>;

enum class Kind { Building, Tree, Sign, Person, Cycle, Vehicle };

struct SideObject {
  Kind kind;
  int side;       // -1 left, +1 right
  double offset;  // lateral distance from road centre, in road half-widths
  double depth;   // 0 at the vanishing point, 1 at the bottom row
  double scale;
  Color color;
};

// Dwell units per speed bucket for each landscape: downtown lingers at low
// speed, highway at high speed; every bucket appears in every cycle.
constexpr std::array<std::array<int, 5>, 3> kDwell{{{3, 2, 2, 1, 1}, {1, 2, 2, 2, 1}, {1, 1, 1, 2, 3}}};

class Canvas {
 public:
  Canvas(std::size_t h, std::size_t w) : h_(h), w_(w), rgb_({3, h, w}), labels_{h, w, std::vector<std::uint8_t>(h * w)} {}

  void put(long y, long x, const Color& c, Category label) {
    if (y < 0 || x < 0 || y >= static_cast<long>(h_) || x >= static_cast<long>(w_)) return;
    const std::size_t i = static_cast<std::size_t>(y) * w_ + static_cast<std::size_t>(x);
    for (std::size_t ch = 0; ch < 3; ++ch) rgb_[ch * h_ * w_ + i] = c[ch];
    labels_.labels[i] = static_cast<std::uint8_t>(label);
  }

  void rect(double y0, double x0, double y1, double x1, const Color& c, Category label) {
    const long ya = std::lround(std::floor(y0)), yb = std::lround(std::ceil(y1));
    const long xa = std::lround(std::floor(x0)), xb = std::lround(std::ceil(x1));
    for (long y = ya; y < std::max(yb, ya + 1); ++y) {
      for (long x = xa; x < std::max(xb, xa + 1); ++x) put(y, x, c, label);
    }
  }

  void ellipse(double cy, double cx, double ry, double rx, const Color& c, Category label) {
    ry = std::max(ry, 0.5);
    rx = std::max(rx, 0.5);
    for (long y = std::lround(std::floor(cy - ry)); y <= std::lround(std::ceil(cy + ry)); ++y) {
      for (long x = std::lround(std::floor(cx - rx)); x <= std::lround(std::ceil(cx + rx)); ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry;
        const double dx = (static_cast<double>(x) - cx) / rx;
        if (dy * dy + dx * dx <= 1.0) put(y, x, c, label);
      }
    }
  }

  std::size_t h_, w_;
  Tensor rgb_;
  LabelMap labels_;
};

struct Road {
  double vp_y, vp_x, base_x, base_half, bottom;

  double row(double depth) const { return vp_y + depth * (bottom - vp_y); }
  double center(double depth) const { return vp_x + depth * (base_x - vp_x); }
  double half(double depth) const { return depth * base_half; }
};

Color jitter_color(Color base, Rng& rng, double amount) {
  std::uniform_real_distribution<double> d(-amount, amount);
  for (auto& v : base) v = std::clamp(v + d(rng), 0.0, 1.0);
  return base;
}

SideObject spawn(Landscape landscape, Rng& rng, double depth) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int side = u(rng) < 0.5 ? -1 : 1;
  const double r = u(rng);
  SideObject o{Kind::Tree, side, 1.4 + 1.2 * u(rng), depth, 0.7 + 0.6 * u(rng), {0.15, 0.45, 0.15}};
  switch (landscape) {
    case Landscape::Downtown:
      if (r < 0.55) {
        o.kind = Kind::Building;
        o.offset = 1.6 + 0.8 * u(rng);
        o.color = jitter_color({0.55, 0.45, 0.40}, rng, 0.15);
      } else if (r < 0.75) {
        o.kind = Kind::Person;
        o.offset = 1.2 + 0.2 * u(rng);
        o.color = jitter_color({0.75, 0.35, 0.55}, rng, 0.2);
      } else if (r < 0.9) {
        o.kind = Kind::Sign;
        o.offset = 1.15;
        o.color = {0.95, 0.85, 0.1};
      } else {
        o.kind = Kind::Cycle;
        o.offset = 1.1;
        o.color = {0.2, 0.6, 0.9};
      }
      break;
    case Landscape::Countryside:
      if (r < 0.8) {
        o.kind = Kind::Tree;
        o.color = jitter_color({0.15, 0.45, 0.15}, rng, 0.08);
      } else {
        o.kind = Kind::Sign;
        o.offset = 1.2;
        o.color = {0.95, 0.85, 0.1};
      }
      break;
    case Landscape::Highway:
      if (r < 0.5) {
        o.kind = Kind::Tree;
        o.offset = 2.0 + u(rng);
        o.color = jitter_color({0.2, 0.5, 0.2}, rng, 0.08);
      } else if (r < 0.7) {
        o.kind = Kind::Sign;
        o.offset = 1.3;
        o.color = {0.1, 0.4, 0.9};
      } else {
        o.kind = Kind::Vehicle;
        o.offset = 0.55;
        o.color = jitter_color({0.6, 0.6, 0.6}, rng, 0.35);
      }
      break;
  }
  return o;
}

void draw_object(Canvas& cv, const Road& road, const SideObject& o, double H, double W) {
  const double yb = road.row(o.depth);
  const double xc = road.center(o.depth) + o.side * o.offset * std::max(road.half(o.depth), 0.5);
  const double s = o.depth * o.scale;
  switch (o.kind) {
    case Kind::Building: {
      const double h = 1.6 * H * s, w = 0.35 * W * s;
      const double x0 = o.side < 0 ? xc - w : xc;
      cv.rect(yb - h, x0, yb, x0 + w, o.color, Category::Buildings);
      break;
    }
    case Kind::Tree: {
      const double trunk_h = 0.25 * H * s, r = 0.14 * W * s;
      cv.rect(yb - trunk_h, xc - 0.15 * r, yb, xc + 0.15 * r, {0.35, 0.25, 0.15}, Category::Trees);
      cv.ellipse(yb - trunk_h - r * 0.8, xc, r * 0.9, r, o.color, Category::Trees);
      break;
    }
    case Kind::Sign: {
      const double pole = 0.4 * H * s, sz = 0.08 * W * s;
      cv.rect(yb - pole, xc - 0.2, yb, xc + 0.2, {0.5, 0.5, 0.5}, Category::TrafficSigns);
      cv.rect(yb - pole - sz, xc - sz / 2, yb - pole, xc + sz / 2, o.color, Category::TrafficSigns);
      break;
    }
    case Kind::Person: {
      const double h = 0.3 * H * s, w = 0.06 * W * s;
      cv.rect(yb - h, xc - w / 2, yb, xc + w / 2, o.color, Category::People);
      break;
    }
    case Kind::Cycle: {
      const double h = 0.25 * H * s, w = 0.12 * W * s;
      cv.rect(yb - h, xc - w / 2, yb, xc + w / 2, o.color, Category::Cycles);
      break;
    }
    case Kind::Vehicle: {
      const double h = 0.2 * H * s, w = 0.22 * W * s;
      cv.rect(yb - h, xc - w / 2, yb, xc + w / 2, o.color, Category::Vehicles);
      break;
    }
  }
}

struct EventSpec {
  FrameRange range;
  int side;
  Kind kind;
  Color color;
};

double gaussian(double y, double x, double cy, double cx, double sy, double sx) {
  const double dy = (y - cy) / sy, dx = (x - cx) / sx;
  return std::exp(-0.5 * (dy * dy + dx * dx));
}

std::vector<double> speed_profile(Landscape landscape, std::size_t frames, std::size_t unit, Rng& rng) {
  std::vector<double> speeds;
  speeds.reserve(frames);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& dwell = kDwell[static_cast<std::size_t>(landscape)];
  while (speeds.size() < frames) {
    for (std::size_t b = 0; b < 5 && speeds.size() < frames; ++b) {
      const double lo = kBucketSpeedLo[b] + 1.0, hi = kBucketSpeedHi[b] - 1.0;
      const double level = lo + (hi - lo) * u(rng);
      const std::size_t n = static_cast<std::size_t>(dwell[b]) * unit;
      for (std::size_t i = 0; i < n && speeds.size() < frames; ++i) {
        const double wobble = 0.8 * std::sin(0.3 * static_cast<double>(speeds.size()));
        speeds.push_back(std::clamp(level + wobble, lo, hi));
      }
    }
  }
  return speeds;
}

std::size_t bucket_of(double speed) {
  std::size_t b = 0;
  while (b + 1 < kBucketSpeedLo.size() && speed >= kBucketSpeedLo[b + 1]) ++b;
  return b;
}

// One event per slot of L / count frames. Event k is centred on a frame of
// speed bucket (first + k) % 5 when the slot offers one, so every bucket
// sees a similar share of event frames.
std::vector<EventSpec> plan_events(const SynthConfig& config, Landscape landscape, const std::vector<double>& speeds,
                                   Rng& rng) {
  std::vector<EventSpec> events;
  const std::size_t L = config.frames;
  const std::size_t len = std::min(config.event_length, L);
  if (len == 0 || config.event_fraction <= 0.0) return events;
  const auto count = static_cast<std::size_t>(std::lround(config.event_fraction * static_cast<double>(L) /
                                                          static_cast<double>(len)));
  if (count == 0) return events;
  const std::size_t slot = L / count;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t first = static_cast<std::size_t>(u(rng) * 5.0) % 5;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t slack = slot > len ? slot - len : 0;
    std::vector<std::size_t> candidates;
    for (std::size_t b = k * slot; b <= k * slot + slack; ++b) {
      if (bucket_of(speeds[std::min(b + len / 2, L - 1)]) == (first + k) % 5) candidates.push_back(b);
    }
    std::size_t begin = k * slot + static_cast<std::size_t>(u(rng) * static_cast<double>(slack));
    if (!candidates.empty()) {
      begin = candidates[std::min(candidates.size() - 1, static_cast<std::size_t>(u(rng) * candidates.size()))];
    }
    EventSpec e{{begin, std::min(begin + len, L)}, u(rng) < 0.5 ? -1 : 1, Kind::Person, {0.95, 0.15, 0.1}};
    const double r = u(rng);
    if (landscape == Landscape::Highway || r < 0.25) {
      e.kind = Kind::Vehicle;
      e.color = {0.95, 0.5, 0.05};
    } else if (r < 0.45) {
      e.kind = Kind::Cycle;
      e.color = {0.1, 0.85, 0.95};
    }
    events.push_back(e);
  }
  return events;
}

SynthSequence generate_one(const SynthConfig& config, std::uint64_t seed, std::size_t index) {
  std::seed_seq seq_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(index)};
  Rng rng(seq_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);

  const auto landscape = static_cast<Landscape>(index % kLandscapeCount);
  const std::size_t L = config.frames;
  const double H = static_cast<double>(config.height);
  const double W = static_cast<double>(config.width);

  SynthSequence out;
  char id[16];
  std::snprintf(id, sizeof id, "seq%02zu", index);
  out.sequence.id = id;

  const auto speeds = speed_profile(landscape, L, config.speed_unit, rng);
  const auto events = plan_events(config, landscape, speeds, rng);
  for (const auto& e : events) out.truth.event_segments.push_back(e.range);

  const double curve_period = 140.0 + 120.0 * u(rng);
  const double curve_phase = 2.0 * std::numbers::pi * u(rng);
  const double pitch_phase = 2.0 * std::numbers::pi * u(rng);
  const double road_half = (landscape == Landscape::Highway ? 0.55 : 0.42) * W;
  const Color ground = landscape == Landscape::Downtown ? Color{0.62, 0.60, 0.58} : Color{0.32, 0.55, 0.25};
  const Category ground_label = landscape == Landscape::Downtown ? Category::Sidewalk : Category::Trees;
  const std::size_t object_count = landscape == Landscape::Downtown ? 12 : 9;

  std::vector<SideObject> objects;
  for (std::size_t i = 0; i < object_count; ++i) objects.push_back(spawn(landscape, rng, 0.08 + 1.0 * u(rng)));
  const Color lead_color = jitter_color({0.7, 0.1, 0.1}, rng, 0.2);

  double amplitude = curve_amplitude(speeds[0]);
  double dash_phase = 0.0;
  constexpr double kLeadDepth = 0.10;

  for (std::size_t f = 0; f < L; ++f) {
    const double speed = speeds[f];
    amplitude += 0.08 * (curve_amplitude(speed) - amplitude);
    const double tf = static_cast<double>(f);
    Road road{H * (0.40 + 0.02 * std::sin(2.0 * std::numbers::pi * tf / 97.0 + pitch_phase)),
              W / 2.0 + amplitude * W * std::sin(2.0 * std::numbers::pi * tf / curve_period + curve_phase),
              W / 2.0, road_half, H - 1.0};

    Canvas cv(config.height, config.width);
    for (std::size_t y = 0; y < config.height; ++y) {
      const double fy = static_cast<double>(y);
      const bool above = fy < road.vp_y;
      for (std::size_t x = 0; x < config.width; ++x) {
        if (above) {
          const double g = fy / std::max(road.vp_y, 1.0);
          cv.put(static_cast<long>(y), static_cast<long>(x), {0.45 + 0.3 * g, 0.65 + 0.2 * g, 0.95}, Category::Sky);
        } else {
          cv.put(static_cast<long>(y), static_cast<long>(x), ground, ground_label);
        }
      }
    }

    // Road surface, edge limits and a dashed centre line that scrolls with speed.
    dash_phase += 0.004 * speed;
    for (std::size_t y = 0; y < config.height; ++y) {
      const double fy = static_cast<double>(y);
      if (fy < road.vp_y) continue;
      const double depth = (fy - road.vp_y) / (road.bottom - road.vp_y);
      const double c = road.center(depth), hw = road.half(depth);
      const double edge = std::max(0.6, 0.06 * hw);
      for (std::size_t x = 0; x < config.width; ++x) {
        const double fx = static_cast<double>(x) + 0.5;
        const double d = std::abs(fx - c);
        if (d > hw) continue;
        if (hw - d < edge) {
          cv.put(static_cast<long>(y), static_cast<long>(x), {0.92, 0.92, 0.88}, Category::RoadLimits);
        } else if (d < std::max(0.5, 0.03 * hw) && std::fmod(1.0 / std::max(depth, 0.05) + dash_phase, 1.0) < 0.5) {
          cv.put(static_cast<long>(y), static_cast<long>(x), {0.95, 0.95, 0.9}, Category::RoadLimits);
        } else {
          cv.put(static_cast<long>(y), static_cast<long>(x), {0.32, 0.32, 0.34}, Category::Road);
        }
      }
    }

    std::sort(objects.begin(), objects.end(), [](const SideObject& a, const SideObject& b) { return a.depth < b.depth; });
    for (const auto& o : objects) draw_object(cv, road, o, H, W);

    const double gaze_y = road.row(kLeadDepth);
    const double gaze_x = road.center(kLeadDepth);
    cv.rect(gaze_y - 0.05 * H, gaze_x - 0.055 * W, gaze_y + 0.035 * H, gaze_x + 0.055 * W, lead_color,
            Category::Vehicles);

    const EventSpec* active = nullptr;
    for (const auto& e : events) {
      if (e.range.contains(f)) active = &e;
    }
    double ev_y = 0.0, ev_x = 0.0;
    if (active) {
      const double progress = static_cast<double>(f - active->range.begin) / static_cast<double>(active->range.size());
      // Roadside object low in the frame towards one edge, drifting inwards.
      ev_y = gaze_y + 0.25 * H;
      ev_x = W / 2.0 + active->side * (0.36 - 0.06 * progress) * W;
      const Category label = active->kind == Kind::Vehicle ? Category::Vehicles
                             : active->kind == Kind::Cycle ? Category::Cycles
                                                           : Category::People;
      cv.rect(ev_y - 0.1 * H, ev_x - 0.05 * W, ev_y + 0.1 * H, ev_x + 0.05 * W, active->color, label);
    }

    // Ground-truth attention.
    const double spread = gaze_spread(speed);
    const double event_spread = 0.7 * spread;
    Tensor map({1, config.height, config.width});
    for (std::size_t y = 0; y < config.height; ++y) {
      for (std::size_t x = 0; x < config.width; ++x) {
        const double fy = static_cast<double>(y), fx = static_cast<double>(x) + 0.5;
        double v = gaussian(fy, fx, gaze_y, gaze_x, spread * H, spread * W);
        if (active) v = 0.05 * v + gaussian(fy, fx, ev_y, ev_x, event_spread * H, event_spread * W);
        map[y * config.width + x] = v;
      }
    }
    map = map * (1.0 / map.max());

    Tensor rgb = std::move(cv.rgb_);
    for (auto& v : rgb.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);

    char name[32];
    std::snprintf(name, sizeof name, "%06zu.drvt", f);
    FrameRecord rec{f, speed, landscape, std::string("frames/") + name, std::string("maps/") + name,
                    std::string("seg/") + name};
    out.sequence.frames.push_back(std::move(rgb));
    out.sequence.maps.push_back(std::move(map));
    out.sequence.segmentation.push_back(std::move(cv.labels_));
    out.sequence.records.push_back(std::move(rec));

    out.truth.vanishing_y.push_back(road.vp_y);
    out.truth.vanishing_x.push_back(road.vp_x);
    out.truth.gaze_y.push_back(gaze_y);
    out.truth.gaze_x.push_back(gaze_x);
    out.truth.spread.push_back(spread);
    out.truth.event.push_back(active != nullptr);

    // Scenery streams towards the camera; objects past the bottom respawn far away.
    for (auto& o : objects) {
      o.depth *= 1.0 + 0.0004 * speed;
      if (o.depth > 1.3) o = spawn(landscape, rng, 0.06 + 0.06 * u(rng));
    }
  }
  return out;
}

}  // namespace

std::vector<SynthSequence> synth_generate(const SynthConfig& config, std::uint64_t seed) {
  if (config.height < 8 || config.width < 8) throw std::invalid_argument("synthetic frames must be at least 8x8");
  if (config.frames < kClipFrames) throw std::invalid_argument("synthetic sequences need at least 16 frames");
  std::vector<SynthSequence> out;
  out.reserve(config.sequences);
  for (std::size_t i = 0; i < config.sequences; ++i) out.push_back(generate_one(config, seed, i));
  return out;
}

}  // namespace drivegaze
