#include "evseg/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "evseg/error.hpp"
#include "evseg/warp.hpp"

namespace evseg {

namespace {

constexpr double kCrossingEps = 1e-9;

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Area fraction of the pixel covered by the object and the covered part's
// summed log intensity (so the object's mean value is weighted / alpha).
struct Coverage {
  double alpha = 0.0;
  double weighted = 0.0;
};

// Anti-aliased coverage of a round spot at a pixel centre `dist` away.
inline double round_alpha(double radius, double dist) {
  return std::clamp(radius + 0.5 - dist, 0.0, 1.0);
}

class Sprite {
 public:
  explicit Sprite(const ObjectSpec& obj) : obj_(obj) {
    if (obj.shape != ShapeKind::TexturedBar || obj.texture_density <= 0.0) return;
    const double r = obj.spot_radius;
    const double margin = r + 0.5;
    if (obj.width <= 2.0 * margin || obj.height <= 2.0 * margin) return;
    const auto target = std::size_t(std::lround(obj.texture_density * obj.width * obj.height / 100.0));
    std::mt19937_64 rng(mix_seed(obj.texture_seed, 0x5107));
    std::uniform_real_distribution<double> us(margin, obj.width - margin);
    std::uniform_real_distribution<double> vs(margin, obj.height - margin);
    const double min_gap = 2.0 * r + 1.5;
    for (std::size_t attempt = 0; attempt < 30 * target && spots_.size() < target; ++attempt) {
      const double u = us(rng);
      const double v = vs(rng);
      const bool clear = std::all_of(spots_.begin(), spots_.end(), [&](const Point2& p) {
        return std::hypot(p.x - u, p.y - v) >= min_gap;
      });
      if (clear) spots_.push_back({u, v});
    }
    cell_ = 2.0 * r + 2.0;
    cols_ = int(std::ceil(obj.width / cell_)) + 1;
    rows_ = int(std::ceil(obj.height / cell_)) + 1;
    buckets_.assign(std::size_t(cols_) * std::size_t(rows_), {});
    for (std::size_t i = 0; i < spots_.size(); ++i) {
      const int cx = int(spots_[i].x / cell_);
      const int cy = int(spots_[i].y / cell_);
      buckets_[std::size_t(cy) * cols_ + cx].push_back(int(i));
    }
  }

  Coverage at(int px, int py, double t) const {
    const double left = obj_.x + obj_.vx * t;
    const double top = obj_.y + obj_.vy * t;
    if (obj_.shape == ShapeKind::Disk) {
      const double r = 0.5 * std::min(obj_.width, obj_.height);
      const double d = std::hypot(px - (left + 0.5 * obj_.width), py - (top + 0.5 * obj_.height));
      const double alpha = round_alpha(r, d);
      return {alpha, alpha * obj_.contrast};
    }
    const double oy = overlap(py - 0.5, py + 0.5, top, top + obj_.height);
    if (oy <= 0.0) return {};
    const double ox = overlap(px - 0.5, px + 0.5, left, left + obj_.width);
    if (ox <= 0.0) return {};
    const double alpha = ox * oy;
    double weighted = alpha * obj_.contrast;
    if (!spots_.empty()) {
      const double u = px - left;
      const double v = py - top;
      const int cx = int(std::floor(u / cell_));
      const int cy = int(std::floor(v / cell_));
      double spot_alpha = 0.0;
      for (int by = std::max(cy - 1, 0); by <= std::min(cy + 1, rows_ - 1); ++by) {
        for (int bx = std::max(cx - 1, 0); bx <= std::min(cx + 1, cols_ - 1); ++bx) {
          for (int i : buckets_[std::size_t(by) * cols_ + bx]) {
            spot_alpha += round_alpha(obj_.spot_radius, std::hypot(u - spots_[i].x, v - spots_[i].y));
          }
        }
      }
      weighted -= 2.0 * obj_.contrast * alpha * std::min(spot_alpha, 1.0);
    }
    return {alpha, weighted};
  }

  const ObjectSpec& spec() const { return obj_; }
  std::size_t spot_count() const { return spots_.size(); }

 private:
  ObjectSpec obj_;
  std::vector<Point2> spots_;
  double cell_ = 1.0;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<std::vector<int>> buckets_;
};

std::vector<Sprite> make_sprites(const SceneSpec& spec) {
  return std::vector<Sprite>(spec.objects.begin(), spec.objects.end());
}

struct PixelState {
  double value = 0.0;
  std::vector<double> visible;       // visibility of each object
  std::vector<double> contribution;  // each object's share of value
};

PixelState compose(const std::vector<Sprite>& sprites, int px, int py, double t) {
  const std::size_t m = sprites.size();
  PixelState out;
  out.visible.assign(m, 0.0);
  out.contribution.assign(m, 0.0);
  double transmit = 1.0;  // product of (1 - alpha) of nearer objects
  for (std::size_t i = 0; i < m; ++i) {
    const Coverage c = sprites[i].at(px, py, t);
    out.visible[i] = transmit * c.alpha;
    out.contribution[i] = transmit * c.weighted;
    out.value += out.contribution[i];
    transmit *= 1.0 - c.alpha;
  }
  return out;
}

double compose_value(const std::vector<Sprite>& sprites, int px, int py, double t) {
  double value = 0.0;
  double transmit = 1.0;
  for (const auto& sprite : sprites) {
    const Coverage c = sprite.at(px, py, t);
    if (c.alpha == 0.0) continue;
    value += transmit * c.weighted;
    transmit *= 1.0 - c.alpha;
  }
  return value;
}

// Object whose visibility changed most between the two times; ties go to the
// nearer object. Falls back to the largest intensity change.
int cause_of_change(const std::vector<Sprite>& sprites, int px, int py, double t_prev, double t_cur) {
  const PixelState a = compose(sprites, px, py, t_prev);
  const PixelState b = compose(sprites, px, py, t_cur);
  const std::size_t m = sprites.size();
  double max_vis = 0.0;
  for (std::size_t i = 0; i < m; ++i) max_vis = std::max(max_vis, std::abs(b.visible[i] - a.visible[i]));
  if (max_vis > 1e-12) {
    for (std::size_t i = 0; i < m; ++i)
      if (std::abs(b.visible[i] - a.visible[i]) >= max_vis - 1e-12) return int(i) + 1;
  }
  double max_contrib = 0.0;
  int best = kNoiseLabel;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = std::abs(b.contribution[i] - a.contribution[i]);
    if (d > max_contrib + 1e-15) {
      max_contrib = d;
      best = int(i) + 1;
    }
  }
  return best;
}

struct Rect {
  int x0, y0, x1, y1;  // inclusive
};

Rect dirty_rect(const ObjectSpec& obj, double t_prev, double t_cur, int w, int h) {
  const double l = obj.x + std::min(obj.vx * t_prev, obj.vx * t_cur);
  const double r = obj.x + obj.width + std::max(obj.vx * t_prev, obj.vx * t_cur);
  const double tp = obj.y + std::min(obj.vy * t_prev, obj.vy * t_cur);
  const double bt = obj.y + obj.height + std::max(obj.vy * t_prev, obj.vy * t_cur);
  return {std::max(int(std::floor(l)) - 1, 0), std::max(int(std::floor(tp)) - 1, 0),
          std::min(int(std::ceil(r)) + 1, w - 1), std::min(int(std::ceil(bt)) + 1, h - 1)};
}

}  // namespace

void validate(const SceneSpec& spec) {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::SpecInvalid, what); };
  if (spec.width <= 0 || spec.height <= 0 || spec.width > 65535 || spec.height > 65535)
    fail("geometry must be positive");
  if (!(spec.duration > 0.0)) fail("duration must be positive");
  if (!(spec.contrast_threshold > 0.0)) fail("contrast threshold must be positive");
  if (!(spec.render_step > 0.0) || spec.render_step > spec.duration) fail("bad render step");
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) fail("noise level must lie in [0, 1]");
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    const std::string id = "object " + std::to_string(i + 1) + ": ";
    if (!(o.width > 0.0 && o.height > 0.0)) fail(id + "size must be positive");
    if (std::hypot(o.vx, o.vy) > spec.max_speed) fail(id + "speed exceeds max speed");
    if (o.x < 0.0 || o.y < 0.0 || o.x + o.width > spec.width || o.y + o.height > spec.height)
      fail(id + "must lie inside the sensor at t = 0");
    if (o.shape == ShapeKind::TexturedBar && !(o.spot_radius > 0.0 && o.texture_density >= 0.0))
      fail(id + "texture needs a positive spot radius and non-negative density");
  }
}

double scene_log_intensity(const SceneSpec& spec, int px, int py, double t) {
  return compose_value(make_sprites(spec), px, py, t);
}

LabeledEvents render_events(const SceneSpec& spec) {
  validate(spec);
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t n_pix = std::size_t(w) * std::size_t(h);
  const double c = spec.contrast_threshold;
  const long steps = std::max(1L, std::lround(spec.duration / spec.render_step));
  const double dt = spec.duration / double(steps);

  std::vector<double> level(n_pix, 0.0);      // log intensity at the previous step
  std::vector<double> reference(n_pix, 0.0);  // level at the last emission
  std::vector<double> threshold(n_pix, c);
  std::vector<long> visited(n_pix, -1);
  const std::vector<Sprite> sprites = make_sprites(spec);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) level[std::size_t(y) * w + x] = compose_value(sprites, x, y, 0.0);
  reference = level;

  std::mt19937_64 rng(mix_seed(spec.seed, 0x7177));
  std::normal_distribution<double> jitter(0.0, spec.noise * c);
  const bool use_jitter = spec.threshold_jitter && spec.noise > 0.0;
  const auto draw_threshold = [&]() {
    return use_jitter ? std::max(c + jitter(rng), 0.1 * c) : c;
  };
  if (use_jitter)
    for (auto& thr : threshold) thr = draw_threshold();

  std::vector<Event> events;
  std::vector<int> labels;
  for (long s = 1; s <= steps; ++s) {
    const double t_prev = double(s - 1) * dt;
    const double t_cur = s == steps ? spec.duration : double(s) * dt;
    for (const auto& obj : spec.objects) {
      const Rect r = dirty_rect(obj, t_prev, t_cur, w, h);
      for (int y = r.y0; y <= r.y1; ++y) {
        for (int x = r.x0; x <= r.x1; ++x) {
          const std::size_t idx = std::size_t(y) * w + x;
          if (visited[idx] == s) continue;
          visited[idx] = s;
          const double prev = level[idx];
          const double cur = compose_value(sprites, x, y, t_cur);
          level[idx] = cur;
          if (cur == prev) continue;
          int label = 0;
          const auto emit = [&](int polarity) {
            const double crossing = reference[idx] + polarity * threshold[idx];
            const double frac = std::clamp((crossing - prev) / (cur - prev), 0.0, 1.0);
            if (label == 0) label = cause_of_change(sprites, x, y, t_prev, t_cur);
            events.push_back({t_prev + frac * (t_cur - t_prev), std::uint16_t(x), std::uint16_t(y),
                              std::int8_t(polarity)});
            labels.push_back(label);
            reference[idx] = crossing;
            threshold[idx] = draw_threshold();
          };
          while (cur - reference[idx] >= threshold[idx] - kCrossingEps) emit(+1);
          while (reference[idx] - cur >= threshold[idx] - kCrossingEps) emit(-1);
        }
      }
    }
  }
  return sort_labeled(std::move(events), std::move(labels), w, h, 0.0, spec.duration);
}

LabeledEvents inject_noise(const LabeledEvents& labeled, double noise_level, std::uint64_t seed) {
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "noise level must lie in [0, 1]");
  }
  if (noise_level == 0.0) return labeled;
  const auto& packet = labeled.packet;
  std::size_t signal = 0;
  for (int l : labeled.labels) signal += (l != kNoiseLabel);
  std::mt19937_64 rng(seed);
  std::poisson_distribution<long> count_dist(noise_level * double(signal));
  const long count = signal > 0 ? count_dist(rng) : 0;
  std::uniform_int_distribution<int> xs(0, packet.width() - 1);
  std::uniform_int_distribution<int> ys(0, packet.height() - 1);
  std::uniform_real_distribution<double> ts(packet.t0(), packet.t1());
  std::bernoulli_distribution positive(0.5);

  std::vector<Event> events(packet.events().begin(), packet.events().end());
  std::vector<int> labels = labeled.labels;
  events.reserve(events.size() + std::size_t(count));
  for (long k = 0; k < count; ++k) {
    Event e;
    e.x = std::uint16_t(xs(rng));
    e.y = std::uint16_t(ys(rng));
    e.t = ts(rng);
    e.polarity = positive(rng) ? 1 : -1;
    events.push_back(e);
    labels.push_back(kNoiseLabel);
  }
  return sort_labeled(std::move(events), std::move(labels), packet.width(), packet.height(),
                      packet.t0(), packet.t1());
}

LabeledEvents generate_scene(const SceneSpec& spec) {
  LabeledEvents clean = render_events(spec);
  if (spec.threshold_jitter || spec.noise == 0.0) return clean;
  return inject_noise(clean, spec.noise, mix_seed(spec.seed, 0xBA));
}

std::vector<SceneSpec> standard_scenes(std::uint64_t seed) {
  const auto disk = [](double x, double y, double d, double vx, double vy, double c) {
    ObjectSpec o;
    o.shape = ShapeKind::Disk;
    o.x = x, o.y = y, o.width = d, o.height = d, o.vx = vx, o.vy = vy, o.contrast = c;
    return o;
  };
  const auto bar = [](double x, double y, double w, double h, double vx, double vy, double c,
                      double density, std::uint64_t texture_seed) {
    ObjectSpec o;
    o.shape = ShapeKind::TexturedBar;
    o.x = x, o.y = y, o.width = w, o.height = h, o.vx = vx, o.vy = vy, o.contrast = c;
    o.texture_density = density;
    o.texture_seed = texture_seed;
    return o;
  };
  std::vector<SceneSpec> scenes(4);
  // Untextured disks, no occlusion.
  scenes[0].objects = {disk(20, 25, 40, 46, 14, 1.0), disk(160, 30, 38, -38, 22, -1.2),
                       disk(85, 115, 44, 12, -44, 1.4)};
  // Sparse texture, one occlusion (objects 1 and 2 cross).
  scenes[1].objects = {bar(60, 50, 36, 30, 40, 16, 1.0, 0.6, 21), bar(120, 60, 30, 38, -42, 8, -1.2, 0.6, 22),
                       disk(30, 120, 40, 18, -40, 1.2)};
  // Dense texture, two occlusions.
  scenes[2].objects = {bar(70, 70, 30, 30, 34, -26, 1.0, 1.6, 31), bar(105, 40, 36, 34, -30, 30, 1.2, 1.6, 32),
                       bar(60, 97, 40, 30, 44, -6, -1.0, 1.6, 33)};
  // Mixed, all three pairs overlap.
  scenes[3].objects = {disk(86, 62, 36, 38, 20, 1.5), bar(110, 80, 34, 30, -36, -18, 1.0, 1.0, 41),
                       bar(95, 45, 32, 36, 4, 42, -1.2, 1.0, 42)};
  for (std::size_t k = 0; k < scenes.size(); ++k) scenes[k].seed = mix_seed(seed, k + 1);
  return scenes;
}

std::vector<NamedSequence> standard_suite(std::uint64_t seed) {
  std::vector<NamedSequence> suite;
  const auto scenes = standard_scenes(seed);
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const LabeledEvents clean = render_events(scenes[k]);
    for (std::size_t l = 0; l < std::size(kSuiteNoiseLevels); ++l) {
      const double n = kSuiteNoiseLevels[l];
      char name[32];
      std::snprintf(name, sizeof name, "scene%zu_n%.2f", k + 1, n);
      SceneSpec spec = scenes[k];
      spec.noise = n;
      suite.push_back({name, spec, inject_noise(clean, n, mix_seed(spec.seed, 0xBA))});
    }
  }
  return suite;
}

SceneSpec parse_scene_spec(const KeyValueFile& file) {
  SceneSpec spec;
  if (auto v = file.get_int("width")) spec.width = int(*v);
  if (auto v = file.get_int("height")) spec.height = int(*v);
  if (auto v = file.get_double("duration")) spec.duration = *v;
  if (auto v = file.get_double("contrast_threshold")) spec.contrast_threshold = *v;
  if (auto v = file.get_double("render_step")) spec.render_step = *v;
  if (auto v = file.get_double("noise")) spec.noise = *v;
  if (auto v = file.get_bool("threshold_jitter")) spec.threshold_jitter = *v;
  if (auto v = file.get_double("max_speed")) spec.max_speed = *v;
  if (auto v = file.get("seed")) {
    const auto res = std::from_chars(v->data(), v->data() + v->size(), spec.seed);
    if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
      throw Error(ErrorCode::SpecInvalid, "seed: not an unsigned integer: " + *v);
  }
  for (const auto& entry : file.entries()) {
    if (entry.key != "object") continue;
    std::istringstream in(entry.value);
    std::string kind;
    ObjectSpec obj;
    in >> kind >> obj.x >> obj.y >> obj.width >> obj.height >> obj.vx >> obj.vy >> obj.contrast;
    if (kind == "bars") {
      obj.shape = ShapeKind::TexturedBar;
      in >> obj.spot_radius >> obj.texture_density >> obj.texture_seed;
    } else if (kind == "disk") {
      obj.shape = ShapeKind::Disk;
    } else if (kind != "rect") {
      throw Error(ErrorCode::SpecInvalid, "line " + std::to_string(entry.line) + ": unknown shape " + kind);
    }
    std::string rest;
    if (in.fail() || (in >> rest)) {
      throw Error(ErrorCode::SpecInvalid, "line " + std::to_string(entry.line) + ": bad object");
    }
    spec.objects.push_back(obj);
  }
  validate(spec);
  return spec;
}

std::string format_scene_spec(const SceneSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "width = " << spec.width << "\nheight = " << spec.height << "\nduration = " << spec.duration
      << "\ncontrast_threshold = " << spec.contrast_threshold << "\nrender_step = " << spec.render_step
      << "\nnoise = " << spec.noise << "\nthreshold_jitter = " << (spec.threshold_jitter ? "true" : "false")
      << "\nmax_speed = " << spec.max_speed << "\nseed = " << spec.seed << "\n";
  for (const auto& o : spec.objects) {
    const char* kind = o.shape == ShapeKind::Rectangle ? "rect"
                       : o.shape == ShapeKind::Disk    ? "disk"
                                                       : "bars";
    out << "object = " << kind << ' ' << o.x << ' ' << o.y << ' ' << o.width << ' ' << o.height << ' '
        << o.vx << ' ' << o.vy << ' ' << o.contrast;
    if (o.shape == ShapeKind::TexturedBar)
      out << ' ' << o.spot_radius << ' ' << o.texture_density << ' ' << o.texture_seed;
    out << '\n';
  }
  return out.str();
}

}  // namespace evseg
