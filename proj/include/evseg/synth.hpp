#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evseg/config.hpp"
#include "evseg/events.hpp"

namespace evseg {

enum class ShapeKind { Rectangle, TexturedBar, Disk };

/// Sprite moving at constant velocity. `contrast` is the log intensity
/// relative to the zero background. A textured bar is a rectangle of
/// `contrast` sprinkled with non-overlapping round spots of -contrast;
/// `texture_density` is the expected spot count per 100 px^2 and
/// `texture_seed` fixes their layout. A disk is inscribed in the
/// width x height box (diameter = min of the two).
struct ObjectSpec {
  ShapeKind shape = ShapeKind::Rectangle;
  double x = 0.0;  // left edge at t0, px
  double y = 0.0;  // top edge at t0, px
  double width = 10.0;
  double height = 10.0;
  double vx = 0.0;  // px/s
  double vy = 0.0;
  double contrast = 1.0;
  double spot_radius = 2.5;
  double texture_density = 1.0;
  std::uint64_t texture_seed = 0;
};

struct SceneSpec {
  int width = 240;
  int height = 180;
  double duration = 0.5;
  std::vector<ObjectSpec> objects;  // earlier entries are nearer the camera
  double contrast_threshold = 0.5;
  double render_step = 1e-3;
  double noise = 0.0;
  bool threshold_jitter = false;  // jitter each crossing test by N(0, noise * C) instead of BA noise
  double max_speed = 1000.0;
  std::uint64_t seed = 1;
};

/// Throws SpecInvalid when the spec violates its invariants.
void validate(const SceneSpec& spec);

/// Renders the scene and emits threshold-crossing events, labelled with the
/// object that caused each intensity change. Adds background-activity noise
/// at level `spec.noise` unless threshold jitter is selected.
LabeledEvents generate_scene(const SceneSpec& spec);

/// Noise-free rendering only (no BA noise, no jitter).
LabeledEvents render_events(const SceneSpec& spec);

/// Adds Poisson(n * N_signal) uniformly distributed events labelled NOISE.
LabeledEvents inject_noise(const LabeledEvents& labeled, double noise_level, std::uint64_t seed);

/// Log intensity of the composed scene at a pixel centre and time.
double scene_log_intensity(const SceneSpec& spec, int px, int py, double t);

struct NamedSequence {
  std::string name;
  SceneSpec spec;
  LabeledEvents data;
};

inline constexpr double kSuiteNoiseLevels[5] = {0.05, 0.10, 0.15, 0.20, 0.25};

/// The four benchmark scene layouts (three objects each).
std::vector<SceneSpec> standard_scenes(std::uint64_t seed);

/// 4 scenes x 5 noise levels, named `scene<k>_n<level>`.
std::vector<NamedSequence> standard_suite(std::uint64_t seed);

SceneSpec parse_scene_spec(const KeyValueFile& file);
std::string format_scene_spec(const SceneSpec& spec);

}  // namespace evseg
