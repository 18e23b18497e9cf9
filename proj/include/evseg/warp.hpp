#pragma once

#include <algorithm>
#include <filesystem>
#include <span>
#include <vector>

#include "evseg/events.hpp"

namespace evseg {

/// Per-cluster motion: constant image-plane velocity in pixels/second.
struct WarpParams {
  double vx = 0.0;
  double vy = 0.0;

  friend bool operator==(const WarpParams&, const WarpParams&) = default;
};

inline constexpr double kDefaultMaxSpeed = 1000.0;

/// Dense row-major W x H buffer of doubles.
class ScalarImage {
 public:
  ScalarImage() = default;
  ScalarImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height), values_(std::size_t(width) * std::size_t(height), fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& at(int x, int y) { return values_[std::size_t(y) * std::size_t(width_) + std::size_t(x)]; }
  double at(int x, int y) const {
    return values_[std::size_t(y) * std::size_t(width_) + std::size_t(x)];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }
  double sum() const;
  bool same_geometry(const ScalarImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Moves an event along the trajectory defined by `theta` to time `t_ref`.
inline Point2 warp_event(const Event& e, const WarpParams& theta, double t_ref) {
  const double dt = e.t - t_ref;
  return {double(e.x) - dt * theta.vx, double(e.y) - dt * theta.vy};
}

/// Bilinear vote of `weight` at a continuous position; neighbours that fall
/// off the image are dropped.
void splat_bilinear(ScalarImage& img, double x, double y, double weight);

/// Bilinear interpolation; 0 outside [0, W-1] x [0, H-1].
double sample_bilinear(const ScalarImage& img, double x, double y);

/// Weighted image of warped events: each event votes c_k * p_k at its warped
/// position.
ScalarImage accumulate_wiwe(const EventPacket& packet, std::span<const double> probability,
                            std::span<const double> confidence, const WarpParams& theta,
                            double t_ref);

/// Image of events correlation: polarity votes at warped positions divided by
/// the packet's timespan. Throws ZeroTimespan when t1 <= t0.
ScalarImage accumulate_iec(const EventPacket& packet, const WarpParams& theta, double t_ref);

/// Fills both images in one warp pass. `weights` holds the per-event WIWE
/// weight (c * p). Images must already have the packet's geometry.
void accumulate_wiwe_iec(const EventPacket& packet, std::span<const double> weights,
                         const WarpParams& theta, double t_ref, ScalarImage& wiwe,
                         ScalarImage& iec);

/// 16-bit binary PGM; values are mapped affinely from [min, max] onto
/// [0, 65535] and the mapping is written as a comment.
void write_pgm16(const ScalarImage& img, const std::filesystem::path& path);

}  // namespace evseg
