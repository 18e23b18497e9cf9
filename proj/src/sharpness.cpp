#include "evseg/sharpness.hpp"

#include <algorithm>
#include <cmath>

#include "evseg/error.hpp"

namespace evseg {

namespace {

void check_window(const ScalarImage& img, int window) {
  if (window < 3 || window % 2 == 0 || window > std::min(img.width(), img.height())) {
    throw Error(ErrorCode::BadWindow, "window must be odd, at least 3, and fit inside the image, got " +
                                          std::to_string(window));
  }
}

void build_integrals(const ScalarImage& img, std::vector<double>& sum, std::vector<double>& sum_sq) {
  const int w = img.width();
  const int h = img.height();
  const std::size_t stride = std::size_t(w) + 1;
  sum.assign(stride * (std::size_t(h) + 1), 0.0);
  sum_sq.assign(sum.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    double row_sq = 0.0;
    const std::size_t above = std::size_t(y) * stride;
    const std::size_t here = above + stride;
    for (int x = 0; x < w; ++x) {
      const double v = img.at(x, y);
      row += v;
      row_sq += v * v;
      sum[here + x + 1] = sum[above + x + 1] + row;
      sum_sq[here + x + 1] = sum_sq[above + x + 1] + row_sq;
    }
  }
}

// Window variance at (x, y) from integral images; pixels outside count as 0.
inline double window_variance(const std::vector<double>& sum, const std::vector<double>& sum_sq,
                              int w, int h, int x, int y, int half, double inv_area) {
  const std::size_t stride = std::size_t(w) + 1;
  const int x0 = std::max(x - half, 0);
  const int y0 = std::max(y - half, 0);
  const int x1 = std::min(x + half + 1, w);
  const int y1 = std::min(y + half + 1, h);
  const auto rect = [&](const std::vector<double>& s) {
    return s[std::size_t(y1) * stride + x1] - s[std::size_t(y0) * stride + x1] -
           s[std::size_t(y1) * stride + x0] + s[std::size_t(y0) * stride + x0];
  };
  const double mean = rect(sum) * inv_area;
  const double var = rect(sum_sq) * inv_area - mean * mean;
  return var > 0.0 ? var : 0.0;
}

}  // namespace

ScalarImage local_variance(const ScalarImage& img, int window) {
  check_window(img, window);
  std::vector<double> sum;
  std::vector<double> sum_sq;
  build_integrals(img, sum, sum_sq);
  const int half = window / 2;
  const double inv_area = 1.0 / (double(window) * double(window));
  ScalarImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(x, y) = window_variance(sum, sum_sq, img.width(), img.height(), x, y, half, inv_area);
  return out;
}

SharpnessValue sharpness(const ScalarImage& wiwe, const ScalarImage& iec, int window) {
  if (!wiwe.same_geometry(iec)) {
    throw Error(ErrorCode::GeometryMismatch, "WIWE and IEC differ in size");
  }
  return weighted_variance_mean(local_variance(wiwe, window), iec);
}

SharpnessValue weighted_variance_mean(const ScalarImage& var, const ScalarImage& iec) {
  if (!var.same_geometry(iec)) {
    throw Error(ErrorCode::GeometryMismatch, "variance and IEC differ in size");
  }
  double num = 0.0;
  double den = 0.0;
  const auto v = var.values();
  const auto c = iec.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double a = std::abs(c[k]);
    num += v[k] * a;
    den += a;
  }
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

int select_window(const ScalarImage& img, std::span<const int> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate windows");
  std::vector<int> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  int best = sorted.front();
  double best_total = -1.0;
  for (int window : sorted) {
    const double total = local_variance(img, window).sum();
    if (total > best_total) {
      best_total = total;
      best = window;
    }
  }
  return best;
}

double image_variance(const ScalarImage& img) {
  const auto v = img.values();
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / double(v.size());
}

double mean_gradient_magnitude(const ScalarImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) return 0.0;
  double acc = 0.0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      acc += gx * gx + gy * gy;
    }
  }
  return acc / (double(w - 2) * double(h - 2));
}

double mean_hessian_magnitude(const ScalarImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) return 0.0;
  double acc = 0.0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double c = img.at(x, y);
      const double fxx = img.at(x + 1, y) - 2.0 * c + img.at(x - 1, y);
      const double fyy = img.at(x, y + 1) - 2.0 * c + img.at(x, y - 1);
      const double fxy = 0.25 * (img.at(x + 1, y + 1) - img.at(x + 1, y - 1) -
                                 img.at(x - 1, y + 1) + img.at(x - 1, y - 1));
      acc += fxx * fxx + 2.0 * fxy * fxy + fyy * fyy;
    }
  }
  return acc / (double(w - 2) * double(h - 2));
}

AlternativeCosts alternative_costs(const ScalarImage& wiwe) {
  return {image_variance(wiwe), mean_gradient_magnitude(wiwe), mean_hessian_magnitude(wiwe)};
}

SharpnessWorkspace::SharpnessWorkspace(int width, int height) : width_(width), height_(height) {}

SharpnessValue SharpnessWorkspace::evaluate(const ScalarImage& wiwe, const ScalarImage& iec,
                                            int window) {
  if (!wiwe.same_geometry(iec) || wiwe.width() != width_ || wiwe.height() != height_) {
    throw Error(ErrorCode::GeometryMismatch, "workspace and image sizes differ");
  }
  check_window(wiwe, window);
  build_integrals(wiwe, sum_, sum_sq_);
  const int half = window / 2;
  const double inv_area = 1.0 / (double(window) * double(window));
  double num = 0.0;
  double den = 0.0;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const double a = std::abs(iec.at(x, y));
      if (a == 0.0) continue;
      num += a * window_variance(sum_, sum_sq_, width_, height_, x, y, half, inv_area);
      den += a;
    }
  }
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

}  // namespace evseg
