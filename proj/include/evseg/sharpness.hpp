#pragma once

#include <span>
#include <vector>

#include "evseg/warp.hpp"

namespace evseg {

struct SharpnessConfig {
  int window = 5;
  bool window_search = false;
  std::vector<int> candidate_windows{3, 5, 7, 9};
};

/// Per-pixel variance over the window x window neighbourhood. The image is
/// zero-padded at the borders and the divisor is always window^2.
ScalarImage local_variance(const ScalarImage& img, int window);

struct SharpnessValue {
  double value = 0.0;
  bool degenerate = false;  // sum |IEC| == 0
};

/// |IEC|-weighted mean of the local variance of `wiwe`.
SharpnessValue sharpness(const ScalarImage& wiwe, const ScalarImage& iec, int window);

/// The weighting step on its own: sum(var * |iec|) / sum(|iec|).
SharpnessValue weighted_variance_mean(const ScalarImage& variance, const ScalarImage& iec);

/// Candidate window maximising the summed local variance; ties go to the
/// smaller window.
int select_window(const ScalarImage& img, std::span<const int> candidates);

struct AlternativeCosts {
  double variance = 0.0;
  double grad_magnitude = 0.0;
  double hessian_magnitude = 0.0;
};

/// Global image variance, mean squared central-difference gradient magnitude
/// and mean squared Hessian (Frobenius) magnitude over interior pixels.
AlternativeCosts alternative_costs(const ScalarImage& wiwe);

double image_variance(const ScalarImage& img);
double mean_gradient_magnitude(const ScalarImage& img);
double mean_hessian_magnitude(const ScalarImage& img);

/// Reusable scratch space for repeated sharpness evaluation on one geometry.
class SharpnessWorkspace {
 public:
  SharpnessWorkspace(int width, int height);

  /// Same value as sharpness(wiwe, iec, window).value but only evaluates the
  /// variance where the IEC is nonzero.
  SharpnessValue evaluate(const ScalarImage& wiwe, const ScalarImage& iec, int window);

 private:
  int width_;
  int height_;
  std::vector<double> sum_;     // (W+1) x (H+1) integral image of values
  std::vector<double> sum_sq_;  // integral image of squared values
};

}  // namespace evseg
