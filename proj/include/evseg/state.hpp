#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evseg/warp.hpp"

namespace evseg {

/// Row-major events x clusters matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
    return out;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Joint unknowns of the segmentation: one motion per cluster, the
/// event-to-cluster probabilities and the per-event, per-cluster confidence.
struct SegmentationState {
  std::vector<WarpParams> thetas;
  Matrix probability;  // rows sum to 1
  Matrix confidence;   // entries in [0, 1]
  double t_ref = 0.0;
  std::vector<double> sharpness_per_cluster;

  std::size_t clusters() const noexcept { return thetas.size(); }
  double total_sharpness() const;
};

/// Elementwise product of column j of P and C.
std::vector<double> cluster_weights(const SegmentationState& state, std::size_t j);

}  // namespace evseg
