#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evseg/events.hpp"
#include "evseg/sharpness.hpp"
#include "evseg/state.hpp"

namespace evseg {

/// Objective maximised over each cluster's motion. `Sharpness` is the
/// IEC-weighted local variance; the others are the ablation substitutes.
enum class Objective { Sharpness, Variance, GradientMagnitude, HessianMagnitude };

const char* to_string(Objective objective);

struct AscentResult {
  WarpParams theta;
  double sharpness = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> accepted;  // objective value of every accepted iterate, starting point first
};

struct MeLogRecord {
  std::string phase;  // "init", "ascent", "alternation", "warning"
  int alternation = -1;
  int cluster = -1;
  double value = 0.0;
  std::string message;
};

struct MeConfig {
  double fd_step = 0.5;          // px/s
  double ascent_step = 10.0;     // px/s, initial step length along the gradient
  double min_step = 1e-3;        // px/s, backtracking gives up below this
  int max_ascent_iters = 100;
  double ascent_tol = 1e-6;      // relative objective gain
  int em_alternations = 5;
  double grid_range = 100.0;     // initial grid covers [-range, range]^2 px/s
  int grid_size = 11;            // points per axis
  double max_speed = kDefaultMaxSpeed;
  SharpnessConfig sharpness;
  Objective objective = Objective::Sharpness;
  std::optional<double> t_ref;   // defaults to the packet's t0

  std::function<void(const MeLogRecord&)> on_log;
  std::function<void(const AscentResult&)> on_ascent;
};

/// Objective for one cluster at fixed per-event weights; reuses its image
/// buffers across evaluations.
class ClusterObjective {
 public:
  ClusterObjective(const EventPacket& packet, std::vector<double> weights, double t_ref,
                   const MeConfig& cfg);

  double operator()(const WarpParams& theta);

  /// Central finite-difference gradient with step h.
  WarpParams gradient(const WarpParams& theta, double h);

  bool all_zero_weights() const noexcept { return zero_weights_; }
  int evaluations() const noexcept { return evaluations_; }
  const ScalarImage& last_wiwe() const noexcept { return wiwe_; }

 private:
  const EventPacket& packet_;
  std::vector<double> weights_;
  double t_ref_;
  int window_;
  Objective objective_;
  bool zero_weights_;
  int evaluations_ = 0;
  ScalarImage wiwe_;
  ScalarImage iec_;
  SharpnessWorkspace workspace_;
};

/// Evaluates the objective of cluster j at `theta` under the state's weights.
double cluster_sharpness(const EventPacket& packet, const SegmentationState& state, std::size_t j,
                         const WarpParams& theta, const MeConfig& cfg);

/// Velocities of the initial grid, row-major with vy outer.
std::vector<WarpParams> init_grid(const MeConfig& cfg);

/// Grid-search initialisation: the N_l strongest local maxima of the
/// single-cluster objective; uniform P; C = 1. Throws EmptyPacket.
SegmentationState initialize(const EventPacket& packet, std::size_t clusters, std::uint64_t seed,
                             const MeConfig& cfg);

/// Finite-difference gradient ascent with backtracking on cluster j.
AscentResult optimize_theta(const EventPacket& packet, const SegmentationState& state,
                            std::size_t j, const MeConfig& cfg);

/// Reassignment: WIWE_j sampled at each event's warped position,
/// normalised across clusters. Rows with no support become uniform.
Matrix update_probabilities(const EventPacket& packet, const SegmentationState& state);

/// Alternates per-cluster ascent and probability updates with C held fixed.
SegmentationState run_me(const EventPacket& packet, SegmentationState state, const MeConfig& cfg);

/// Objective of every cluster at the state's current thetas and weights.
std::vector<double> evaluate_clusters(const EventPacket& packet, const SegmentationState& state,
                                      const MeConfig& cfg);

}  // namespace evseg
