#pragma once

#include <cstdint>
#include <vector>

#include "evseg/denoise.hpp"
#include "evseg/motion.hpp"

namespace evseg {

struct LoopConfig {
  int iterations = 7;
  double stability_tol = 1e-3;  // max |dC| entrywise
  double noise_threshold = 0.5;
};

struct TraceEntry {
  int iteration = 0;
  double total_sharpness = 0.0;
  double mean_confidence = 0.0;
  double max_delta_confidence = 0.0;  // 0 for the motion-only pass
};

struct SegmentationResult {
  SegmentationState state;
  std::vector<int> labels;         // 1..N_l or kNoiseLabel
  std::vector<TraceEntry> trace;   // entry 0 is the motion-only pass
  bool degenerate = false;
  bool early_stop = false;
};

/// NOISE when max_j c_kj < threshold, otherwise 1 + argmax_j p_kj (lowest
/// index on ties).
std::vector<int> hard_labels(const SegmentationState& state, double noise_threshold);

/// Largest confidence per event, the denoising score.
std::vector<double> max_confidence(const SegmentationState& state);

/// Initialise, run motion estimation, then alternate confidence and motion
/// updates until the confidences stop changing or `iterations` is reached.
SegmentationResult run(const EventPacket& packet, std::size_t clusters, const MeConfig& me_cfg,
                       const EdConfig& ed_cfg, const LoopConfig& loop_cfg, std::uint64_t seed);

}  // namespace evseg
