#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evseg/events.hpp"
#include "evseg/state.hpp"

namespace evseg {

/// Curve mapping scaled correlation lambda * EC onto a confidence in [0, 1].
enum class MappingFunction { Tanh, LinearClamp, ExpSaturate, HardStep };

const char* to_string(MappingFunction mapping);
std::optional<MappingFunction> parse_mapping(std::string_view name);

double apply_mapping(MappingFunction mapping, double scaled);

struct EdConfig {
  MappingFunction mapping = MappingFunction::Tanh;
  std::optional<double> lambda;  // overrides 1 / mean(EC) when set
};

/// EC(i, j) = |IEC_j sampled at event i warped by theta_j|. IEC_j is built
/// from every event in the packet, independent of P and C.
Matrix event_correlation(const EventPacket& packet, const SegmentationState& state);

/// 1 / mean(EC) over all entries; nullopt when the mean is zero.
std::optional<double> compute_lambda(const Matrix& correlation);

Matrix map_confidence(const Matrix& correlation, double lambda, MappingFunction mapping);

struct EdOutcome {
  SegmentationState state;
  bool degenerate = false;  // mean(EC) == 0; confidences were zeroed
  std::optional<double> lambda;
};

/// Replaces C with the mapped correlation; thetas and P are untouched.
EdOutcome run_ed(const EventPacket& packet, SegmentationState state, const EdConfig& cfg);

/// Keeps an event when another event lies within Chebyshev distance `radius`
/// and |dt| <= `dt`. One forward and one backward pass over a per-pixel
/// timestamp grid.
std::vector<bool> baseline_st_filter(const EventPacket& packet, int radius, double dt);

}  // namespace evseg
