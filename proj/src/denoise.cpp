#include "evseg/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evseg/error.hpp"

namespace evseg {

const char* to_string(MappingFunction mapping) {
  switch (mapping) {
    case MappingFunction::Tanh: return "tanh";
    case MappingFunction::LinearClamp: return "linear";
    case MappingFunction::ExpSaturate: return "exp";
    case MappingFunction::HardStep: return "step";
  }
  return "unknown";
}

std::optional<MappingFunction> parse_mapping(std::string_view name) {
  if (name == "tanh") return MappingFunction::Tanh;
  if (name == "linear" || name == "linear_clamp") return MappingFunction::LinearClamp;
  if (name == "exp" || name == "exp_saturate") return MappingFunction::ExpSaturate;
  if (name == "step" || name == "hard_step") return MappingFunction::HardStep;
  return std::nullopt;
}

double apply_mapping(MappingFunction mapping, double scaled) {
  switch (mapping) {
    case MappingFunction::Tanh: return std::tanh(scaled);
    case MappingFunction::LinearClamp: return std::min(scaled, 1.0);
    case MappingFunction::ExpSaturate: return 1.0 - std::exp(-scaled);
    case MappingFunction::HardStep: return scaled >= 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Matrix event_correlation(const EventPacket& packet, const SegmentationState& state) {
  const std::size_t n = packet.size();
  Matrix ec(n, state.clusters(), 0.0);
  const auto events = packet.events();
  for (std::size_t j = 0; j < state.clusters(); ++j) {
    const ScalarImage iec = accumulate_iec(packet, state.thetas[j], state.t_ref);
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = warp_event(events[i], state.thetas[j], state.t_ref);
      ec(i, j) = std::abs(sample_bilinear(iec, p.x, p.y));
    }
  }
  return ec;
}

std::optional<double> compute_lambda(const Matrix& correlation) {
  const auto values = correlation.values();
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / double(values.size());
  if (!(mean > 0.0)) return std::nullopt;
  return 1.0 / mean;
}

Matrix map_confidence(const Matrix& correlation, double lambda, MappingFunction mapping) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  Matrix c(correlation.rows(), correlation.cols());
  const auto in = correlation.values();
  auto out = c.values();
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = apply_mapping(mapping, lambda * in[k]);
  return c;
}

EdOutcome run_ed(const EventPacket& packet, SegmentationState state, const EdConfig& cfg) {
  if (cfg.lambda && !(*cfg.lambda > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "lambda override must be positive");
  }
  const Matrix ec = event_correlation(packet, state);
  EdOutcome outcome;
  outcome.lambda = cfg.lambda ? cfg.lambda : compute_lambda(ec);
  if (!outcome.lambda) {
    outcome.degenerate = true;
    state.confidence = Matrix(ec.rows(), ec.cols(), 0.0);
  } else {
    state.confidence = map_confidence(ec, *outcome.lambda, cfg.mapping);
  }
  outcome.state = std::move(state);
  return outcome;
}

std::vector<bool> baseline_st_filter(const EventPacket& packet, int radius, double dt) {
  if (radius < 1 || !(dt > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "filter needs radius >= 1 and dt > 0");
  }
  const int w = packet.width();
  const int h = packet.height();
  const auto events = packet.events();
  std::vector<bool> keep(events.size(), false);
  constexpr double kNone = std::numeric_limits<double>::infinity();
  std::vector<double> stamp(std::size_t(w) * std::size_t(h));

  const auto supported = [&](const Event& e, bool forward) {
    const int x0 = std::max(int(e.x) - radius, 0);
    const int x1 = std::min(int(e.x) + radius, w - 1);
    const int y0 = std::max(int(e.y) - radius, 0);
    const int y1 = std::min(int(e.y) + radius, h - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double s = stamp[std::size_t(y) * w + x];
        if (s == kNone) continue;
        if ((forward ? e.t - s : s - e.t) <= dt) return true;
      }
    }
    return false;
  };

  // Forward: latest earlier event per pixel.
  std::fill(stamp.begin(), stamp.end(), kNone);
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (supported(events[k], true)) keep[k] = true;
    stamp[std::size_t(events[k].y) * w + events[k].x] = events[k].t;
  }
  // Backward: earliest later event per pixel.
  std::fill(stamp.begin(), stamp.end(), kNone);
  for (std::size_t k = events.size(); k-- > 0;) {
    if (!keep[k] && supported(events[k], false)) keep[k] = true;
    stamp[std::size_t(events[k].y) * w + events[k].x] = events[k].t;
  }
  return keep;
}

}  // namespace evseg
