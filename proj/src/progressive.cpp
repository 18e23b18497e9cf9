#include "evseg/progressive.hpp"

#include <algorithm>
#include <cmath>

#include "evseg/error.hpp"

namespace evseg {

namespace {

double mean_of(const Matrix& m) {
  const auto v = m.values();
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  const auto va = a.values();
  const auto vb = b.values();
  double m = 0.0;
  for (std::size_t k = 0; k < va.size(); ++k) m = std::max(m, std::abs(va[k] - vb[k]));
  return m;
}

}  // namespace

std::vector<int> hard_labels(const SegmentationState& state, double noise_threshold) {
  const std::size_t n = state.probability.rows();
  std::vector<int> labels(n, kNoiseLabel);
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = state.confidence.row(k);
    const double best_c = c.empty() ? 0.0 : *std::max_element(c.begin(), c.end());
    if (best_c < noise_threshold) continue;
    const auto p = state.probability.row(k);
    labels[k] = int(std::max_element(p.begin(), p.end()) - p.begin()) + 1;
  }
  return labels;
}

std::vector<double> max_confidence(const SegmentationState& state) {
  const std::size_t n = state.confidence.rows();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = state.confidence.row(k);
    if (!c.empty()) out[k] = *std::max_element(c.begin(), c.end());
  }
  return out;
}

SegmentationResult run(const EventPacket& packet, std::size_t clusters, const MeConfig& me_cfg,
                       const EdConfig& ed_cfg, const LoopConfig& loop_cfg, std::uint64_t seed) {
  if (loop_cfg.iterations < 0 || loop_cfg.noise_threshold < 0.0 || loop_cfg.noise_threshold > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "iterations >= 0 and 0 <= threshold <= 1 required");
  }
  MeConfig cfg = me_cfg;
  SegmentationState state = initialize(packet, clusters, seed, cfg);
  if (cfg.sharpness.window_search) {
    const auto weights = std::vector<double>(packet.size(), 1.0);
    const ScalarImage iwe = accumulate_wiwe(packet, weights, weights, state.thetas[0], state.t_ref);
    cfg.sharpness.window = select_window(iwe, cfg.sharpness.candidate_windows);
    state.sharpness_per_cluster = evaluate_clusters(packet, state, cfg);
  }

  SegmentationResult result;
  state = run_me(packet, std::move(state), cfg);
  result.trace.push_back({0, state.total_sharpness(), mean_of(state.confidence), 0.0});

  for (int it = 1; it <= loop_cfg.iterations; ++it) {
    EdOutcome ed = run_ed(packet, state, ed_cfg);
    if (ed.degenerate) {
      // Keep the motion-only labels of the previous pass.
      result.degenerate = true;
      result.early_stop = true;
      break;
    }
    const double delta = max_abs_difference(ed.state.confidence, state.confidence);
    state = run_me(packet, std::move(ed.state), cfg);
    result.trace.push_back({it, state.total_sharpness(), mean_of(state.confidence), delta});
    if (delta < loop_cfg.stability_tol) {
      result.early_stop = true;
      break;
    }
  }
  result.labels = hard_labels(state, loop_cfg.noise_threshold);
  result.state = std::move(state);
  return result;
}

}  // namespace evseg
