#include "evseg/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "evseg/error.hpp"

namespace evseg {

double SegmentationState::total_sharpness() const {
  return std::accumulate(sharpness_per_cluster.begin(), sharpness_per_cluster.end(), 0.0);
}

std::vector<double> cluster_weights(const SegmentationState& state, std::size_t j) {
  const std::size_t n = state.probability.rows();
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = state.probability(k, j) * state.confidence(k, j);
  return w;
}

const char* to_string(Objective objective) {
  switch (objective) {
    case Objective::Sharpness: return "sharpness";
    case Objective::Variance: return "variance";
    case Objective::GradientMagnitude: return "gradient";
    case Objective::HessianMagnitude: return "hessian";
  }
  return "unknown";
}

namespace {

void log(const MeConfig& cfg, MeLogRecord record) {
  if (cfg.on_log) cfg.on_log(record);
}

WarpParams clamp_speed(WarpParams theta, double max_speed) {
  const double speed = std::hypot(theta.vx, theta.vy);
  if (speed > max_speed) {
    theta.vx *= max_speed / speed;
    theta.vy *= max_speed / speed;
  }
  return theta;
}

constexpr double kBasinMergeFraction = 0.25;
constexpr std::size_t kClimbsPerCluster = 4;

double reference_time(const EventPacket& packet, const MeConfig& cfg) {
  return cfg.t_ref.value_or(packet.t0());
}

}  // namespace

ClusterObjective::ClusterObjective(const EventPacket& packet, std::vector<double> weights,
                                   double t_ref, const MeConfig& cfg)
    : packet_(packet),
      weights_(std::move(weights)),
      t_ref_(t_ref),
      window_(cfg.sharpness.window),
      objective_(cfg.objective),
      zero_weights_(std::all_of(weights_.begin(), weights_.end(), [](double w) { return w == 0.0; })),
      wiwe_(packet.width(), packet.height()),
      iec_(packet.width(), packet.height()),
      workspace_(packet.width(), packet.height()) {
  if (weights_.size() != packet.size()) {
    throw Error(ErrorCode::LengthMismatch, "weight column must match the event count");
  }
}

double ClusterObjective::operator()(const WarpParams& theta) {
  ++evaluations_;
  if (zero_weights_) return 0.0;
  accumulate_wiwe_iec(packet_, weights_, theta, t_ref_, wiwe_, iec_);
  switch (objective_) {
    case Objective::Sharpness: return workspace_.evaluate(wiwe_, iec_, window_).value;
    case Objective::Variance: return image_variance(wiwe_);
    case Objective::GradientMagnitude: return mean_gradient_magnitude(wiwe_);
    case Objective::HessianMagnitude: return mean_hessian_magnitude(wiwe_);
  }
  return 0.0;
}

WarpParams ClusterObjective::gradient(const WarpParams& theta, double h) {
  const double fxp = (*this)({theta.vx + h, theta.vy});
  const double fxm = (*this)({theta.vx - h, theta.vy});
  const double fyp = (*this)({theta.vx, theta.vy + h});
  const double fym = (*this)({theta.vx, theta.vy - h});
  return {(fxp - fxm) / (2.0 * h), (fyp - fym) / (2.0 * h)};
}

double cluster_sharpness(const EventPacket& packet, const SegmentationState& state, std::size_t j,
                         const WarpParams& theta, const MeConfig& cfg) {
  ClusterObjective objective(packet, cluster_weights(state, j), state.t_ref, cfg);
  return objective(theta);
}

std::vector<double> evaluate_clusters(const EventPacket& packet, const SegmentationState& state,
                                      const MeConfig& cfg) {
  std::vector<double> values(state.clusters());
  for (std::size_t j = 0; j < state.clusters(); ++j)
    values[j] = cluster_sharpness(packet, state, j, state.thetas[j], cfg);
  return values;
}

std::vector<WarpParams> init_grid(const MeConfig& cfg) {
  const int n = std::max(cfg.grid_size, 1);
  std::vector<WarpParams> grid;
  grid.reserve(std::size_t(n) * std::size_t(n));
  const double step = n > 1 ? 2.0 * cfg.grid_range / (n - 1) : 0.0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      grid.push_back({n > 1 ? -cfg.grid_range + ix * step : 0.0,
                      n > 1 ? -cfg.grid_range + iy * step : 0.0});
  return grid;
}

SegmentationState initialize(const EventPacket& packet, std::size_t clusters, std::uint64_t seed,
                             const MeConfig& cfg) {
  if (packet.empty()) throw Error(ErrorCode::EmptyPacket, "cannot initialise on an empty packet");
  if (clusters < 1) throw Error(ErrorCode::InvalidArgument, "need at least one cluster");

  const double t_ref = reference_time(packet, cfg);
  const auto grid = init_grid(cfg);
  const int n = std::max(cfg.grid_size, 1);
  ClusterObjective objective(packet, std::vector<double>(packet.size(), 1.0), t_ref, cfg);
  std::vector<double> values(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) values[g] = objective(grid[g]);

  // A cell is a peak when it dominates its 8 neighbours; among equal values
  // the first cell in row-major order wins.
  std::vector<std::size_t> peaks;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const std::size_t g = std::size_t(iy) * n + ix;
      bool is_peak = true;
      for (int dy = -1; dy <= 1 && is_peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = ix + dx;
          const int ny = iy + dy;
          if (nx < 0 || ny < 0 || nx >= n || ny >= n) continue;
          const std::size_t h = std::size_t(ny) * n + nx;
          if (values[h] > values[g] || (values[h] == values[g] && h < g)) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak) peaks.push_back(g);
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  SegmentationState state;
  state.t_ref = t_ref;

  // Neighbouring cells only suppress adjacent peaks; two peaks further apart
  // can still sit in one basin. Climb from each candidate and skip those that
  // land on a basin already taken. The grid velocity itself is kept.
  SegmentationState probe;
  probe.t_ref = t_ref;
  probe.probability = Matrix(packet.size(), 1, 1.0);
  probe.confidence = Matrix(packet.size(), 1, 1.0);
  MeConfig climb = cfg;
  climb.on_ascent = nullptr;
  const double cell = n > 1 ? 2.0 * cfg.grid_range / (n - 1) : 1.0;
  // Suppressed cells come after the true peaks, strongest first; a motion
  // one cell away from a stronger one only shows up this way.
  std::vector<std::size_t> candidates = peaks;
  std::vector<std::size_t> rest_by_value;
  for (std::size_t g = 0; g < grid.size(); ++g)
    if (std::find(peaks.begin(), peaks.end(), g) == peaks.end()) rest_by_value.push_back(g);
  std::stable_sort(rest_by_value.begin(), rest_by_value.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  candidates.insert(candidates.end(), rest_by_value.begin(), rest_by_value.end());
  const std::size_t max_climbs = std::max(peaks.size(), kClimbsPerCluster * clusters);

  std::vector<WarpParams> basins;
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < std::min(candidates.size(), max_climbs); ++c) {
    const std::size_t g = candidates[c];
    if (chosen.size() == clusters) break;
    if (values[g] <= 0.0) break;
    probe.thetas = {grid[g]};
    const WarpParams top = optimize_theta(packet, probe, 0, climb).theta;
    const bool duplicate = std::any_of(basins.begin(), basins.end(), [&](const WarpParams& b) {
      return std::hypot(b.vx - top.vx, b.vy - top.vy) < kBasinMergeFraction * cell;
    });
    if (duplicate) {
      log(cfg, {"init", -1, -1, values[g],
                "peak vx=" + std::to_string(grid[g].vx) + " vy=" + std::to_string(grid[g].vy) +
                    " shares a basin with a stronger peak"});
      continue;
    }
    basins.push_back(top);
    chosen.push_back(g);
  }
  peaks = chosen;
  for (std::size_t j = 0; j < peaks.size(); ++j) {
    state.thetas.push_back(grid[peaks[j]]);
  }
  if (peaks.size() < clusters) {
    log(cfg, {"warning", -1, -1, double(peaks.size()),
              "NotEnoughPeaks: filling remaining clusters with random grid velocities"});
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (std::find(peaks.begin(), peaks.end(), g) == peaks.end()) rest.push_back(g);
    std::shuffle(rest.begin(), rest.end(), rng);
    for (std::size_t j = peaks.size(); j < clusters; ++j) {
      state.thetas.push_back(rest.empty() ? grid[0] : grid[rest[(j - peaks.size()) % rest.size()]]);
    }
  }
  state.probability = Matrix(packet.size(), clusters, 1.0 / double(clusters));
  state.confidence = Matrix(packet.size(), clusters, 1.0);
  state.sharpness_per_cluster = evaluate_clusters(packet, state, cfg);
  for (std::size_t j = 0; j < clusters; ++j) {
    log(cfg, {"init", -1, int(j), state.sharpness_per_cluster[j],
              "vx=" + std::to_string(state.thetas[j].vx) + " vy=" + std::to_string(state.thetas[j].vy)});
  }
  return state;
}

AscentResult optimize_theta(const EventPacket& packet, const SegmentationState& state,
                            std::size_t j, const MeConfig& cfg) {
  ClusterObjective objective(packet, cluster_weights(state, j), state.t_ref, cfg);
  AscentResult result;
  result.theta = state.thetas[j];
  result.sharpness = objective(result.theta);
  result.accepted.push_back(result.sharpness);
  if (objective.all_zero_weights()) {
    result.evaluations = objective.evaluations();
    if (cfg.on_ascent) cfg.on_ascent(result);
    return result;
  }

  double step = cfg.ascent_step;
  for (int it = 0; it < cfg.max_ascent_iters; ++it) {
    const WarpParams g = objective.gradient(result.theta, cfg.fd_step);
    const double norm = std::hypot(g.vx, g.vy);
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    bool accepted = false;
    WarpParams candidate;
    double value = 0.0;
    while (step >= cfg.min_step) {
      candidate = clamp_speed({result.theta.vx + step * g.vx / norm,
                               result.theta.vy + step * g.vy / norm},
                              cfg.max_speed);
      value = objective(candidate);
      if (value >= result.sharpness) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    ++result.iterations;
    const double gain = (value - result.sharpness) / std::max(std::abs(result.sharpness), 1e-300);
    result.theta = candidate;
    result.sharpness = value;
    result.accepted.push_back(value);
    if (gain < cfg.ascent_tol) break;
    step = std::min(2.0 * step, cfg.ascent_step);
  }
  result.evaluations = objective.evaluations();
  if (cfg.on_ascent) cfg.on_ascent(result);
  return result;
}

Matrix update_probabilities(const EventPacket& packet, const SegmentationState& state) {
  const std::size_t n = packet.size();
  const std::size_t clusters = state.clusters();
  Matrix sampled(n, clusters, 0.0);
  const auto events = packet.events();
  for (std::size_t j = 0; j < clusters; ++j) {
    const auto p = state.probability.column(j);
    const auto c = state.confidence.column(j);
    const ScalarImage wiwe = accumulate_wiwe(packet, p, c, state.thetas[j], state.t_ref);
    for (std::size_t k = 0; k < n; ++k) {
      const Point2 w = warp_event(events[k], state.thetas[j], state.t_ref);
      sampled(k, j) = sample_bilinear(wiwe, w.x, w.y);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    auto row = sampled.row(k);
    double total = 0.0;
    for (double v : row) total += v;
    if (total < 1e-12) {
      std::fill(row.begin(), row.end(), 1.0 / double(clusters));
    } else {
      for (double& v : row) v /= total;
    }
  }
  return sampled;
}

SegmentationState run_me(const EventPacket& packet, SegmentationState state, const MeConfig& cfg) {
  state.sharpness_per_cluster = evaluate_clusters(packet, state, cfg);
  double best_total = state.total_sharpness();
  log(cfg, {"alternation", 0, -1, best_total, "start"});

  for (int a = 0; a < cfg.em_alternations; ++a) {
    SegmentationState next = state;
    for (std::size_t j = 0; j < state.clusters(); ++j) {
      const AscentResult r = optimize_theta(packet, state, j, cfg);
      next.thetas[j] = r.theta;
      log(cfg, {"ascent", a + 1, int(j), r.sharpness, ""});
    }
    if (state.clusters() > 1) next.probability = update_probabilities(packet, next);
    next.sharpness_per_cluster = evaluate_clusters(packet, next, cfg);
    const double total = next.total_sharpness();
    log(cfg, {"alternation", a + 1, -1, total, ""});
    // The reassignment can lower the objective; keep the best state seen.
    if (total < best_total) break;
    const double gain = (total - best_total) / std::max(std::abs(best_total), 1e-300);
    state = std::move(next);
    best_total = total;
    if (gain < cfg.ascent_tol) break;
  }
  return state;
}

}  // namespace evseg
