#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "evseg/error.hpp"
#include "evseg/metrics.hpp"
#include "evseg/motion.hpp"
#include "evseg/progressive.hpp"
#include "evseg/synth.hpp"
#include "test_support.hpp"

using namespace evseg;

namespace {

// Hand-rolled bilinear vote and lookup for the reassignment oracle.
double oracle_wiwe_at(const EventPacket& p, const std::vector<double>& w, WarpParams th,
                      double t_ref, int px, int py) {
  double acc = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = p[k].x - (p[k].t - t_ref) * th.vx;
    const double y = p[k].y - (p[k].t - t_ref) * th.vy;
    const double wx = 1.0 - std::abs(x - px), wy = 1.0 - std::abs(y - py);
    if (wx > 0 && wy > 0) acc += w[k] * wx * wy;
  }
  return acc;
}

double oracle_sample(const EventPacket& p, const std::vector<double>& w, WarpParams th,
                     double t_ref, double x, double y) {
  if (x < 0 || y < 0 || x > p.width() - 1 || y > p.height() - 1) return 0;
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  double acc = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int px = x0 + dx, py = y0 + dy;
      if (px >= p.width() || py >= p.height()) continue;
      const double b = (1 - std::abs(x - px)) * (1 - std::abs(y - py));
      if (b > 0) acc += b * oracle_wiwe_at(p, w, th, t_ref, px, py);
    }
  return acc;
}

MeConfig quiet_config() {
  MeConfig cfg;
  return cfg;
}

}  // namespace

TEST_CASE("initialize: uniform probabilities, unit confidence, grid peak near truth") {
  const auto data = generate_scene(testing::single_object_scene(40, 0, 1.2, 0.25));
  const MeConfig cfg = quiet_config();
  const auto state = initialize(data.packet, 1, 1, cfg);
  REQUIRE(state.clusters() == 1);
  for (double v : state.probability.values()) CHECK(v == 1.0);
  for (double v : state.confidence.values()) CHECK(v == 1.0);

  // The grid oracle: the best grid point by exhaustive evaluation.
  ClusterObjective obj(data.packet, std::vector<double>(data.packet.size(), 1.0), state.t_ref, cfg);
  WarpParams best;
  double best_value = -1;
  for (const auto& g : init_grid(cfg)) {
    const double v = obj(g);
    if (v > best_value) best_value = v, best = g;
  }
  CHECK(state.thetas[0] == best);
  const double cell = 2 * cfg.grid_range / (cfg.grid_size - 1);
  CHECK(std::abs(state.thetas[0].vx - 40) <= cell);
  CHECK(std::abs(state.thetas[0].vy) <= cell);

  const auto three = initialize(data.packet, 3, 1, cfg);
  for (std::size_t k = 0; k < three.probability.rows(); ++k)
    for (double v : three.probability.row(k)) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("initialize: two objects give two peaks near their velocities") {
  const auto data = generate_scene(testing::two_object_scene());
  MeConfig cfg = quiet_config();
  cfg.grid_range = 50;
  const auto state = initialize(data.packet, 2, 1, cfg);
  std::vector<double> vx{state.thetas[0].vx, state.thetas[1].vx};
  std::sort(vx.begin(), vx.end());
  CHECK(std::abs(vx[0] + 30) <= 10);
  CHECK(std::abs(vx[1] - 30) <= 10);
}

TEST_CASE("initialize: errors and NotEnoughPeaks fill") {
  MeConfig cfg = quiet_config();
  CHECK_THROWS_AS(initialize(EventPacket({}, 10, 10), 1, 1, cfg), Error);
  const EventPacket one({{0.0, 5, 5, 1}, {0.5, 5, 5, 1}}, 20, 20);
  CHECK_THROWS_AS(initialize(one, 0, 1, cfg), Error);

  std::vector<MeLogRecord> warnings;
  cfg.grid_size = 3;
  cfg.on_log = [&](const MeLogRecord& r) {
    if (r.phase == "warning") warnings.push_back(r);
  };
  // More clusters than grid cells cannot all get a peak of their own.
  const auto state = initialize(one, 12, 4, cfg);
  CHECK(state.clusters() == 12);
  REQUIRE(!warnings.empty());
  CHECK(warnings[0].message.find("NotEnoughPeaks") != std::string::npos);
  const auto again = initialize(one, 12, 4, cfg);
  CHECK(again.thetas == state.thetas);
}

TEST_CASE("optimize_theta recovers the velocity of a single bar") {
  const auto data = generate_scene(testing::single_object_scene(40, 0, 1.2, 0.15));
  REQUIRE(data.packet.size() <= 2000);
  const MeConfig cfg = quiet_config();
  auto state = initialize(data.packet, 1, 1, cfg);
  state.thetas[0] = {35, 5};
  const auto r = optimize_theta(data.packet, state, 0, cfg);
  CHECK(std::abs(r.theta.vx - 40) <= 0.5);
  CHECK(std::abs(r.theta.vy) <= 0.5);
  for (std::size_t k = 1; k < r.accepted.size(); ++k) CHECK(r.accepted[k] >= r.accepted[k - 1]);

  // Restarting from the optimum cannot lose sharpness.
  state.thetas[0] = r.theta;
  const auto again = optimize_theta(data.packet, state, 0, cfg);
  CHECK(again.sharpness >= r.sharpness * (1 - 1e-6));
}

TEST_CASE("optimize_theta leaves a zero-weight cluster alone") {
  const auto data = generate_scene(testing::single_object_scene(40, 0, 1.2, 0.15));
  const MeConfig cfg = quiet_config();
  auto state = initialize(data.packet, 1, 1, cfg);
  std::fill(state.confidence.values().begin(), state.confidence.values().end(), 0.0);
  state.thetas[0] = {12, -3};
  const auto r = optimize_theta(data.packet, state, 0, cfg);
  CHECK(r.theta == WarpParams{12, -3});
  CHECK(r.sharpness == 0.0);
}

TEST_CASE("update_probabilities: symmetry and single-support limit") {
  const EventPacket p(testing::random_events(60, 30, 20, 0.5, 3), 30, 20, 0.0, 0.5);
  SegmentationState s;
  s.thetas = {{5, 2}, {5, 2}};
  s.probability = Matrix(p.size(), 2, 0.5);
  s.confidence = Matrix(p.size(), 2, 1.0);
  const auto sym = update_probabilities(p, s);
  for (double v : sym.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  // Cluster 2 carries no weight anywhere, so supported rows go to cluster 1.
  s.thetas = {{0, 0}, {0, 0}};
  for (std::size_t k = 0; k < p.size(); ++k) s.confidence(k, 1) = 0.0;
  const auto one = update_probabilities(p, s);
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(one(k, 0) == doctest::Approx(1.0));
    CHECK(one(k, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("update_probabilities matches the hand-rolled reassignment on 10 events") {
  const std::vector<Event> events{{0.00, 3, 4, 1},  {0.05, 4, 4, -1}, {0.10, 5, 5, 1},
                                  {0.12, 9, 2, 1},  {0.20, 6, 5, 1},  {0.25, 10, 3, -1},
                                  {0.31, 7, 6, 1},  {0.40, 11, 3, 1}, {0.45, 2, 9, -1},
                                  {0.50, 12, 4, 1}};
  const EventPacket p(events, 16, 12, 0.0, 0.5);
  SegmentationState s;
  s.thetas = {{8.3, 3.1}, {15.7, 2.2}};
  s.t_ref = 0.1;
  s.probability = Matrix(10, 2);
  s.confidence = Matrix(10, 2);
  for (std::size_t k = 0; k < 10; ++k) {
    s.probability(k, 0) = 0.1 + 0.08 * double(k);
    s.probability(k, 1) = 1.0 - s.probability(k, 0);
    s.confidence(k, 0) = 0.9 - 0.05 * double(k);
    s.confidence(k, 1) = 0.3 + 0.06 * double(k);
  }
  const auto got = update_probabilities(p, s);
  for (std::size_t k = 0; k < 10; ++k) {
    double sampled[2];
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> w(10);
      for (std::size_t i = 0; i < 10; ++i) w[i] = s.probability(i, j) * s.confidence(i, j);
      const double x = p[k].x - (p[k].t - s.t_ref) * s.thetas[j].vx;
      const double y = p[k].y - (p[k].t - s.t_ref) * s.thetas[j].vy;
      sampled[j] = oracle_sample(p, w, s.thetas[j], s.t_ref, x, y);
    }
    const double total = sampled[0] + sampled[1];
    for (std::size_t j = 0; j < 2; ++j) {
      const double expected = total < 1e-12 ? 0.5 : sampled[j] / total;
      CHECK(got(k, j) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(std::abs(got(k, 0) + got(k, 1) - 1.0) <= 1e-9);
  }
}

TEST_CASE("run_me separates two noiseless objects") {
  const auto data = generate_scene(testing::two_object_scene());
  const MeConfig cfg = quiet_config();
  auto state = initialize(data.packet, 2, 1, cfg);
  const double before = state.total_sharpness();
  state = run_me(data.packet, state, cfg);
  CHECK(state.total_sharpness() >= before);
  for (std::size_t k = 0; k < state.probability.rows(); ++k) {
    const auto row = state.probability.row(k);
    CHECK(std::abs(row[0] + row[1] - 1.0) <= 1e-9);
  }
  const auto labels = hard_labels(state, 0.0);
  const auto report = iou_report(labels, data.labels);
  for (const auto& [object, value] : report.per_object) {
    CAPTURE(object);
    CHECK(value >= 0.9);
  }

  // Fixed point: a second call gains less than the tolerance.
  const auto second = run_me(data.packet, state, cfg);
  const double gain = (second.total_sharpness() - state.total_sharpness()) / state.total_sharpness();
  CHECK(std::abs(gain) < 1e-2);
}

TEST_CASE("run_me with one cluster keeps the all-ones column") {
  const auto data = generate_scene(testing::single_object_scene(20, -10, 1.2, 0.15));
  const MeConfig cfg = quiet_config();
  const auto state = run_me(data.packet, initialize(data.packet, 1, 1, cfg), cfg);
  for (double v : state.probability.values()) CHECK(v == 1.0);
}

TEST_CASE("finite-difference gradient is consistent under step halving") {
  const auto data = generate_scene(testing::two_object_scene());
  const MeConfig cfg = quiet_config();
  ClusterObjective obj(data.packet, std::vector<double>(data.packet.size(), 1.0), data.packet.t0(), cfg);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-60, 60);
  const double h = 0.5;
  double coarse = 0, fine = 0;
  std::vector<double> rel;
  for (int i = 0; i < 20; ++i) {
    const WarpParams t{u(rng), u(rng)};
    const auto g1 = obj.gradient(t, h), g2 = obj.gradient(t, h / 2), g4 = obj.gradient(t, h / 4);
    const double d12 = std::hypot(g1.vx - g2.vx, g1.vy - g2.vy);
    coarse += d12;
    fine += std::hypot(g2.vx - g4.vx, g2.vy - g4.vy);
    rel.push_back(d12 / std::hypot(g2.vx, g2.vy));
  }
  std::sort(rel.begin(), rel.end());
  // Differences shrink at least linearly with h and stay small relative to |g|.
  CHECK(fine <= 0.75 * coarse);
  CHECK(rel[10] <= 0.15);
  CHECK(rel.back() <= 1.0);
}

TEST_CASE("ascent monotonicity over a full segmentation run") {
  const auto data = generate_scene(testing::two_object_scene());
  MeConfig cfg = quiet_config();
  int runs = 0;
  bool monotone = true;
  cfg.on_ascent = [&](const AscentResult& r) {
    ++runs;
    for (std::size_t k = 1; k < r.accepted.size(); ++k)
      if (r.accepted[k] < r.accepted[k - 1]) monotone = false;
  };
  run(data.packet, 2, cfg, EdConfig{}, LoopConfig{}, 1);
  CHECK(runs > 0);
  CHECK(monotone);
}

TEST_CASE("property: permuting clusters permutes thetas and probability columns") {
  const auto data = generate_scene(testing::two_object_scene());
  MeConfig cfg = quiet_config();
  cfg.em_alternations = 2;
  auto a = initialize(data.packet, 2, 1, cfg);
  auto b = a;
  std::swap(b.thetas[0], b.thetas[1]);
  const auto ra = run_me(data.packet, a, cfg);
  const auto rb = run_me(data.packet, b, cfg);
  CHECK(ra.thetas[0] == rb.thetas[1]);
  CHECK(ra.thetas[1] == rb.thetas[0]);
  for (std::size_t k = 0; k < ra.probability.rows(); ++k) {
    CHECK(ra.probability(k, 0) == doctest::Approx(rb.probability(k, 1)).epsilon(1e-12));
    CHECK(ra.probability(k, 1) == doctest::Approx(rb.probability(k, 0)).epsilon(1e-12));
  }
}
