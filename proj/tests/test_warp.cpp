#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "evseg/error.hpp"
#include "evseg/warp.hpp"
#include "test_support.hpp"

using namespace evseg;

TEST_CASE("warp_event examples") {
  const Event e{0.5, 10, 10, 1};
  const Point2 id = warp_event(e, {0, 0}, 3.0);
  CHECK(id.x == 10.0);
  CHECK(id.y == 10.0);
  const Point2 w = warp_event(e, {20, 0}, 0.0);
  CHECK(w.x == 0.0);
  CHECK(w.y == 10.0);

  // Inverse: warping the result from t_ref back to the event time.
  const WarpParams theta{37.25, -12.5};
  const Point2 fwd = warp_event(e, theta, 0.1);
  const double bx = fwd.x - (0.1 - e.t) * theta.vx;
  const double by = fwd.y - (0.1 - e.t) * theta.vy;
  CHECK(bx == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(by == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("wiwe single event, integer and half-pixel") {
  const EventPacket p({{0.0, 4, 3, 1}}, 10, 8, 0.0, 1.0);
  const std::vector<double> one{1.0};
  const auto img = accumulate_wiwe(p, one, one, {0, 0}, 0.0);
  CHECK(img.at(4, 3) == 1.0);
  CHECK(img.sum() == 1.0);

  const EventPacket q({{0.5, 2, 3, 1}}, 10, 8, 0.0, 1.0);
  const auto split = accumulate_wiwe(q, one, one, {-1.0, 0.0}, 0.0);
  CHECK(split.at(2, 3) == doctest::Approx(0.5));
  CHECK(split.at(3, 3) == doctest::Approx(0.5));
  CHECK(split.sum() == doctest::Approx(1.0));
}

TEST_CASE("wiwe length mismatch") {
  const EventPacket p({{0.0, 4, 3, 1}, {0.1, 1, 1, 1}}, 10, 8);
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(accumulate_wiwe(p, one, one, {0, 0}, 0.0), Error);
}

TEST_CASE("wiwe mass conservation on 1000 interior events") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> xs(20, 79), ys(20, 59);
  std::uniform_real_distribution<double> ts(0.0, 0.2), u(0.0, 1.0);
  std::vector<Event> events(1000);
  for (auto& e : events) e = {ts(rng), std::uint16_t(xs(rng)), std::uint16_t(ys(rng)), 1};
  const EventPacket p(events, 100, 80, 0.0, 0.2);
  std::vector<double> pr(p.size()), c(p.size());
  double expected = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    pr[k] = u(rng);
    c[k] = u(rng);
    expected += pr[k] * c[k];
  }
  // |v| * 0.2 s = at most 10 px, so every warped event stays inside.
  const auto img = accumulate_wiwe(p, pr, c, {33.3, -41.7}, 0.0);
  CHECK(std::abs(img.sum() - expected) <= 1e-9 * expected);
  for (double v : img.values()) CHECK(v >= 0.0);
}

TEST_CASE("off-sensor events are dropped") {
  const EventPacket p({{1.0, 0, 0, 1}}, 10, 8, 0.0, 1.0);
  const std::vector<double> one{1.0};
  CHECK(accumulate_wiwe(p, one, one, {100, 0}, 0.0).sum() == 0.0);
}

TEST_CASE("iec examples") {
  const EventPacket cancel({{0.1, 3, 3, 1}, {0.2, 3, 3, -1}}, 8, 8, 0.0, 0.5);
  const auto c = accumulate_iec(cancel, {0, 0}, 0.0);
  CHECK(c.at(3, 3) == 0.0);

  const EventPacket one({{0.1, 3, 3, 1}}, 8, 8, 0.0, 0.5);
  CHECK(accumulate_iec(one, {0, 0}, 0.0).at(3, 3) == doctest::Approx(2.0));

  const EventPacket flat({{0.1, 3, 3, 1}}, 8, 8, 0.1, 0.1);
  CHECK_THROWS_AS(accumulate_iec(flat, {0, 0}, 0.0), Error);

  const EventPacket pos(testing::random_events(300, 30, 20, 1.0, 8), 30, 20, 0.0, 1.0);
  std::vector<Event> all_pos(pos.events().begin(), pos.events().end());
  for (auto& e : all_pos) e.polarity = 1;
  const auto nonneg = accumulate_iec(EventPacket(all_pos, 30, 20, 0.0, 1.0), {5, -3}, 0.0);
  for (double v : nonneg.values()) CHECK(v >= 0.0);
}

TEST_CASE("iec concentrates under the true velocity") {
  // A vertical edge at x = 5 moving at 20 px/s; two events per crossed pixel.
  std::vector<Event> events;
  const double v = 20.0;
  for (int col = 5; col < 15; ++col) {
    const double t = (col - 5) / v;
    for (int y = 2; y < 12; ++y) {
      events.push_back({t, std::uint16_t(col), std::uint16_t(y), 1});
      events.push_back({t + 0.001, std::uint16_t(col), std::uint16_t(y), 1});
    }
  }
  const EventPacket p(events, 30, 16, 0.0, 0.5);
  const auto sharp = accumulate_iec(p, {v, 0}, 0.0);
  const auto blurred = accumulate_iec(p, {0, 0}, 0.0);
  const auto mx = [](const ScalarImage& img) {
    double m = 0;
    for (double x : img.values()) m = std::max(m, std::abs(x));
    return m;
  };
  CHECK(mx(sharp) > mx(blurred));
}

TEST_CASE("sample_bilinear contracts") {
  ScalarImage img(6, 5);
  img.at(2, 3) = 7.0;
  CHECK(sample_bilinear(img, 2.0, 3.0) == 7.0);
  CHECK(sample_bilinear(img, -5.0, -5.0) == 0.0);
  CHECK(sample_bilinear(img, 5.5, 1.0) == 0.0);

  // Splat then sample gives sum of squared bilinear weights times w.
  const double x = 1.3, y = 2.6, w = 2.5;
  ScalarImage z(6, 5);
  splat_bilinear(z, x, y, w);
  const double fx = x - 1.0, fy = y - 2.0;
  const double expected =
      w * ((1 - fx) * (1 - fx) * (1 - fy) * (1 - fy) + fx * fx * (1 - fy) * (1 - fy) +
           (1 - fx) * (1 - fx) * fy * fy + fx * fx * fy * fy);
  CHECK(sample_bilinear(z, x, y) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("property: identity warp equals a plain histogram") {
  const EventPacket p(testing::random_events(500, 25, 15, 1.0, 4), 25, 15, 0.0, 1.0);
  const std::vector<double> ones(p.size(), 1.0);
  const auto img = accumulate_wiwe(p, ones, ones, {0, 0}, 0.37);
  ScalarImage hist(25, 15);
  for (const auto& e : p.events()) hist.at(e.x, e.y) += 1.0;
  CHECK(std::equal(img.values().begin(), img.values().end(), hist.values().begin()));
}

TEST_CASE("property: wiwe is linear in packet concatenation") {
  const auto a = testing::random_events(200, 40, 30, 1.0, 5);
  const auto b = testing::random_events(150, 40, 30, 1.0, 6);
  std::vector<Event> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  const EventPacket pa(a, 40, 30, 0.0, 1.0), pb(b, 40, 30, 0.0, 1.0), pab(ab, 40, 30, 0.0, 1.0);
  const WarpParams th{4.5, -2.25};
  const std::vector<double> wa(pa.size(), 0.7), wb(pb.size(), 0.7), wab(pab.size(), 0.7);
  const std::vector<double> ones_a(pa.size(), 1.0), ones_b(pb.size(), 1.0), ones_ab(pab.size(), 1.0);
  const auto ia = accumulate_wiwe(pa, wa, ones_a, th, 0.0);
  const auto ib = accumulate_wiwe(pb, wb, ones_b, th, 0.0);
  const auto iab = accumulate_wiwe(pab, wab, ones_ab, th, 0.0);
  for (std::size_t k = 0; k < iab.size(); ++k)
    CHECK(iab.values()[k] == doctest::Approx(ia.values()[k] + ib.values()[k]).epsilon(1e-12));
}

TEST_CASE("property: shifting t_ref translates the image") {
  const EventPacket p(testing::random_events(300, 60, 40, 1.0, 9), 60, 40, 0.0, 1.0);
  const std::vector<double> ones(p.size(), 1.0);
  // v * dt = (2, -1) pixels exactly, so the image shifts by whole pixels.
  const WarpParams th{8.0, -4.0};
  const auto base = accumulate_wiwe(p, ones, ones, th, 0.5);
  const auto shifted = accumulate_wiwe(p, ones, ones, th, 0.75);
  for (int y = 2; y < 37; ++y)
    for (int x = 3; x < 55; ++x)
      CHECK(shifted.at(x + 2, y - 1) == doctest::Approx(base.at(x, y)).epsilon(1e-12));
}

TEST_CASE("fused accumulation matches the separate builds") {
  const EventPacket p(testing::random_events(400, 50, 40, 0.5, 10), 50, 40, 0.0, 0.5);
  std::vector<double> pr(p.size(), 0.3), c(p.size(), 0.5), w(p.size(), 0.15);
  ScalarImage wi(50, 40), ie(50, 40);
  accumulate_wiwe_iec(p, w, {12, 7}, 0.1, wi, ie);
  const auto wi2 = accumulate_wiwe(p, pr, c, {12, 7}, 0.1);
  const auto ie2 = accumulate_iec(p, {12, 7}, 0.1);
  for (std::size_t k = 0; k < wi.size(); ++k) {
    CHECK(wi.values()[k] == doctest::Approx(wi2.values()[k]).epsilon(1e-12));
    CHECK(ie.values()[k] == doctest::Approx(ie2.values()[k]).epsilon(1e-12));
  }
}

TEST_CASE("pgm export writes header and mapping comment") {
  testing::TempDir dir("warp");
  ScalarImage img(3, 2);
  img.at(0, 0) = -1.0;
  img.at(2, 1) = 3.0;
  write_pgm16(img, dir / "a.pgm");
  std::ifstream in(dir / "a.pgm", std::ios::binary);
  std::string magic, comment;
  std::getline(in, magic);
  std::getline(in, comment);
  CHECK(magic == "P5");
  CHECK(comment.rfind("# value = ", 0) == 0);
  CHECK(std::filesystem::file_size(dir / "a.pgm") > 12);
}
