#include <doctest.h>

#include <cmath>
#include <random>

#include "evseg/error.hpp"
#include "evseg/sharpness.hpp"

using namespace evseg;

namespace {

ScalarImage random_image(int w, int h, std::uint64_t seed, double sparsity = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarImage img(w, h);
  for (double& v : img.values()) v = u(rng) < sparsity ? 0.0 : u(rng) * 4.0 - 1.0;
  return img;
}

// Two-pass variance over the zero-padded window, straight from the definition.
double brute_variance(const ScalarImage& img, int x, int y, int window) {
  const int r = window / 2;
  std::vector<double> vals;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int xx = x + dx, yy = y + dy;
      const bool inside = xx >= 0 && yy >= 0 && xx < img.width() && yy < img.height();
      vals.push_back(inside ? img.at(xx, yy) : 0.0);
    }
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= double(window * window);
  double var = 0;
  for (double v : vals) var += (v - mean) * (v - mean);
  return var / double(window * window);
}

}  // namespace

TEST_CASE("local variance of a constant image is zero in the interior") {
  const ScalarImage img(9, 9, 3.0);
  const auto var = local_variance(img, 3);
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 8; ++x) CHECK(var.at(x, y) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("5x5 centre impulse variance") {
  ScalarImage img(5, 5);
  img.at(2, 2) = 1.0;
  double oracle = 0;
  for (int k = 0; k < 25; ++k) {
    const double v = k == 12 ? 1.0 : 0.0;
    oracle += (v - 1.0 / 25) * (v - 1.0 / 25);
  }
  oracle /= 25;
  CHECK(oracle == doctest::Approx(24.0 / 625.0).epsilon(1e-15));
  CHECK(local_variance(img, 5).at(2, 2) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("local variance matches the brute-force oracle with zero padding") {
  const auto img = random_image(17, 13, 21, 0.3);
  for (int w : {3, 5, 7}) {
    const auto var = local_variance(img, w);
    for (int y = 0; y < 13; ++y)
      for (int x = 0; x < 17; ++x) {
        CHECK(var.at(x, y) == doctest::Approx(brute_variance(img, x, y, w)).epsilon(1e-10).scale(1e-12));
        CHECK(var.at(x, y) >= 0.0);
      }
  }
}

TEST_CASE("variance homogeneity") {
  const auto img = random_image(12, 10, 4);
  ScalarImage scaled = img;
  for (double& v : scaled.values()) v *= 3.0;
  const auto a = local_variance(img, 5), b = local_variance(scaled, 5);
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK(b.values()[k] == doctest::Approx(9.0 * a.values()[k]).epsilon(1e-10).scale(1e-12));
}

TEST_CASE("bad windows") {
  const ScalarImage img(8, 6);
  for (int w : {4, 1, 7, 0}) {
    try {
      local_variance(img, w);
      FAIL("expected BadWindow");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadWindow);
    }
  }
}

TEST_CASE("weighted mean examples") {
  ScalarImage var(2, 1), iec(2, 1);
  var.at(0, 0) = 1.0;
  var.at(1, 0) = 3.0;
  iec.at(0, 0) = -1.0;
  iec.at(1, 0) = 3.0;
  CHECK(weighted_variance_mean(var, iec).value == 2.5);

  const ScalarImage zero(2, 1);
  const auto d = weighted_variance_mean(var, zero);
  CHECK(d.value == 0.0);
  CHECK(d.degenerate);

  CHECK_THROWS_AS(weighted_variance_mean(var, ScalarImage(1, 2)), Error);
}

TEST_CASE("uniform iec gives the plain mean of the variance image") {
  const auto img = random_image(15, 11, 7);
  const ScalarImage iec(15, 11, -0.4);
  const auto var = local_variance(img, 5);
  double mean = 0;
  for (double v : var.values()) mean += v;
  mean /= double(var.size());
  CHECK(sharpness(img, iec, 5).value == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("property: sharpness scale behaviour and bounds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto img = random_image(20, 16, seed, 0.5);
    const auto iec = random_image(20, 16, seed + 100, 0.6);
    const double s = sharpness(img, iec, 5).value;
    ScalarImage scaled = img;
    for (double& v : scaled.values()) v *= 2.5;
    CHECK(sharpness(scaled, iec, 5).value == doctest::Approx(6.25 * s).epsilon(1e-10));
    CHECK(s >= 0.0);
    const auto var = local_variance(img, 5);
    CHECK(s <= *std::max_element(var.values().begin(), var.values().end()) + 1e-12);
  }
}

TEST_CASE("workspace agrees with the reference sharpness") {
  SharpnessWorkspace ws(24, 18);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto img = random_image(24, 18, seed, 0.4);
    const auto iec = random_image(24, 18, seed + 50, 0.8);
    for (int w : {3, 5, 9}) {
      const auto ref = sharpness(img, iec, w);
      const auto fast = ws.evaluate(img, iec, w);
      CHECK(fast.value == doctest::Approx(ref.value).epsilon(1e-10));
      CHECK(fast.degenerate == ref.degenerate);
    }
  }
}

TEST_CASE("select_window") {
  const std::vector<int> only5{5};
  CHECK(select_window(random_image(12, 12, 1), only5) == 5);
  const std::vector<int> all{3, 5, 7, 9};
  CHECK(select_window(ScalarImage(20, 20, 0.0), all) == 3);

  ScalarImage impulses(30, 30);
  impulses.at(5, 5) = 1;
  impulses.at(20, 12) = 1;
  impulses.at(10, 24) = 1;
  int best = 0;
  double best_sum = -1;
  for (int w : all) {
    double s = 0;
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x) s += brute_variance(impulses, x, y, w);
    if (s > best_sum + 1e-12) {
      best_sum = s;
      best = w;
    }
  }
  CHECK(select_window(impulses, all) == best);
}

TEST_CASE("alternative costs") {
  const auto flat = alternative_costs(ScalarImage(10, 8, 2.0));
  CHECK(flat.variance == doctest::Approx(0.0));
  CHECK(flat.grad_magnitude == 0.0);
  CHECK(flat.hessian_magnitude == 0.0);

  ScalarImage ramp(10, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) ramp.at(x, y) = 0.5 * x + 0.25 * y;
  const auto r = alternative_costs(ramp);
  CHECK(r.variance > 0.0);
  CHECK(r.grad_magnitude == doctest::Approx(0.25 + 0.0625));
  CHECK(r.hessian_magnitude == doctest::Approx(0.0).scale(1.0));

  const auto img = random_image(9, 7, 33);
  double mean = 0;
  for (double v : img.values()) mean += v;
  mean /= double(img.size());
  double var = 0;
  for (double v : img.values()) var += (v - mean) * (v - mean);
  var /= double(img.size());
  double g = 0, h = 0;
  int n = 0;
  for (int y = 1; y < 6; ++y)
    for (int x = 1; x < 8; ++x) {
      const double gx = (img.at(x + 1, y) - img.at(x - 1, y)) / 2;
      const double gy = (img.at(x, y + 1) - img.at(x, y - 1)) / 2;
      const double hxx = img.at(x + 1, y) - 2 * img.at(x, y) + img.at(x - 1, y);
      const double hyy = img.at(x, y + 1) - 2 * img.at(x, y) + img.at(x, y - 1);
      const double hxy = (img.at(x + 1, y + 1) - img.at(x + 1, y - 1) - img.at(x - 1, y + 1) +
                          img.at(x - 1, y - 1)) / 4;
      g += gx * gx + gy * gy;
      h += hxx * hxx + hyy * hyy + 2 * hxy * hxy;
      ++n;
    }
  const auto c = alternative_costs(img);
  CHECK(std::abs(c.variance - var) <= 1e-12);
  CHECK(std::abs(c.grad_magnitude - g / n) <= 1e-12);
  CHECK(std::abs(c.hessian_magnitude - h / n) <= 1e-12);
}
