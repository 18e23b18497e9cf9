#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "evseg/error.hpp"
#include "evseg/metrics.hpp"

using namespace evseg;

namespace {

// Scores every injective assignment explicitly via permutations of padded columns.
double best_total_by_permutation(const std::vector<std::vector<double>>& score) {
  const std::size_t rows = score.size(), cols = score.empty() ? 0 : score[0].size();
  std::vector<int> perm(std::max(rows, cols));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0;
  do {
    double total = 0;
    for (std::size_t i = 0; i < rows; ++i)
      if (std::size_t(perm[i]) < cols) total += score[i][std::size_t(perm[i])];
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double total_of(const std::vector<std::vector<double>>& score, const std::vector<int>& match) {
  double t = 0;
  for (std::size_t i = 0; i < match.size(); ++i)
    if (match[i] >= 0) t += score[i][std::size_t(match[i])];
  return t;
}

std::vector<int> random_labels(std::size_t n, int clusters, double noise, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> c(1, clusters);
  std::bernoulli_distribution is_noise(noise);
  std::vector<int> out(n);
  for (auto& l : out) l = is_noise(rng) ? kNoiseLabel : c(rng);
  return out;
}

}  // namespace

TEST_CASE("iou arithmetic") {
  CHECK(iou({90, 5, 5}) == doctest::Approx(0.9));
  CHECK(iou({0, 0, 0}) == 0.0);
}

TEST_CASE("perfect prediction scores one") {
  const std::vector<int> gt{1, 1, 2, 3, kNoiseLabel, 2};
  const auto r = iou_report(gt, gt);
  CHECK(r.miou == 1.0);
  for (const auto& [o, v] : r.per_object) CHECK(v == 1.0);
  CHECK_THROWS_AS(iou_report(std::vector<int>{1}, gt), Error);
}

TEST_CASE("noise accounting") {
  // Object 1 has 4 events, one predicted NOISE; one NOISE event lands in cluster 1.
  const std::vector<int> gt{1, 1, 1, 1, kNoiseLabel};
  const std::vector<int> pred{1, 1, 1, kNoiseLabel, 1};
  const auto r = iou_report(pred, gt);
  CHECK(r.counts.at(1).tp == 3);
  CHECK(r.counts.at(1).fp == 1);
  CHECK(r.counts.at(1).fn == 1);
  CHECK(r.per_object.at(1) == doctest::Approx(0.6));
}

TEST_CASE("matching equals the 3! enumeration") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = random_labels(120, 3, 0.1, rng);
    auto pred = gt;
    for (auto& l : pred)
      if (std::bernoulli_distribution(0.3)(rng)) l = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> perm{1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& l : pred)
      if (l != kNoiseLabel) l = perm[std::size_t(l - 1)];

    double best = -1;
    std::vector<int> p{1, 2, 3};
    do {
      double m = 0;
      for (int o = 1; o <= 3; ++o) {
        IoUCounts c;
        for (std::size_t k = 0; k < gt.size(); ++k) {
          const bool in_obj = gt[k] == o, in_cl = pred[k] == p[std::size_t(o - 1)];
          c.tp += in_obj && in_cl;
          c.fp += !in_obj && in_cl;
          c.fn += in_obj && !in_cl;
        }
        m += iou(c) / 3.0;
      }
      best = std::max(best, m);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(iou_report(pred, gt).miou == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("hungarian agrees with exhaustive matching") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + trial % 4, cols = 1 + (trial / 4) % 5;
    std::vector<std::vector<double>> score(rows, std::vector<double>(cols));
    for (auto& r : score)
      for (auto& v : r) v = u(rng) < 0.2 ? 0.0 : u(rng);
    const auto ex = match_exhaustive(score), hu = match_hungarian(score);
    const double oracle = best_total_by_permutation(score);
    CHECK(total_of(score, ex) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(total_of(score, hu) == doctest::Approx(oracle).epsilon(1e-12));
    std::vector<int> used;
    for (int c : hu)
      if (c >= 0) used.push_back(c);
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
  }
}

TEST_CASE("large instances take the assignment path") {
  std::mt19937_64 rng(2);
  const auto gt = random_labels(2000, 8, 0.05, rng);
  auto pred = gt;
  for (auto& l : pred)
    if (l != kNoiseLabel) l = 9 - l;
  CHECK(iou_report(pred, gt).miou == doctest::Approx(1.0));
}

TEST_CASE("property: relabeling predicted clusters leaves MIoU unchanged") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = random_labels(300, 4, 0.1, rng);
    const auto pred = random_labels(300, 4, 0.1, rng);
    std::vector<int> perm{1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    auto relabeled = pred;
    for (auto& l : relabeled)
      if (l != kNoiseLabel) l = perm[std::size_t(l - 1)];
    const auto a = iou_report(pred, gt), b = iou_report(relabeled, gt);
    CHECK(a.miou == doctest::Approx(b.miou).epsilon(1e-12));
    for (const auto& [o, v] : a.per_object) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("box overlap and OSS rate") {
  const Box a{0, 0, 10, 10};
  CHECK(box_iou(a, a) == 1.0);
  CHECK(box_iou(a, {20, 20, 30, 30}) == 0.0);
  CHECK(box_iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));

  const std::vector<BoxSnapshot> same{{a, a}};
  CHECK(oss_rate(same) == 100.0);
  const std::vector<BoxSnapshot> mixed{{a, a}, {Box{5, 0, 15, 10}, a}, {std::nullopt, a}, {Box{20, 20, 30, 30}, a}};
  CHECK(oss_rate(mixed) == 25.0);
}

TEST_CASE("cluster bounding box after warping") {
  const EventPacket p({{0.0, 2, 3, 1}, {0.25, 30, 30, -1}, {0.5, 12, 8, 1}}, 40, 40, 0.0, 0.5);
  const std::vector<int> labels{1, 2, 1};
  const auto box = cluster_bounding_box(p, labels, 1, {20, 10}, 0.0);
  REQUIRE(box.has_value());
  CHECK(box->x0 == 2.0);
  CHECK(box->x1 == 2.0);
  CHECK(box->y0 == 3.0);
  CHECK(box->y1 == 3.0);
  CHECK(!cluster_bounding_box(p, labels, 3, {0, 0}, 0.0).has_value());
}

TEST_CASE("roc points and auc") {
  const std::vector<double> scores{0.9, 0.8, 0.7, 0.2, 0.1};
  const std::vector<bool> noise{false, false, false, true, true};
  const std::vector<double> thresholds{0.0, 0.5, 1.5};
  const auto roc = denoise_roc(scores, noise, thresholds);
  CHECK(roc[0].tpr == 1.0);
  CHECK(roc[0].fpr == 1.0);
  CHECK(roc[1].tpr == 1.0);
  CHECK(roc[1].fpr == 0.0);
  CHECK(roc[2].tpr == 0.0);
  CHECK(roc[2].fpr == 0.0);
  CHECK(roc_auc(scores, noise) == 1.0);

  const std::vector<bool> all_real(5, false);
  const auto partial = denoise_roc(scores, all_real, thresholds);
  CHECK(!partial[0].fpr.has_value());
  CHECK(partial[0].tpr.has_value());
  CHECK_THROWS_AS(roc_auc(scores, all_real), Error);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(400);
  std::vector<bool> n(400);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = std::round(u(rng) * 20) / 20, n[k] = u(rng) < 0.3;
  std::vector<double> grid;
  for (int k = 0; k <= 22; ++k) grid.push_back(k / 20.0);
  const auto curve = denoise_roc(s, n, grid);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    CHECK(*curve[k].tpr <= *curve[k - 1].tpr);
    CHECK(*curve[k].fpr <= *curve[k - 1].fpr);
  }
  double pairs = 0, wins = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (!n[i] && n[j]) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  CHECK(roc_auc(s, n) == doctest::Approx(wins / pairs).epsilon(1e-12));
}
