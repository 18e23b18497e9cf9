#include "evseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "evseg/error.hpp"

namespace evseg {

double iou(const IoUCounts& c) {
  const std::size_t den = c.tp + c.fp + c.fn;
  return den == 0 ? 0.0 : double(c.tp) / double(den);
}

namespace {

void search(const std::vector<std::vector<double>>& score, std::size_t i, std::vector<bool>& used,
            std::vector<int>& current, double total, double& best_total, std::vector<int>& best) {
  if (i == score.size()) {
    if (total > best_total) {
      best_total = total;
      best = current;
    }
    return;
  }
  const std::size_t clusters = score.empty() ? 0 : score[0].size();
  for (std::size_t j = 0; j < clusters; ++j) {
    if (used[j]) continue;
    used[j] = true;
    current[i] = int(j);
    search(score, i + 1, used, current, total + score[i][j], best_total, best);
    used[j] = false;
  }
  current[i] = -1;
  search(score, i + 1, used, current, total, best_total, best);
}

}  // namespace

std::vector<int> match_exhaustive(const std::vector<std::vector<double>>& score) {
  const std::size_t clusters = score.empty() ? 0 : score[0].size();
  std::vector<bool> used(clusters, false);
  std::vector<int> current(score.size(), -1);
  std::vector<int> best(score.size(), -1);
  double best_total = -std::numeric_limits<double>::infinity();
  search(score, 0, used, current, 0.0, best_total, best);
  return best;
}

std::vector<int> match_hungarian(const std::vector<std::vector<double>>& score) {
  const std::size_t rows = score.size();
  const std::size_t cols = rows == 0 ? 0 : score[0].size();
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  double max_score = 0.0;
  for (const auto& r : score)
    for (double v : r) max_score = std::max(max_score, v);
  // Square cost matrix, padded with zero-score dummies; minimise max - score.
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, max_score));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) cost[i + 1][j + 1] = max_score - score[i][j];

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols) match[p[j] - 1] = int(j - 1);
  }
  return match;
}

IoUReport iou_report(std::span<const int> predicted, std::span<const int> ground_truth) {
  if (predicted.size() != ground_truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "prediction and ground truth differ in length");
  }
  std::set<int> object_set;
  std::set<int> cluster_set;
  for (int g : ground_truth)
    if (g != kNoiseLabel) object_set.insert(g);
  for (int p : predicted)
    if (p != kNoiseLabel) cluster_set.insert(p);
  const std::vector<int> objects(object_set.begin(), object_set.end());
  const std::vector<int> clusters(cluster_set.begin(), cluster_set.end());

  std::map<int, std::size_t> object_index;
  std::map<int, std::size_t> cluster_index;
  for (std::size_t i = 0; i < objects.size(); ++i) object_index[objects[i]] = i;
  for (std::size_t j = 0; j < clusters.size(); ++j) cluster_index[clusters[j]] = j;

  // Contingency table plus marginals.
  std::vector<std::vector<std::size_t>> both(objects.size(), std::vector<std::size_t>(clusters.size(), 0));
  std::vector<std::size_t> object_total(objects.size(), 0);
  std::vector<std::size_t> cluster_total(clusters.size(), 0);
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const bool has_obj = ground_truth[k] != kNoiseLabel;
    const bool has_cl = predicted[k] != kNoiseLabel;
    if (has_obj) ++object_total[object_index[ground_truth[k]]];
    if (has_cl) ++cluster_total[cluster_index[predicted[k]]];
    if (has_obj && has_cl) ++both[object_index[ground_truth[k]]][cluster_index[predicted[k]]];
  }
  const auto counts_for = [&](std::size_t i, std::size_t j) {
    IoUCounts c;
    c.tp = both[i][j];
    c.fp = cluster_total[j] - c.tp;
    c.fn = object_total[i] - c.tp;
    return c;
  };
  std::vector<std::vector<double>> score(objects.size(), std::vector<double>(clusters.size(), 0.0));
  for (std::size_t i = 0; i < objects.size(); ++i)
    for (std::size_t j = 0; j < clusters.size(); ++j) score[i][j] = iou(counts_for(i, j));

  const auto match = clusters.size() <= 6 ? match_exhaustive(score) : match_hungarian(score);

  IoUReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    double value = 0.0;
    if (match[i] >= 0) {
      const auto j = std::size_t(match[i]);
      value = score[i][j];
      report.matching[objects[i]] = clusters[j];
      report.counts[objects[i]] = counts_for(i, j);
    }
    report.per_object[objects[i]] = value;
    sum += value;
  }
  report.miou = objects.empty() ? 0.0 : sum / double(objects.size());
  return report;
}

double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double oss_rate(std::span<const BoxSnapshot> snapshots) {
  if (snapshots.empty()) return 0.0;
  std::size_t success = 0;
  for (const auto& s : snapshots)
    if (s.predicted && box_iou(*s.predicted, s.ground_truth) >= 0.5) ++success;
  return 100.0 * double(success) / double(snapshots.size());
}

std::optional<Box> cluster_bounding_box(const EventPacket& packet, std::span<const int> labels,
                                        int cluster, const WarpParams& theta, double t_ref) {
  if (labels.size() != packet.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels and events differ in length");
  }
  std::optional<Box> box;
  const auto events = packet.events();
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (labels[k] != cluster) continue;
    const Point2 p = warp_event(events[k], theta, t_ref);
    if (!box) {
      box = Box{p.x, p.y, p.x, p.y};
    } else {
      box->x0 = std::min(box->x0, p.x);
      box->y0 = std::min(box->y0, p.y);
      box->x1 = std::max(box->x1, p.x);
      box->y1 = std::max(box->y1, p.y);
    }
  }
  return box;
}

std::vector<RocPoint> denoise_roc(std::span<const double> scores, const std::vector<bool>& is_noise,
                                  std::span<const double> thresholds) {
  if (scores.size() != is_noise.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and noise mask differ in length");
  }
  std::vector<double> real_scores;
  std::vector<double> noise_scores;
  for (std::size_t k = 0; k < scores.size(); ++k)
    (is_noise[k] ? noise_scores : real_scores).push_back(scores[k]);
  std::sort(real_scores.begin(), real_scores.end());
  std::sort(noise_scores.begin(), noise_scores.end());
  const auto fraction_at_least = [](const std::vector<double>& sorted, double tau) -> std::optional<double> {
    if (sorted.empty()) return std::nullopt;
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), tau);
    return double(sorted.end() - it) / double(sorted.size());
  };
  std::vector<double> taus(thresholds.begin(), thresholds.end());
  std::sort(taus.begin(), taus.end());
  std::vector<RocPoint> points;
  for (double tau : taus)
    points.push_back({tau, fraction_at_least(real_scores, tau), fraction_at_least(noise_scores, tau)});
  return points;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& is_noise) {
  if (scores.size() != is_noise.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and noise mask differ in length");
  }
  std::vector<std::pair<double, bool>> items;
  items.reserve(scores.size());
  std::size_t noise = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    items.emplace_back(scores[k], is_noise[k]);
    noise += is_noise[k];
  }
  const std::size_t real = scores.size() - noise;
  if (noise == 0 || real == 0) throw Error(ErrorCode::DivisionUndefined, "AUC needs both classes");
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Mann-Whitney U with midranks.
  double rank_sum_real = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) ++j;
    const double midrank = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (!items[k].second) rank_sum_real += midrank;
    i = j;
  }
  const double u = rank_sum_real - double(real) * double(real + 1) / 2.0;
  return u / (double(real) * double(noise));
}

}  // namespace evseg
