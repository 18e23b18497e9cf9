#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "evseg/events.hpp"
#include "evseg/warp.hpp"

namespace evseg {

struct IoUCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// TP / (TP + FP + FN); 0 when all counts are zero.
double iou(const IoUCounts& counts);

struct IoUReport {
  std::map<int, double> per_object;       // ground-truth object id -> IoU in [0, 1]
  std::map<int, int> matching;            // object id -> predicted cluster, matched objects only
  std::map<int, IoUCounts> counts;        // per matched object
  double miou = 0.0;                      // mean of per_object, in [0, 1]
};

/// Optimal one-to-one matching of ground-truth objects to predicted clusters
/// maximising total IoU; unmatched objects score 0. NOISE predictions count
/// as false negatives of their object, NOISE ground truth inside a cluster as
/// false positives.
IoUReport iou_report(std::span<const int> predicted, std::span<const int> ground_truth);

/// Max-weight assignment by exhaustive search over injective matchings.
/// `score[i][j]` is object i against cluster j; returns cluster per object or -1.
std::vector<int> match_exhaustive(const std::vector<std::vector<double>>& score);

/// Same problem solved with the Hungarian algorithm.
std::vector<int> match_hungarian(const std::vector<std::vector<double>>& score);

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // x1 >= x0, y1 >= y0
  double area() const { return (x1 - x0) * (y1 - y0); }
};

double box_iou(const Box& a, const Box& b);

struct BoxSnapshot {
  std::optional<Box> predicted;  // missing prediction is a failure
  Box ground_truth;
};

/// Percentage of snapshots whose predicted box overlaps the ground truth with
/// box IoU >= 0.5.
double oss_rate(std::span<const BoxSnapshot> snapshots);

/// Bounding box of the events labelled `cluster` after warping them by theta.
std::optional<Box> cluster_bounding_box(const EventPacket& packet, std::span<const int> labels,
                                        int cluster, const WarpParams& theta, double t_ref);

struct RocPoint {
  double threshold = 0.0;
  std::optional<double> tpr;  // absent when there are no real events
  std::optional<double> fpr;  // absent when there are no noise events
};

/// Real events count as positives; an event is accepted when score >= threshold.
std::vector<RocPoint> denoise_roc(std::span<const double> scores, const std::vector<bool>& is_noise,
                                  std::span<const double> thresholds);

/// Area under the ROC curve: probability that a random real event scores
/// above a random noise event (ties count one half).
double roc_auc(std::span<const double> scores, const std::vector<bool>& is_noise);

}  // namespace evseg
