#include "evseg/warp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "evseg/error.hpp"

namespace evseg {

double ScalarImage::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

void splat_bilinear(ScalarImage& img, double x, double y, double weight) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int w = img.width();
  const int h = img.height();
  if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= w || fy0 >= h) return;
  const int x0 = int(fx0);
  const int y0 = int(fy0);
  const double ax = x - fx0;
  const double ay = y - fy0;
  const double w00 = (1.0 - ax) * (1.0 - ay) * weight;
  const double w10 = ax * (1.0 - ay) * weight;
  const double w01 = (1.0 - ax) * ay * weight;
  const double w11 = ax * ay * weight;
  const bool x0_in = x0 >= 0;
  const bool x1_in = x0 + 1 < w;
  const bool y0_in = y0 >= 0;
  const bool y1_in = y0 + 1 < h;
  if (y0_in) {
    if (x0_in) img.at(x0, y0) += w00;
    if (x1_in) img.at(x0 + 1, y0) += w10;
  }
  if (y1_in) {
    if (x0_in) img.at(x0, y0 + 1) += w01;
    if (x1_in) img.at(x0 + 1, y0 + 1) += w11;
  }
}

double sample_bilinear(const ScalarImage& img, double x, double y) {
  const int w = img.width();
  const int h = img.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return 0.0;
  const int x0 = std::min(int(x), w - 1);
  const int y0 = std::min(int(y), h - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  return (1.0 - ax) * (1.0 - ay) * img.at(x0, y0) + ax * (1.0 - ay) * img.at(x1, y0) +
         (1.0 - ax) * ay * img.at(x0, y1) + ax * ay * img.at(x1, y1);
}

ScalarImage accumulate_wiwe(const EventPacket& packet, std::span<const double> probability,
                            std::span<const double> confidence, const WarpParams& theta,
                            double t_ref) {
  if (probability.size() != packet.size() || confidence.size() != packet.size()) {
    throw Error(ErrorCode::LengthMismatch, "weight columns must match the event count");
  }
  ScalarImage img(packet.width(), packet.height());
  const auto events = packet.events();
  for (std::size_t k = 0; k < events.size(); ++k) {
    const double weight = probability[k] * confidence[k];
    if (weight == 0.0) continue;
    const Point2 p = warp_event(events[k], theta, t_ref);
    splat_bilinear(img, p.x, p.y, weight);
  }
  return img;
}

ScalarImage accumulate_iec(const EventPacket& packet, const WarpParams& theta, double t_ref) {
  if (!(packet.timespan() > 0.0)) {
    throw Error(ErrorCode::ZeroTimespan, "IEC needs t1 > t0");
  }
  ScalarImage img(packet.width(), packet.height());
  const double scale = 1.0 / packet.timespan();
  for (const auto& e : packet.events()) {
    const Point2 p = warp_event(e, theta, t_ref);
    splat_bilinear(img, p.x, p.y, e.polarity * scale);
  }
  return img;
}

void accumulate_wiwe_iec(const EventPacket& packet, std::span<const double> weights,
                         const WarpParams& theta, double t_ref, ScalarImage& wiwe,
                         ScalarImage& iec) {
  if (weights.size() != packet.size()) {
    throw Error(ErrorCode::LengthMismatch, "weight column must match the event count");
  }
  if (!(packet.timespan() > 0.0)) {
    throw Error(ErrorCode::ZeroTimespan, "IEC needs t1 > t0");
  }
  wiwe.fill(0.0);
  iec.fill(0.0);
  const double scale = 1.0 / packet.timespan();
  const auto events = packet.events();
  for (std::size_t k = 0; k < events.size(); ++k) {
    const Point2 p = warp_event(events[k], theta, t_ref);
    if (weights[k] != 0.0) splat_bilinear(wiwe, p.x, p.y, weights[k]);
    splat_bilinear(iec, p.x, p.y, events[k].polarity * scale);
  }
}

void write_pgm16(const ScalarImage& img, const std::filesystem::path& path) {
  const auto values = img.values();
  double lo = 0.0;
  double hi = 0.0;
  if (!values.empty()) {
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  char comment[160];
  std::snprintf(comment, sizeof comment, "# value = %.17g + pixel * %.17g\n", lo,
                scale > 0.0 ? 1.0 / scale : 0.0);
  out << "P5\n" << comment << img.width() << ' ' << img.height() << "\n65535\n";
  std::string row;
  row.reserve(std::size_t(img.width()) * 2);
  for (int y = 0; y < img.height(); ++y) {
    row.clear();
    for (int x = 0; x < img.width(); ++x) {
      const double mapped = std::clamp(std::round((img.at(x, y) - lo) * scale), 0.0, 65535.0);
      const auto v = static_cast<std::uint16_t>(mapped);
      row.push_back(char(v >> 8));  // PGM stores 16-bit samples big-endian
      row.push_back(char(v & 0xff));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace evseg
