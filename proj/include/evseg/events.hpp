#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace evseg {

/// A single brightness-change record. Polarity is strictly -1 or +1.
struct Event {
  double t = 0.0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Time-sorted batch of events with its sensor geometry and time interval.
class EventPacket {
 public:
  EventPacket() = default;

  /// Validates geometry, polarity and interval; sorts stably by timestamp.
  /// When t0/t1 are omitted they are taken from the first/last event.
  EventPacket(std::vector<Event> events, int width, int height,
              std::optional<double> t0 = std::nullopt,
              std::optional<double> t1 = std::nullopt);

  std::span<const Event> events() const noexcept { return events_; }
  const Event& operator[](std::size_t k) const { return events_[k]; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double t0() const noexcept { return t0_; }
  double t1() const noexcept { return t1_; }
  double timespan() const noexcept { return t1_ - t0_; }

  friend bool operator==(const EventPacket&, const EventPacket&) = default;

 private:
  std::vector<Event> events_;
  int width_ = 0;
  int height_ = 0;
  double t0_ = 0.0;
  double t1_ = 0.0;
};

/// Ground-truth label for noise events in a label sidecar.
inline constexpr int kNoiseLabel = -1;

struct LabeledEvents {
  EventPacket packet;
  std::vector<int> labels;  // object id >= 1 or kNoiseLabel
};

enum class EventFormat { Csv, Binary };

struct Geometry {
  int width = 0;
  int height = 0;
};

/// Loads a packet. For CSV, geometry comes from a `# width=W height=H`
/// comment line or, failing that, from `geometry`.
EventPacket load_events(const std::filesystem::path& path, EventFormat format,
                        std::optional<Geometry> geometry = std::nullopt);

void save_events(const EventPacket& packet, const std::filesystem::path& path,
                 EventFormat format);

/// Events with a <= t < b; the result spans exactly [a, b).
EventPacket slice(const EventPacket& packet, double a, double b);

std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(std::span<const int> labels, const std::filesystem::path& path);

/// Picks the format from the extension: `.csv` is CSV, anything else binary.
EventFormat format_from_path(const std::filesystem::path& path);

/// Sorts events by time and permutes labels alongside.
LabeledEvents sort_labeled(std::vector<Event> events, std::vector<int> labels, int width,
                           int height, double t0, double t1);

}  // namespace evseg
