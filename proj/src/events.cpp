#include "evseg/events.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "evseg/error.hpp"

namespace evseg {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'V', 'S', '1'};
constexpr std::size_t kHeaderBytes = 16;
constexpr std::size_t kRecordBytes = 13;

static_assert(std::endian::native == std::endian::little,
              "binary event I/O assumes a little-endian host");

void validate(const Event& e, int width, int height, std::size_t index) {
  if (e.polarity != 1 && e.polarity != -1) {
    throw Error(ErrorCode::MalformedRecord,
                "event " + std::to_string(index) + " has polarity " +
                    std::to_string(int(e.polarity)));
  }
  if (e.x >= width || e.y >= height) {
    throw Error(ErrorCode::OutOfBounds, "event " + std::to_string(index) + " at (" +
                                            std::to_string(e.x) + "," + std::to_string(e.y) +
                                            ") outside " + std::to_string(width) + "x" +
                                            std::to_string(height));
  }
  if (!std::isfinite(e.t) || e.t < 0.0) {
    throw Error(ErrorCode::MalformedRecord,
                "event " + std::to_string(index) + " has invalid timestamp");
  }
}

template <typename T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Parses "# width=W height=H" style comments; unknown keys are ignored.
void parse_comment(std::string_view line, std::optional<int>& width, std::optional<int>& height) {
  std::istringstream in{std::string(line.substr(1))};
  std::string token;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    auto key = token.substr(0, eq);
    int value = 0;
    auto val = token.substr(eq + 1);
    if (std::from_chars(val.data(), val.data() + val.size(), value).ec != std::errc{}) continue;
    if (key == "width") width = value;
    if (key == "height") height = value;
  }
}

template <typename T>
bool parse_field(std::string_view field, T& out) {
  field = trim(field);
  if (field.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available in libstdc++ 11
    auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    return res.ec == std::errc{} && res.ptr == field.data() + field.size();
  } else {
    if (field.front() == '+') field.remove_prefix(1);
    auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    return res.ec == std::errc{} && res.ptr == field.data() + field.size();
  }
}

EventPacket load_csv(const std::filesystem::path& path, std::optional<Geometry> geometry) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

  std::optional<int> width, height;
  if (geometry) {
    width = geometry->width;
    height = geometry->height;
  }
  struct Raw {
    double t;
    long x, y, p;
    std::size_t line;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t line_no = 0;
  bool any_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    any_content = true;
    if (view.front() == '#') {
      // An explicit geometry argument wins over the file comment.
      if (!geometry) parse_comment(view, width, height);
      continue;
    }
    if (view == "t,x,y,p") continue;
    std::array<std::string_view, 4> fields;
    std::size_t n = 0;
    while (n < 4) {
      auto comma = view.find(',');
      fields[n++] = view.substr(0, comma);
      if (comma == std::string_view::npos) {
        view = {};
        break;
      }
      view.remove_prefix(comma + 1);
    }
    Raw r{0.0, 0, 0, 0, line_no};
    if (n != 4 || !view.empty() || !parse_field(fields[0], r.t) || !parse_field(fields[1], r.x) ||
        !parse_field(fields[2], r.y) || !parse_field(fields[3], r.p)) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(line_no));
    }
    raw.push_back(r);
  }
  if (!any_content) throw Error(ErrorCode::EmptyFile, path.string());
  if (!width || !height) {
    throw Error(ErrorCode::MalformedRecord,
                path.string() + ": sensor geometry missing (no '# width=W height=H' line)");
  }

  std::vector<Event> events;
  events.reserve(raw.size());
  for (const auto& r : raw) {
    const std::string where = path.string() + ":" + std::to_string(r.line);
    if (r.p != 1 && r.p != -1) throw Error(ErrorCode::MalformedRecord, where + ": polarity");
    if (!std::isfinite(r.t) || r.t < 0.0) throw Error(ErrorCode::MalformedRecord, where + ": time");
    if (r.x < 0 || r.y < 0 || r.x >= *width || r.y >= *height)
      throw Error(ErrorCode::OutOfBounds, where);
    events.push_back(Event{r.t, static_cast<std::uint16_t>(r.x), static_cast<std::uint16_t>(r.y),
                           static_cast<std::int8_t>(r.p)});
  }
  return EventPacket(std::move(events), *width, *height);
}

EventPacket load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.empty()) throw Error(ErrorCode::EmptyFile, path.string());
  if (data.size() < kHeaderBytes || std::memcmp(data.data(), kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": bad header at byte 0");
  }
  const int width = get<std::uint16_t>(data.data() + 4);
  const int height = get<std::uint16_t>(data.data() + 6);
  const auto count = get<std::uint64_t>(data.data() + 8);
  if ((data.size() - kHeaderBytes) / kRecordBytes < count ||
      (data.size() - kHeaderBytes) != count * kRecordBytes) {
    throw Error(ErrorCode::MalformedRecord,
                path.string() + ": payload size does not match event count at byte " +
                    std::to_string(kHeaderBytes));
  }
  std::vector<Event> events(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::size_t offset = kHeaderBytes + k * kRecordBytes;
    const char* rec = data.data() + offset;
    Event e{get<double>(rec), get<std::uint16_t>(rec + 8), get<std::uint16_t>(rec + 10),
            get<std::int8_t>(rec + 12)};
    if (e.polarity != 1 && e.polarity != -1)
      throw Error(ErrorCode::MalformedRecord,
                  path.string() + ": polarity at byte " + std::to_string(offset + 12));
    if (!std::isfinite(e.t) || e.t < 0.0)
      throw Error(ErrorCode::MalformedRecord,
                  path.string() + ": time at byte " + std::to_string(offset));
    if (e.x >= width || e.y >= height)
      throw Error(ErrorCode::OutOfBounds, path.string() + ": record at byte " + std::to_string(offset));
    events[k] = e;
  }
  return EventPacket(std::move(events), width, height);
}

}  // namespace

EventPacket::EventPacket(std::vector<Event> events, int width, int height, std::optional<double> t0,
                         std::optional<double> t1)
    : events_(std::move(events)), width_(width), height_(height) {
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535) {
    throw Error(ErrorCode::InvalidArgument, "sensor geometry must be positive and fit in 16 bits");
  }
  for (std::size_t k = 0; k < events_.size(); ++k) validate(events_[k], width, height, k);
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  t0_ = t0.value_or(events_.empty() ? 0.0 : events_.front().t);
  t1_ = t1.value_or(events_.empty() ? t0_ : events_.back().t);
  if (t1_ < t0_) throw Error(ErrorCode::InvalidInterval, "t1 < t0");
  if (!events_.empty() && (events_.front().t < t0_ || events_.back().t > t1_)) {
    throw Error(ErrorCode::InvalidInterval, "events outside [t0, t1]");
  }
}

EventPacket load_events(const std::filesystem::path& path, EventFormat format,
                        std::optional<Geometry> geometry) {
  return format == EventFormat::Csv ? load_csv(path, geometry) : load_binary(path);
}

void save_events(const EventPacket& packet, const std::filesystem::path& path, EventFormat format) {
  std::string buf;
  if (format == EventFormat::Csv) {
    buf = "# width=" + std::to_string(packet.width()) + " height=" + std::to_string(packet.height()) +
          "\nt,x,y,p\n";
    char line[96];
    for (const auto& e : packet.events()) {
      int n = std::snprintf(line, sizeof line, "%.9f,%u,%u,%d\n", e.t, unsigned(e.x), unsigned(e.y),
                            int(e.polarity));
      buf.append(line, static_cast<std::size_t>(n));
    }
  } else {
    buf.reserve(kHeaderBytes + packet.size() * kRecordBytes);
    buf.append(kMagic.data(), kMagic.size());
    put(buf, static_cast<std::uint16_t>(packet.width()));
    put(buf, static_cast<std::uint16_t>(packet.height()));
    put(buf, static_cast<std::uint64_t>(packet.size()));
    for (const auto& e : packet.events()) {
      put(buf, e.t);
      put(buf, e.x);
      put(buf, e.y);
      put(buf, e.polarity);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

EventPacket slice(const EventPacket& packet, double a, double b) {
  if (!(a < b)) throw Error(ErrorCode::InvalidInterval, "slice requires a < b");
  auto events = packet.events();
  auto lo = std::lower_bound(events.begin(), events.end(), a,
                             [](const Event& e, double t) { return e.t < t; });
  auto hi = std::lower_bound(lo, events.end(), b, [](const Event& e, double t) { return e.t < t; });
  return EventPacket(std::vector<Event>(lo, hi), packet.width(), packet.height(), a, b);
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty()) continue;
    int label = 0;
    if (!parse_field(view, label) || (label != kNoiseLabel && label < 1)) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(line_no));
    }
    labels.push_back(label);
  }
  return labels;
}

void save_labels(std::span<const int> labels, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(labels.size() * 3);
  for (int label : labels) {
    buf += std::to_string(label);
    buf += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

EventFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EventFormat::Csv : EventFormat::Binary;
}

LabeledEvents sort_labeled(std::vector<Event> events, std::vector<int> labels, int width, int height,
                           double t0, double t1) {
  if (events.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels and events differ in length");
  }
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return events[a].t < events[b].t; });
  std::vector<Event> sorted_events(events.size());
  std::vector<int> sorted_labels(events.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_events[k] = events[order[k]];
    sorted_labels[k] = labels[order[k]];
  }
  return {EventPacket(std::move(sorted_events), width, height, t0, t1), std::move(sorted_labels)};
}

}  // namespace evseg
