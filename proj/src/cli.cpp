#include "evseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "evseg/config.hpp"
#include "evseg/denoise.hpp"
#include "evseg/error.hpp"
#include "evseg/events.hpp"
#include "evseg/metrics.hpp"
#include "evseg/progressive.hpp"
#include "evseg/synth.hpp"

namespace evseg {

namespace {

namespace fs = std::filesystem;

/// Options whose value may also come from the `--config` file. Flags given
/// on the command line win.
class ConfigBinder {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    CLI::Option* opt = app->add_option("--" + name, target, help)->capture_default_str();
    bindings_.push_back({opt, name, [&target, name](const std::string& value) {
                           if (!CLI::detail::lexical_cast(value, target))
                             throw Error(ErrorCode::SpecInvalid, "config key '" + name + "': bad value '" + value + "'");
                         }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
    CLI::Option* opt = app->add_flag("--" + name, target, help);
    bindings_.push_back({opt, name, [&target, name](const std::string& value) {
                           if (!CLI::detail::lexical_cast(value, target))
                             throw Error(ErrorCode::SpecInvalid, "config key '" + name + "': bad value '" + value + "'");
                         }});
    return opt;
  }

  void apply(const std::string& config_path) const {
    if (config_path.empty()) return;
    const KeyValueFile file = KeyValueFile::load(config_path);
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) continue;
      if (auto v = file.get(b.key)) b.assign(*v);
    }
  }

 private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::function<void(const std::string&)> assign;
  };
  std::vector<Binding> bindings_;
};

struct PipelineSettings {
  std::uint64_t seed = 1;
  int iterations = 7;
  int clusters = 3;
  std::string mapping = "tanh";
  int window = 5;
  bool window_search = false;
  double noise_threshold = 0.5;
  double grid_range = 100.0;
  int grid_size = 11;
  std::string objective = "sharpness";
  std::size_t batch = 20000;
};

void add_pipeline_options(CLI::App* app, ConfigBinder& binder, PipelineSettings& s) {
  binder.add(app, "seed", s.seed, "Random seed");
  binder.add(app, "iterations", s.iterations, "Progressive iterations (0 = motion estimation only)");
  binder.add(app, "clusters", s.clusters, "Number of motion clusters");
  binder.add(app, "mapping", s.mapping, "Confidence mapping: tanh, linear, exp, step");
  binder.add(app, "window", s.window, "Local variance window (odd)");
  binder.add_flag(app, "window-search", s.window_search, "Pick the window from {3,5,7,9}");
  binder.add(app, "noise-threshold", s.noise_threshold, "Events whose best confidence is below this are NOISE");
  binder.add(app, "grid-range", s.grid_range, "Initial velocity grid half-width, px/s");
  binder.add(app, "grid-size", s.grid_size, "Initial velocity grid points per axis");
  binder.add(app, "objective", s.objective, "sharpness, variance, gradient or hessian");
  binder.add(app, "batch", s.batch, "Events per segmentation batch (0 = whole packet)");
}

Objective parse_objective(const std::string& name) {
  for (auto o : {Objective::Sharpness, Objective::Variance, Objective::GradientMagnitude,
                 Objective::HessianMagnitude})
    if (name == to_string(o)) return o;
  throw Error(ErrorCode::InvalidArgument, "unknown objective '" + name + "'");
}

MeConfig me_config(const PipelineSettings& s) {
  MeConfig cfg;
  cfg.grid_range = s.grid_range;
  cfg.grid_size = s.grid_size;
  cfg.sharpness.window = s.window;
  cfg.sharpness.window_search = s.window_search;
  cfg.objective = parse_objective(s.objective);
  return cfg;
}

EdConfig ed_config(const PipelineSettings& s) {
  const auto mapping = parse_mapping(s.mapping);
  if (!mapping) throw Error(ErrorCode::InvalidArgument, "unknown mapping '" + s.mapping + "'");
  EdConfig cfg;
  cfg.mapping = *mapping;
  return cfg;
}

LoopConfig loop_config(const PipelineSettings& s) {
  LoopConfig cfg;
  cfg.iterations = s.iterations;
  cfg.noise_threshold = s.noise_threshold;
  return cfg;
}

void validate(const PipelineSettings& s) {
  if (s.clusters < 1) throw Error(ErrorCode::InvalidArgument, "--clusters must be at least 1");
  if (s.iterations < 0) throw Error(ErrorCode::InvalidArgument, "--iterations must be >= 0");
  if (s.window < 3 || s.window % 2 == 0) throw Error(ErrorCode::BadWindow, "--window must be odd and >= 3");
  if (!(s.noise_threshold >= 0.0 && s.noise_threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "--noise-threshold must lie in [0, 1]");
  ed_config(s);
  parse_objective(s.objective);
}

std::string settings_manifest(const PipelineSettings& s) {
  std::ostringstream out;
  out << "seed = " << s.seed << "\niterations = " << s.iterations << "\nclusters = " << s.clusters
      << "\nmapping = " << s.mapping << "\nwindow = " << s.window
      << "\nwindow-search = " << (s.window_search ? "true" : "false")
      << "\nnoise-threshold = " << s.noise_threshold << "\ngrid-range = " << s.grid_range
      << "\ngrid-size = " << s.grid_size << "\nobjective = " << s.objective << "\nbatch = " << s.batch << "\n";
  return out.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

EventFormat parse_format(const std::string& name) {
  if (name == "csv") return EventFormat::Csv;
  if (name == "binary") return EventFormat::Binary;
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + name + "'");
}

const char* extension(EventFormat f) { return f == EventFormat::Csv ? ".csv" : ".evs"; }

struct InputOptions {
  std::string path;
  int width = 0;
  int height = 0;
  std::optional<double> t0;
  std::optional<double> t1;
};

void add_input_options(CLI::App* app, InputOptions& in) {
  app->add_option("events", in.path, "Event file (.csv or binary)")->required();
  app->add_option("--width", in.width, "Sensor width for CSV files without a geometry comment");
  app->add_option("--height", in.height, "Sensor height for CSV files without a geometry comment");
  app->add_option("--t0", in.t0, "Start of the time window, s");
  app->add_option("--t1", in.t1, "End of the time window, s");
}

EventPacket load_input(const InputOptions& in) {
  std::optional<Geometry> geometry;
  if (in.width > 0 && in.height > 0) geometry = Geometry{in.width, in.height};
  EventPacket packet = load_events(in.path, format_from_path(in.path), geometry);
  if (in.t0 || in.t1) packet = slice(packet, in.t0.value_or(packet.t0()), in.t1.value_or(packet.t1() + 1e-9));
  return packet;
}

// Segmentation over consecutive event batches with cluster indices kept
// consistent across batches.

struct BatchRun {
  EventPacket packet;
  SegmentationResult result;
};

struct Segmentation {
  std::vector<BatchRun> batches;
  std::vector<int> labels;
  bool degenerate = false;
};

std::vector<EventPacket> split_batches(const EventPacket& packet, std::size_t batch) {
  if (batch == 0 || packet.size() <= batch) return {packet};
  const auto events = packet.events();
  std::vector<EventPacket> out;
  for (std::size_t begin = 0; begin < events.size(); begin += batch) {
    const std::size_t end = std::min(begin + batch, events.size());
    const double t0 = begin == 0 ? packet.t0() : events[begin].t;
    const double t1 = end == events.size() ? packet.t1() : events[end].t;
    out.emplace_back(std::vector<Event>(events.begin() + long(begin), events.begin() + long(end)),
                     packet.width(), packet.height(), t0, t1);
  }
  return out;
}

void permute_clusters(SegmentationResult& r, const std::vector<int>& new_index) {
  const std::size_t n_l = new_index.size();
  SegmentationState& s = r.state;
  SegmentationState p = s;
  for (std::size_t j = 0; j < n_l; ++j) {
    const std::size_t to = std::size_t(new_index[j]);
    p.thetas[to] = s.thetas[j];
    p.sharpness_per_cluster[to] = s.sharpness_per_cluster[j];
    for (std::size_t k = 0; k < s.probability.rows(); ++k) {
      p.probability(k, to) = s.probability(k, j);
      p.confidence(k, to) = s.confidence(k, j);
    }
  }
  s = std::move(p);
  for (int& l : r.labels)
    if (l != kNoiseLabel) l = new_index[std::size_t(l - 1)] + 1;
}

void align_to(const SegmentationResult& previous, SegmentationResult& current) {
  const std::size_t n_l = current.state.clusters();
  std::vector<std::vector<double>> score(n_l, std::vector<double>(n_l));
  for (std::size_t j = 0; j < n_l; ++j)
    for (std::size_t i = 0; i < n_l; ++i) {
      const auto a = current.state.thetas[j], b = previous.state.thetas[i];
      score[j][i] = 1.0 / (1.0 + std::hypot(a.vx - b.vx, a.vy - b.vy));
    }
  permute_clusters(current, match_hungarian(score));
}

Segmentation segment(const EventPacket& packet, const PipelineSettings& s) {
  Segmentation out;
  const MeConfig me = me_config(s);
  const EdConfig ed = ed_config(s);
  const LoopConfig loop = loop_config(s);
  for (auto& part : split_batches(packet, s.batch)) {
    BatchRun run_b{std::move(part), {}};
    run_b.result = run(run_b.packet, std::size_t(s.clusters), me, ed, loop, s.seed);
    if (!out.batches.empty()) align_to(out.batches.back().result, run_b.result);
    out.degenerate = out.degenerate || run_b.result.degenerate;
    out.labels.insert(out.labels.end(), run_b.result.labels.begin(), run_b.result.labels.end());
    out.batches.push_back(std::move(run_b));
  }
  return out;
}

// Images.

struct Rgb {
  double r, g, b;
};

Rgb cluster_colour(int cluster, int clusters) {
  const double h = 6.0 * double(cluster) / double(std::max(clusters, 1));
  const double s = 0.85, v = 1.0;
  const double c = v * s, x = c * (1 - std::abs(std::fmod(h, 2.0) - 1)), m = v - c;
  Rgb rgb{0, 0, 0};
  switch (int(h) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  return {rgb.r + m, rgb.g + m, rgb.b + m};
}

/// Colour per pixel of the events landing there: mean hue of the clusters,
/// gray when every event at the pixel is NOISE, black when there is none.
void write_composite(const EventPacket& packet, std::span<const int> labels, int clusters,
                     const fs::path& path) {
  const int w = packet.width(), h = packet.height();
  std::vector<Rgb> sum(std::size_t(w) * std::size_t(h), {0, 0, 0});
  std::vector<int> real(sum.size(), 0), noise(sum.size(), 0);
  const auto events = packet.events();
  for (std::size_t k = 0; k < events.size(); ++k) {
    const std::size_t idx = std::size_t(events[k].y) * std::size_t(w) + events[k].x;
    if (labels[k] == kNoiseLabel) {
      ++noise[idx];
      continue;
    }
    const Rgb c = cluster_colour(labels[k] - 1, clusters);
    sum[idx].r += c.r, sum[idx].g += c.g, sum[idx].b += c.b;
    ++real[idx];
  }
  auto out = open_out(path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  for (std::size_t idx = 0; idx < sum.size(); ++idx) {
    unsigned char px[3] = {0, 0, 0};
    if (real[idx] > 0) {
      px[0] = static_cast<unsigned char>(std::lround(255.0 * sum[idx].r / real[idx]));
      px[1] = static_cast<unsigned char>(std::lround(255.0 * sum[idx].g / real[idx]));
      px[2] = static_cast<unsigned char>(std::lround(255.0 * sum[idx].b / real[idx]));
    } else if (noise[idx] > 0) {
      px[0] = px[1] = px[2] = 128;
    }
    out.write(reinterpret_cast<const char*>(px), 3);
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

// Subcommands.

struct SynthOptions {
  std::string spec;
  bool suite = false;
  std::string out;
  std::string format = "binary";
  std::string name;
  std::optional<double> noise;
  std::uint64_t seed = 1;
  std::string config;
};

void write_sequence(const fs::path& dir, const std::string& name, const SceneSpec& spec,
                    const LabeledEvents& data, EventFormat format, const std::string& extra = "") {
  const std::string events_file = name + extension(format);
  save_events(data.packet, dir / events_file, format);
  save_labels(data.labels, dir / (name + ".labels"));
  write_text(dir / (name + ".manifest"), "sequence = " + name + "\nevents = " + events_file +
                                             "\nlabels = " + name + ".labels\n" + extra + format_scene_spec(spec));
}

int cmd_synth(const SynthOptions& o, const CLI::App& app, std::ostream& out) {
  if (o.suite == !o.spec.empty()) throw Error(ErrorCode::InvalidArgument, "give exactly one of --spec or --suite");
  const EventFormat format = parse_format(o.format);
  const fs::path dir(o.out);
  ensure_dir(dir);
  const bool seed_given =
      app.get_option("--seed")->count() > 0 || (!o.config.empty() && KeyValueFile::load(o.config).get("seed"));
  if (o.suite) {
    std::ostringstream index;
    index << "command = synth\nsuite = standard\nseed = " << o.seed << "\nformat = " << o.format << "\n";
    for (const auto& seq : standard_suite(o.seed)) {
      write_sequence(dir, seq.name, seq.spec, seq.data, format, "suite_seed = " + std::to_string(o.seed) + "\n");
      index << "sequence = " << seq.name << "\n";
    }
    write_text(dir / "suite.manifest", index.str());
    out << "wrote 20 sequences to " << dir.string() << "\n";
    return kExitOk;
  }
  SceneSpec spec = parse_scene_spec(KeyValueFile::load(o.spec));
  if (seed_given) spec.seed = o.seed;
  if (o.noise) spec.noise = *o.noise;
  validate(spec);
  const std::string name = o.name.empty() ? fs::path(o.spec).stem().string() : o.name;
  const LabeledEvents data = generate_scene(spec);
  write_sequence(dir, name, spec, data, format);
  std::size_t noise = 0;
  for (int l : data.labels) noise += l == kNoiseLabel;
  out << name << ": " << data.packet.size() << " events (" << noise << " noise)\n";
  return kExitOk;
}

struct SegmentOptions {
  InputOptions input;
  std::string out;
  std::string config;
  PipelineSettings settings;
};

int cmd_segment(const SegmentOptions& o, std::ostream& out, std::ostream& err) {
  validate(o.settings);
  const EventPacket packet = load_input(o.input);
  const fs::path dir(o.out);
  ensure_dir(dir);
  const Segmentation seg = segment(packet, o.settings);
  const int n_l = o.settings.clusters;

  save_labels(seg.labels, dir / "labels.txt");
  {
    auto csv = open_out(dir / "confidence.csv");
    csv << "event,cluster,value\n";
    csv << std::setprecision(9);
    std::size_t offset = 0;
    for (const auto& b : seg.batches) {
      const Matrix& c = b.result.state.confidence;
      for (std::size_t k = 0; k < c.rows(); ++k)
        for (std::size_t j = 0; j < c.cols(); ++j) csv << offset + k << ',' << j + 1 << ',' << c(k, j) << '\n';
      offset += c.rows();
    }
  }
  {
    auto csv = open_out(dir / "trace.csv");
    csv << "iter,total_sharpness,mean_confidence,max_dC\n" << std::setprecision(10);
    for (const auto& b : seg.batches)
      for (const auto& t : b.result.trace)
        csv << t.iteration << ',' << t.total_sharpness << ',' << t.mean_confidence << ','
            << t.max_delta_confidence << '\n';
  }
  for (int j = 0; j < n_l; ++j) {
    ScalarImage img(packet.width(), packet.height());
    for (const auto& b : seg.batches) {
      const auto& s = b.result.state;
      const auto part = accumulate_wiwe(b.packet, s.probability.column(std::size_t(j)),
                                        s.confidence.column(std::size_t(j)), s.thetas[std::size_t(j)], s.t_ref);
      for (std::size_t k = 0; k < img.size(); ++k) img.values()[k] += part.values()[k];
    }
    write_pgm16(img, dir / ("cluster_" + std::to_string(j + 1) + ".pgm"));
  }
  write_composite(packet, seg.labels, n_l, dir / "segmentation.ppm");

  std::ostringstream manifest;
  manifest << "command = segment\ninput = " << o.input.path << "\nconfig = " << o.config
           << "\nevents = " << packet.size() << "\nwidth = " << packet.width() << "\nheight = " << packet.height()
           << std::setprecision(12) << "\nt0 = " << packet.t0() << "\nt1 = " << packet.t1()
           << "\nbatches = " << seg.batches.size() << "\n"
           << settings_manifest(o.settings);
  for (std::size_t b = 0; b < seg.batches.size(); ++b)
    for (std::size_t j = 0; j < seg.batches[b].result.state.clusters(); ++j) {
      const auto th = seg.batches[b].result.state.thetas[j];
      manifest << "theta = " << b << ' ' << j + 1 << ' ' << th.vx << ' ' << th.vy << '\n';
    }
  manifest << "degenerate = " << (seg.degenerate ? "true" : "false") << "\n";
  write_text(dir / "manifest.txt", manifest.str());

  std::size_t noise = 0;
  for (int l : seg.labels) noise += l == kNoiseLabel;
  out << "segmented " << packet.size() << " events into " << n_l << " clusters (" << noise
      << " NOISE) in " << seg.batches.size() << " batch(es)\n";
  if (seg.degenerate) {
    err << "warning: degenerate event correlation; motion-only labels were kept\n";
    return kExitDegenerate;
  }
  return kExitOk;
}

struct EvalOptions {
  std::string pred;
  std::string gt;
  std::string confidence;
  std::string sequence = "sequence";
  std::string out;
};

std::vector<double> load_max_confidence(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<double> best(n, 0.0);
  std::string line;
  std::getline(in, line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t event = 0;
    int cluster = 0;
    double value = 0;
    char c1 = 0, c2 = 0;
    std::istringstream fields(line);
    if (!(fields >> event >> c1 >> cluster >> c2 >> value) || c1 != ',' || c2 != ',' || event >= n)
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(line_no));
    best[event] = std::max(best[event], value);
  }
  return best;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto pred = load_labels(o.pred);
  const auto gt = load_labels(o.gt);
  if (pred.size() != gt.size())
    throw Error(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                               " labels, ground truth " + std::to_string(gt.size()));
  const fs::path dir(o.out);
  ensure_dir(dir);
  const IoUReport report = iou_report(pred, gt);
  char buf[64];
  {
    auto csv = open_out(dir / "iou.csv");
    csv << "sequence,object,IoU,MIoU\n";
    for (const auto& [object, value] : report.per_object) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f", 100.0 * value, 100.0 * report.miou);
      csv << o.sequence << ',' << object << ',' << buf << '\n';
    }
  }
  std::ostringstream summary;
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * report.miou);
  summary << "sequence " << o.sequence << "\nMIoU " << buf << "\n";
  for (const auto& [object, value] : report.per_object) {
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * value);
    summary << "object " << object << " IoU " << buf;
    if (auto m = report.matching.find(object); m != report.matching.end()) {
      const auto& c = report.counts.at(object);
      summary << " cluster " << m->second << " TP " << c.tp << " FP " << c.fp << " FN " << c.fn;
    } else {
      summary << " unmatched";
    }
    summary << "\n";
  }
  if (!o.confidence.empty()) {
    const auto scores = load_max_confidence(o.confidence, gt.size());
    std::vector<bool> is_noise(gt.size());
    for (std::size_t k = 0; k < gt.size(); ++k) is_noise[k] = gt[k] == kNoiseLabel;
    std::vector<double> thresholds;
    for (int k = 0; k <= 20; ++k) thresholds.push_back(k / 20.0);
    thresholds.push_back(1.05);
    auto csv = open_out(dir / "roc.csv");
    csv << "threshold,tpr,fpr\n";
    for (const auto& p : denoise_roc(scores, is_noise, thresholds)) {
      csv << p.threshold << ',';
      if (p.tpr) csv << *p.tpr;
      csv << ',';
      if (p.fpr) csv << *p.fpr;
      csv << '\n';
    }
    try {
      std::snprintf(buf, sizeof buf, "%.4f", roc_auc(scores, is_noise));
      summary << "AUC " << buf << "\n";
    } catch (const Error&) {
      summary << "AUC undefined (one class is empty)\n";
    }
  }
  write_text(dir / "summary.txt", summary.str());
  out << summary.str();
  return kExitOk;
}

struct RenderOptions {
  InputOptions input;
  std::string labels;
  double vx = 0.0;
  double vy = 0.0;
  int clusters = 0;
  std::string out;
};

int cmd_render(const RenderOptions& o, std::ostream& out) {
  const EventPacket packet = load_input(o.input);
  const fs::path dir(o.out);
  ensure_dir(dir);
  const std::vector<double> ones(packet.size(), 1.0);
  write_pgm16(accumulate_wiwe(packet, ones, ones, {o.vx, o.vy}, packet.t0()), dir / "iwe.pgm");
  if (!o.labels.empty()) {
    auto labels = load_labels(o.labels);
    if (o.input.t0 || o.input.t1)
      throw Error(ErrorCode::InvalidArgument, "--labels cannot be combined with a time window");
    if (labels.size() != packet.size())
      throw Error(ErrorCode::LengthMismatch, "label count does not match the event count");
    int clusters = o.clusters;
    for (int l : labels) clusters = std::max(clusters, l);
    write_composite(packet, labels, clusters, dir / "segmentation.ppm");
  }
  out << "rendered " << packet.size() << " events\n";
  return kExitOk;
}

struct SweepOptions {
  std::string suite;
  std::string out;
  std::string config;
  int jobs = 1;
  bool ablation = false;
  int baseline_radius = 1;
  double baseline_dt = 0.01;
  PipelineSettings settings;
};

struct SweepSequence {
  std::string name;
  double noise = 0.0;
  int objects = 0;
  fs::path events;
  fs::path labels;
};

std::vector<SweepSequence> scan_suite(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "suite directory not found: " + dir.string());
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".manifest" && entry.path().filename() != "suite.manifest")
      manifests.push_back(entry.path());
  std::sort(manifests.begin(), manifests.end());
  std::vector<SweepSequence> out;
  for (const auto& m : manifests) {
    const auto kv = KeyValueFile::load(m);
    const auto name = kv.get("sequence");
    const auto events = kv.get("events");
    const auto labels = kv.get("labels");
    if (!name || !events || !labels) continue;
    out.push_back({*name, kv.get_double("noise").value_or(0.0), int(kv.get_all("object").size()),
                   dir / *events, dir / *labels});
  }
  if (out.empty()) throw Error(ErrorCode::IoFailure, "no sequences found in " + dir.string());
  return out;
}

struct SweepCell {
  std::string method;
  std::size_t sequence = 0;
  std::optional<IoUReport> report;
  std::string error;
  double seconds = 0.0;
};

IoUReport run_method(const std::string& method, const LabeledEvents& data, PipelineSettings s,
                     const SweepOptions& o) {
  if (method == "me-only") {
    s.iterations = 0;
  } else if (method == "filter+me") {
    s.iterations = 0;
    const auto keep = baseline_st_filter(data.packet, o.baseline_radius, o.baseline_dt);
    std::vector<Event> kept;
    for (std::size_t k = 0; k < keep.size(); ++k)
      if (keep[k]) kept.push_back(data.packet[k]);
    const EventPacket filtered(kept, data.packet.width(), data.packet.height(), data.packet.t0(),
                               data.packet.t1());
    std::vector<int> pred(data.labels.size(), kNoiseLabel);
    if (!filtered.empty()) {
      const auto seg = segment(filtered, s);
      std::size_t i = 0;
      for (std::size_t k = 0; k < keep.size(); ++k)
        if (keep[k]) pred[k] = seg.labels[i++];
    }
    return iou_report(pred, data.labels);
  } else if (method != "progressive") {
    s.objective = method;
  }
  return iou_report(segment(data.packet, s).labels, data.labels);
}

int cmd_sweep(const SweepOptions& o, const CLI::App& app, std::ostream& out, std::ostream& err) {
  validate(o.settings);
  const auto sequences = scan_suite(o.suite);
  const fs::path dir(o.out);
  ensure_dir(dir);
  const bool clusters_given = app.get_option("--clusters")->count() > 0 ||
                              (!o.config.empty() && KeyValueFile::load(o.config).get("clusters"));

  std::vector<std::string> methods{"progressive", "me-only", "filter+me"};
  if (o.ablation)
    for (auto obj : {Objective::Variance, Objective::GradientMagnitude, Objective::HessianMagnitude})
      methods.push_back(to_string(obj));

  std::vector<SweepCell> cells;
  for (const auto& m : methods)
    for (std::size_t s = 0; s < sequences.size(); ++s) cells.push_back({m, s, std::nullopt, "", 0.0});

  std::vector<std::optional<LabeledEvents>> loaded(sequences.size());
  std::vector<std::string> load_errors(sequences.size());
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    try {
      const auto& q = sequences[s];
      LabeledEvents d{load_events(q.events, format_from_path(q.events)), load_labels(q.labels)};
      if (d.labels.size() != d.packet.size()) throw Error(ErrorCode::LengthMismatch, "label sidecar misaligned");
      loaded[s] = std::move(d);
    } catch (const std::exception& e) {
      load_errors[s] = e.what();
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepCell& cell = cells[i];
      const auto& q = sequences[cell.sequence];
      const auto start = std::chrono::steady_clock::now();
      if (!loaded[cell.sequence]) {
        cell.error = load_errors[cell.sequence];
      } else {
        try {
          PipelineSettings s = o.settings;
          if (!clusters_given && q.objects > 0) s.clusters = q.objects;
          cell.report = run_method(cell.method, *loaded[cell.sequence], s, o);
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }
      cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(log_mutex);
      err << cell.method << ' ' << q.name << ": "
          << (cell.report ? std::to_string(100.0 * cell.report->miou) : "failed (" + cell.error + ")") << "\n";
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(o.jobs, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::set<double> levels;
  for (const auto& q : sequences) levels.insert(q.noise);
  char buf[64];
  std::ofstream csv = open_out(dir / "sweep.csv");
  csv << "method,noise,MIoU,sequences,failed\n";
  std::ostringstream table;
  table << std::left << std::setw(14) << "method";
  for (double n : levels) {
    std::snprintf(buf, sizeof buf, "n=%.2f", n);
    table << std::right << std::setw(10) << buf;
  }
  table << "\n";
  bool any_success = false;
  for (const auto& m : methods) {
    table << std::left << std::setw(14) << m;
    for (double n : levels) {
      double sum = 0;
      int ok = 0, failed = 0;
      for (const auto& c : cells) {
        if (c.method != m || sequences[c.sequence].noise != n) continue;
        if (c.report) sum += 100.0 * c.report->miou, ++ok;
        else ++failed;
      }
      if (ok > 0) {
        any_success = true;
        std::snprintf(buf, sizeof buf, "%.2f", sum / ok);
      } else {
        std::snprintf(buf, sizeof buf, "failed");
      }
      table << std::right << std::setw(10) << buf;
      csv << m << ',' << n << ',' << (ok > 0 ? buf : "") << ',' << ok << ',' << failed << '\n';
    }
    table << "\n";
  }
  {
    auto iou_csv = open_out(dir / "iou.csv");
    auto runs = open_out(dir / "sequences.csv");
    auto failures = open_out(dir / "failures.txt");
    iou_csv << "sequence,object,IoU,MIoU\n";
    runs << "method,sequence,noise,MIoU,seconds\n";
    for (const auto& c : cells) {
      const auto& q = sequences[c.sequence];
      if (!c.report) {
        failures << c.method << ' ' << q.name << ": " << c.error << '\n';
        continue;
      }
      for (const auto& [object, value] : c.report->per_object) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f", 100.0 * value, 100.0 * c.report->miou);
        iou_csv << c.method << '/' << q.name << ',' << object << ',' << buf << '\n';
      }
      std::snprintf(buf, sizeof buf, "%.2f,%.3f", 100.0 * c.report->miou, c.seconds);
      runs << c.method << ',' << q.name << ',' << q.noise << ',' << buf << '\n';
    }
  }
  write_text(dir / "sweep.txt", table.str());
  std::ostringstream manifest;
  manifest << "command = sweep\nsuite = " << o.suite << "\nconfig = " << o.config << "\njobs = " << o.jobs
           << "\nablation = " << (o.ablation ? "true" : "false") << "\nbaseline-radius = " << o.baseline_radius
           << "\nbaseline-dt = " << o.baseline_dt << "\nclusters-from-suite = " << (clusters_given ? "false" : "true")
           << "\n"
           << settings_manifest(o.settings);
  write_text(dir / "manifest.txt", manifest.str());
  out << table.str();
  return any_success ? kExitOk : kExitIo;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure:
    case ErrorCode::MalformedRecord:
    case ErrorCode::OutOfBounds:
    case ErrorCode::EmptyFile:
      return kExitIo;
    default:
      return kExitUsage;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion segmentation of event-camera streams with progressive denoising", "evseg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "evseg 1.0");

  ConfigBinder synth_binder, segment_binder, sweep_binder;

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic labelled event streams");
  synth_cmd->add_option("--spec", synth.spec, "Scene spec file (key = value)");
  synth_cmd->add_flag("--suite", synth.suite, "Write the 20-sequence standard suite");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_binder.add(synth_cmd, "format", synth.format, "Event file format: csv or binary");
  synth_binder.add(synth_cmd, "seed", synth.seed, "Random seed (overrides the spec)");
  synth_cmd->add_option("--noise", synth.noise, "Noise level override");
  synth_cmd->add_option("--name", synth.name, "Sequence name (default: spec file stem)");
  synth_cmd->add_option("--config", synth.config, "Config file");

  SegmentOptions seg;
  CLI::App* seg_cmd = app.add_subcommand("segment", "Segment an event stream by motion");
  add_input_options(seg_cmd, seg.input);
  seg_cmd->add_option("--out", seg.out, "Output directory")->required();
  seg_cmd->add_option("--config", seg.config, "Config file");
  add_pipeline_options(seg_cmd, segment_binder, seg.settings);

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predicted labels against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "Predicted label sidecar")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth label sidecar")->required();
  eval_cmd->add_option("--confidence", eval.confidence, "Confidence CSV from segment, for the ROC");
  eval_cmd->add_option("--sequence", eval.sequence, "Sequence name for the reports");
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();

  RenderOptions render;
  CLI::App* render_cmd = app.add_subcommand("render", "Render events as images");
  add_input_options(render_cmd, render.input);
  render_cmd->add_option("--labels", render.labels, "Label sidecar for a colour segmentation image");
  render_cmd->add_option("--vx", render.vx, "Warp velocity x, px/s");
  render_cmd->add_option("--vy", render.vy, "Warp velocity y, px/s");
  render_cmd->add_option("--clusters", render.clusters, "Number of clusters for the colour wheel");
  render_cmd->add_option("--out", render.out, "Output directory")->required();

  SweepOptions sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Noise-level x method MIoU table over a suite");
  sweep_cmd->add_option("suite", sweep.suite, "Directory written by `synth --suite`")->required();
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  sweep_cmd->add_option("--config", sweep.config, "Config file");
  sweep_binder.add(sweep_cmd, "jobs", sweep.jobs, "Sequences processed concurrently");
  sweep_binder.add_flag(sweep_cmd, "ablation", sweep.ablation, "Also run the variance/gradient/hessian objectives");
  sweep_binder.add(sweep_cmd, "baseline-radius", sweep.baseline_radius, "Baseline filter radius, px");
  sweep_binder.add(sweep_cmd, "baseline-dt", sweep.baseline_dt, "Baseline filter time window, s");
  add_pipeline_options(sweep_cmd, sweep_binder, sweep.settings);
  sweep.settings.batch = 0;
  sweep_cmd->get_option("--batch")->default_val(0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) {
      synth_binder.apply(synth.config);
      return cmd_synth(synth, *synth_cmd, out);
    }
    if (*seg_cmd) {
      segment_binder.apply(seg.config);
      return cmd_segment(seg, out, err);
    }
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*render_cmd) return cmd_render(render, out);
    if (*sweep_cmd) {
      sweep_binder.apply(sweep.config);
      return cmd_sweep(sweep, *sweep_cmd, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace evseg
