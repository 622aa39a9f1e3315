#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "trackforge/detgen.hpp"
#include "trackforge/postproc.hpp"
#include "trackforge/raw_output.hpp"
#include "trackforge/tracker.hpp"

namespace trackforge {

// ---------------------------------------------------------------------------
// Modes and configuration
// ---------------------------------------------------------------------------

enum class ExecutionMode { Serial, BatchedSerial, Parallel };
enum class Precision { Full, Mixed };

inline const char* to_string(ExecutionMode m) {
  switch (m) {
    case ExecutionMode::Serial: return "serial";
    case ExecutionMode::BatchedSerial: return "batched";
    case ExecutionMode::Parallel: return "parallel";
  }
  return "?";
}

inline const char* to_string(Precision p) { return p == Precision::Full ? "full" : "mixed"; }

inline ExecutionMode parse_execution_mode(const std::string& s) {
  if (s == "serial") return ExecutionMode::Serial;
  if (s == "batched" || s == "batched-serial") return ExecutionMode::BatchedSerial;
  if (s == "parallel") return ExecutionMode::Parallel;
  throw ConfigError("unknown mode '" + s + "' (expected serial, batched or parallel)");
}

inline Precision parse_precision(const std::string& s) {
  if (s == "full") return Precision::Full;
  if (s == "mixed") return Precision::Mixed;
  throw ConfigError("unknown precision '" + s + "' (expected full or mixed)");
}

struct PipelineMode {
  ExecutionMode execution = ExecutionMode::Serial;
  Precision precision = Precision::Full;
  int batch_size = 1;

  friend bool operator==(const PipelineMode&, const PipelineMode&) = default;
};

inline void validate(const PipelineMode& m) {
  if (m.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (m.execution == ExecutionMode::Serial && m.batch_size != 1) {
    throw ConfigError("serial mode processes one frame at a time (batch_size must be 1)");
  }
}

/// Stand-in costs for the forward pass and the post-processing step.
/// Defaults: forward pass 8 + 34 * kappa ms per image at batch 1, kappa
/// 0.786 when mixed; post-processing 6.5 ms + 0.2 ms per raw detection
/// (about 10.5 ms at 20 detections). Together they give ~19 FPS serial.
struct EmulationConfig {
  bool enabled = true;
  double t_fixed_ms = 8.0;
  double t_image_ms = 34.0;
  double kappa_full = 1.0;
  double kappa_mixed = 0.786;
  double post_fixed_ms = 6.5;
  double post_per_detection_ms = 0.2;
  /// Spin instead of sleeping, for contention studies.
  bool busy_wait = false;

  LatencyModel model(Precision p) const {
    return {t_fixed_ms, t_image_ms, p == Precision::Full ? kappa_full : kappa_mixed};
  }
  double post_ms(double detections) const { return post_fixed_ms + post_per_detection_ms * detections; }
};

inline void validate(const EmulationConfig& e) {
  validate(e.model(Precision::Full));
  validate(e.model(Precision::Mixed));
  if (!(e.post_fixed_ms >= 0.0) || !(e.post_per_detection_ms >= 0.0)) {
    throw ConfigError("post-processing costs must be >= 0");
  }
}

struct PipelineConfig {
  EmulationConfig emulation;
  std::size_t q1_capacity = 32;
  std::size_t q2_capacity = 64;
  int warmup_frames = 10;
  /// Cap on concurrent stage contexts in parallel mode (0 = no cap).
  int max_threads = 0;
};

inline void validate(const PipelineConfig& c) {
  if (c.emulation.enabled) validate(c.emulation);
  if (c.q1_capacity == 0 || c.q2_capacity == 0) throw ConfigError("queue capacities must be positive");
  if (c.warmup_frames < 0) throw ConfigError("warmup_frames must be >= 0");
  if (c.max_threads < 0) throw ConfigError("max_threads must be >= 0");
}

// ---------------------------------------------------------------------------
// Bounded FIFO between stages
// ---------------------------------------------------------------------------

/// Blocking bounded FIFO. close() appends the end-of-stream mark after the
/// last item; abort() wakes every waiter and makes further calls fail.
template <typename T>
class StageQueue {
 public:
  explicit StageQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("queue capacity must be positive");
  }

  StageQueue(const StageQueue&) = delete;
  StageQueue& operator=(const StageQueue&) = delete;

  /// Blocks while full. Returns false if the queue was aborted.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return aborted_ || items_.size() < capacity_; });
    if (aborted_) return false;
    if (closed_) throw std::logic_error("push after end of stream");
    items_.push_back(std::move(item));
    max_occupancy_ = std::max(max_occupancy_, items_.size());
    not_empty_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void abort() {
    std::lock_guard lock(mu_);
    aborted_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  /// Blocks while empty and open. nullopt means end of stream (or abort).
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return aborted_ || closed_ || !items_.empty(); });
    if (aborted_) return std::nullopt;
    if (items_.empty()) {
      end_seen_ = true;
      return std::nullopt;
    }
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t max_occupancy() const {
    std::lock_guard lock(mu_);
    return max_occupancy_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  bool aborted() const {
    std::lock_guard lock(mu_);
    return aborted_;
  }
  bool end_of_stream_seen() const {
    std::lock_guard lock(mu_);
    return end_seen_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::size_t max_occupancy_ = 0;
  bool closed_ = false;
  bool aborted_ = false;
  bool end_seen_ = false;
};

/// Groups queue items into batches of `batch_size`, preserving order. At end
/// of stream a partial batch is emitted when flush_on_sentinel is set and
/// dropped otherwise. An empty batch means the stream is exhausted.
template <typename T>
class Batcher {
 public:
  Batcher(StageQueue<T>& queue, int batch_size, bool flush_on_sentinel = true)
      : queue_(queue), batch_size_(batch_size), flush_(flush_on_sentinel) {
    if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  }

  std::vector<T> next() {
    std::vector<T> batch;
    if (done_) return batch;
    while (batch.size() < static_cast<std::size_t>(batch_size_)) {
      auto item = queue_.pop();
      if (!item) {
        done_ = true;
        if (!flush_) batch.clear();
        return batch;
      }
      batch.push_back(std::move(*item));
    }
    return batch;
  }

 private:
  StageQueue<T>& queue_;
  int batch_size_;
  bool flush_;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Detection sources
// ---------------------------------------------------------------------------

struct FramePacket {
  int index = 0;
  double timestamp_s = 0.0;
  double width = 0.0;
  double height = 0.0;
};

/// Stands in for video capture plus the detector's forward pass. Calls
/// must be safe from any thread (implementations are immutable).
class DetectionSource {
 public:
  virtual ~DetectionSource() = default;
  virtual int num_frames() const = 0;
  virtual std::size_t embedding_dim() const = 0;
  virtual FramePacket capture(int frame_index) const = 0;
  virtual RawModelOutput infer(const FramePacket& frame) const = 0;
};

inline constexpr double kNominalVideoFps = 30.0;

class SyntheticSource : public DetectionSource {
 public:
  SyntheticSource(ScenarioConfig config, std::uint64_t seed) : scenario_(std::move(config), seed) {}

  const Scenario& scenario() const { return scenario_; }
  int num_frames() const override { return scenario_.config().num_frames; }
  std::size_t embedding_dim() const override { return scenario_.config().embedding_dim; }
  FramePacket capture(int i) const override {
    return {i, i / kNominalVideoFps, scenario_.config().frame_width, scenario_.config().frame_height};
  }
  RawModelOutput infer(const FramePacket& f) const override { return scenario_.generate_frame(f.index).output; }

 private:
  Scenario scenario_;
};

/// Replays detections loaded from a MOT det file plus embedding sidecar.
/// Frames without detections produce empty outputs.
class FileSource : public DetectionSource {
 public:
  FileSource(DetectionMap detections, std::size_t embedding_dim, int num_frames = -1)
      : detections_(std::move(detections)), dim_(embedding_dim) {
    frames_ = num_frames >= 0 ? num_frames : (detections_.empty() ? 0 : detections_.rbegin()->first + 1);
    for (const auto& [f, raw] : detections_) {
      if (raw.row_width() != kRowHeader + dim_) throw LayoutError("detections lack embeddings of the configured width");
    }
  }

  int num_frames() const override { return frames_; }
  std::size_t embedding_dim() const override { return dim_; }
  FramePacket capture(int i) const override { return {i, i / kNominalVideoFps, 0.0, 0.0}; }
  RawModelOutput infer(const FramePacket& f) const override {
    auto it = detections_.find(f.index);
    return it == detections_.end() ? RawModelOutput(kRowHeader + dim_) : it->second;
  }

 private:
  DetectionMap detections_;
  std::size_t dim_;
  int frames_ = 0;
};

/// Half-precision model output: embedding columns rounded to binary16,
/// box and score columns untouched.
inline RawModelOutput quantize_embeddings(RawModelOutput raw) {
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    auto row = raw.row(r);
    for (std::size_t k = kRowHeader; k < row.size(); ++k) row[k] = round_to_binary16(row[k]);
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Measurement and reporting
// ---------------------------------------------------------------------------

struct FpsMeasurement {
  int frames = 0;
  double seconds = 0.0;
  double fps = 0.0;
};

/// Frames after warm-up over the time from the start of the measured window
/// to the last output. The window opens at the later of the first measured
/// frame's capture and the last warm-up frame's output, so frames captured
/// ahead into a queue are not charged to the window twice.
inline FpsMeasurement measure_fps(const std::vector<double>& capture_s, const std::vector<double>& output_s,
                                  int warmup) {
  if (capture_s.size() != output_s.size()) throw MeasurementError("capture/output timestamp counts differ");
  const int total = static_cast<int>(capture_s.size());
  if (warmup < 0) throw MeasurementError("warm-up must be >= 0");
  if (total - warmup < 1) throw MeasurementError("no frames after warm-up");
  double start = capture_s[warmup];
  if (warmup > 0) start = std::max(start, output_s[warmup - 1]);
  const double end = output_s.back();
  const double seconds = end - start;
  if (!(seconds > 0.0)) throw MeasurementError("measurement window has no duration");
  FpsMeasurement m;
  m.frames = total - warmup;
  m.seconds = seconds;
  m.fps = m.frames / seconds;
  return m;
}

struct RunReport {
  PipelineMode mode;
  int total_frames = 0;
  int frames = 0;  // measured frames (after warm-up)
  double seconds = 0.0;
  double fps = 0.0;
  double capture_busy_s = 0.0;
  double inference_busy_s = 0.0;
  double post_busy_s = 0.0;
  std::size_t max_q1 = 0;
  std::size_t max_q2 = 0;
  double mean_detections = 0.0;
};

inline constexpr const char* kRunReportCsvHeader = "mode,precision,batch_size,frames,seconds,fps,max_q1,max_q2";

inline std::string to_csv_row(const RunReport& r) {
  std::ostringstream out;
  out << to_string(r.mode.execution) << ',' << to_string(r.mode.precision) << ',' << r.mode.batch_size << ','
      << r.frames << ',' << format_number(r.seconds) << ',' << format_number(r.fps) << ',' << r.max_q1 << ','
      << r.max_q2;
  return out.str();
}

inline RunReport parse_csv_row(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 8) throw ParseError("report row needs 8 fields: '" + line + "'");
  RunReport r;
  r.mode.execution = parse_execution_mode(std::string(f[0]));
  r.mode.precision = parse_precision(std::string(f[1]));
  if (!parse_field(f[2], r.mode.batch_size) || !parse_field(f[3], r.frames) || !parse_field(f[4], r.seconds) ||
      !parse_field(f[5], r.fps) || !parse_field(f[6], r.max_q1) || !parse_field(f[7], r.max_q2)) {
    throw ParseError("malformed report row: '" + line + "'");
  }
  return r;
}

/// Throughput the emulation model predicts: serialized modes pay model and
/// post-processing per frame, parallel mode pays only the slower stage.
inline double predicted_fps(const EmulationConfig& e, const PipelineMode& mode, double mean_detections) {
  const double model_ms = emulated_latency(e.model(mode.precision), mode.batch_size) / mode.batch_size;
  const double post_ms = e.post_ms(mean_detections);
  if (mode.execution == ExecutionMode::Parallel) return 1000.0 / std::max(model_ms, post_ms);
  return 1000.0 / (model_ms + post_ms);
}

struct RunResult {
  std::vector<TrackerOutput> outputs;
  RunReport report;
};

// ---------------------------------------------------------------------------
// Runtime
// ---------------------------------------------------------------------------

namespace detail {

using Clock = std::chrono::steady_clock;

inline Clock::duration to_duration(double ms) {
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(ms));
}

inline void wait_until(Clock::time_point deadline, bool busy) {
  if (busy) {
    while (Clock::now() < deadline) {
    }
  } else {
    std::this_thread::sleep_until(deadline);
  }
}

struct InferredFrame {
  FramePacket packet;
  RawModelOutput raw;
};

class Runtime {
 public:
  Runtime(const DetectionSource& source, Tracker& tracker, const PipelineMode& mode, const PipelineConfig& cfg)
      : source_(source), tracker_(tracker), mode_(mode), cfg_(cfg) {
    const auto n = static_cast<std::size_t>(source.num_frames());
    capture_s_.assign(n, 0.0);
    output_s_.assign(n, 0.0);
    outputs_.reserve(n);
  }

  RunResult run() {
    t0_ = Clock::now();
    const int threads = cfg_.max_threads == 0 ? 3 : std::min(cfg_.max_threads, 3);
    if (mode_.execution == ExecutionMode::Parallel && threads >= 2) {
      run_parallel(threads);
    } else {
      run_serialized(mode_.execution == ExecutionMode::Serial ? 1 : mode_.batch_size);
    }
    return finish();
  }

 private:
  double since_start(Clock::time_point t) const { return std::chrono::duration<double>(t - t0_).count(); }

  FramePacket capture(int i) {
    const auto start = Clock::now();
    FramePacket p = source_.capture(i);
    const auto end = Clock::now();
    capture_s_[static_cast<std::size_t>(i)] = since_start(end);
    capture_busy_ += end - start;
    return p;
  }

  std::vector<InferredFrame> infer(const std::vector<FramePacket>& batch) {
    const auto start = Clock::now();
    std::vector<InferredFrame> out;
    out.reserve(batch.size());
    for (const auto& p : batch) {
      RawModelOutput raw = source_.infer(p);
      if (mode_.precision == Precision::Mixed) raw = quantize_embeddings(std::move(raw));
      detection_rows_ += raw.rows();
      out.push_back({p, std::move(raw)});
    }
    if (cfg_.emulation.enabled) {
      const double ms = emulated_latency(cfg_.emulation.model(mode_.precision), static_cast<int>(batch.size()));
      wait_until(start + to_duration(ms), cfg_.emulation.busy_wait);
    }
    inference_busy_ += Clock::now() - start;
    return out;
  }

  void post(const InferredFrame& f) {
    const auto start = Clock::now();
    const auto dets = parse_output(f.raw, tracker_.config().embedding_dim);
    outputs_.push_back(tracker_.step(f.packet.index, dets));
    if (cfg_.emulation.enabled) {
      const double ms = cfg_.emulation.post_ms(static_cast<double>(f.raw.rows()));
      wait_until(start + to_duration(ms), cfg_.emulation.busy_wait);
    }
    const auto end = Clock::now();
    output_s_[static_cast<std::size_t>(f.packet.index)] = since_start(end);
    post_busy_ += end - start;
  }

  void run_serialized(int batch_size) {
    const int n = source_.num_frames();
    for (int first = 0; first < n; first += batch_size) {
      std::vector<FramePacket> batch;
      for (int i = first; i < std::min(n, first + batch_size); ++i) batch.push_back(capture(i));
      for (const auto& f : infer(batch)) post(f);
    }
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lock(err_mu_);
      if (!first_error_) first_error_ = e;
    }
    q1_.abort();
    q2_.abort();
  }

  void capture_stage() {
    try {
      for (int i = 0; i < source_.num_frames(); ++i) {
        if (!q1_.push(capture(i))) return;
      }
      q1_.close();
    } catch (...) {
      fail(std::current_exception());
    }
  }

  void inference_stage(bool owns_capture) {
    try {
      auto emit = [&](const std::vector<FramePacket>& batch) {
        for (auto& f : infer(batch)) {
          if (!q2_.push(std::move(f))) return false;
        }
        return true;
      };
      if (owns_capture) {
        const int n = source_.num_frames();
        for (int first = 0; first < n; first += mode_.batch_size) {
          std::vector<FramePacket> batch;
          for (int i = first; i < std::min(n, first + mode_.batch_size); ++i) batch.push_back(capture(i));
          if (!emit(batch)) return;
        }
      } else {
        Batcher<FramePacket> batcher(q1_, mode_.batch_size, true);
        for (auto batch = batcher.next(); !batch.empty(); batch = batcher.next()) {
          if (!emit(batch)) return;
        }
        if (q1_.aborted()) return;
      }
      q2_.close();
    } catch (...) {
      fail(std::current_exception());
    }
  }

  void run_parallel(int threads) {
    std::thread capture_thread;
    if (threads >= 3) capture_thread = std::thread([this] { capture_stage(); });
    std::thread inference_thread([this, threads] { inference_stage(threads < 3); });
    try {
      while (auto f = q2_.pop()) post(*f);
    } catch (...) {
      fail(std::current_exception());
    }
    if (capture_thread.joinable()) capture_thread.join();
    inference_thread.join();
    if (first_error_) std::rethrow_exception(first_error_);
  }

  RunResult finish() {
    RunResult result;
    const int n = source_.num_frames();
    RunReport& r = result.report;
    r.mode = mode_;
    r.total_frames = n;
    if (n > 0) {
      const int warmup = cfg_.warmup_frames < n ? cfg_.warmup_frames : 0;
      const auto m = measure_fps(capture_s_, output_s_, warmup);
      r.frames = m.frames;
      r.seconds = m.seconds;
      r.fps = m.fps;
      r.mean_detections = static_cast<double>(detection_rows_) / n;
    }
    r.capture_busy_s = std::chrono::duration<double>(capture_busy_).count();
    r.inference_busy_s = std::chrono::duration<double>(inference_busy_).count();
    r.post_busy_s = std::chrono::duration<double>(post_busy_).count();
    r.max_q1 = q1_.max_occupancy();
    r.max_q2 = q2_.max_occupancy();
    result.outputs = std::move(outputs_);
    return result;
  }

  const DetectionSource& source_;
  Tracker& tracker_;
  PipelineMode mode_;
  PipelineConfig cfg_;
  StageQueue<FramePacket> q1_{cfg_.q1_capacity};
  StageQueue<InferredFrame> q2_{cfg_.q2_capacity};
  Clock::time_point t0_;
  std::vector<double> capture_s_;
  std::vector<double> output_s_;
  std::vector<TrackerOutput> outputs_;
  Clock::duration capture_busy_{};
  Clock::duration inference_busy_{};
  Clock::duration post_busy_{};
  std::size_t detection_rows_ = 0;
  std::mutex err_mu_;
  std::exception_ptr first_error_;
};

}  // namespace detail

/// Drives `source` through capture, inference and post-processing.
///
/// Serial and BatchedSerial run every stage on the calling thread, one
/// frame or one batch at a time. Parallel runs capture and inference on
/// their own threads, connected to the post-processing loop on the calling
/// thread by two bounded queues; the tracker still sees frames strictly in
/// order, so every mode yields the same outputs for the same input.
inline RunResult run(const DetectionSource& source, Tracker& tracker, const PipelineMode& mode,
                     const PipelineConfig& config = {}) {
  validate(mode);
  validate(config);
  if (source.embedding_dim() != tracker.config().embedding_dim) {
    throw DimensionError("source embedding width differs from tracker configuration");
  }
  detail::Runtime rt(source, tracker, mode, config);
  return rt.run();
}

/// Writes outputs as MOT16 result rows.
inline void write_mot_results(std::ostream& out, const std::vector<TrackerOutput>& outputs) {
  for (const auto& o : outputs) {
    for (const auto& t : o.objects) write_mot_result_row(out, o.frame_index, t.track_id, t.box, t.objectness);
  }
}

}  // namespace trackforge
