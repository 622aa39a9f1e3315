#include <gtest/gtest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include "trackforge/pipeline.hpp"

using namespace trackforge;

namespace {

ScenarioConfig scene(int objects, int frames) {
  ScenarioConfig c;
  c.num_objects = objects;
  c.num_frames = frames;
  c.embedding_dim = 64;
  c.sigma_box = 1.5;
  c.sigma_emb = 0.3;
  c.lambda_fp = 1.0;
  c.p_miss = 0.05;
  c.sigma_score = 0.05;
  return c;
}

TrackerConfig tracker_config() {
  TrackerConfig t;
  t.embedding_dim = 64;
  return t;
}

PipelineConfig no_emulation() {
  PipelineConfig p;
  p.emulation.enabled = false;
  return p;
}

std::string mot_text(const RunResult& r) {
  std::ostringstream s;
  write_mot_results(s, r.outputs);
  return s.str();
}

class ThrowingSource : public DetectionSource {
 public:
  explicit ThrowingSource(int bad_frame, bool in_capture) : bad_(bad_frame), in_capture_(in_capture) {}
  int num_frames() const override { return 200; }
  std::size_t embedding_dim() const override { return 64; }
  FramePacket capture(int i) const override {
    if (in_capture_ && i == bad_) throw InputError("capture failed");
    return {i, 0.0, 0.0, 0.0};
  }
  RawModelOutput infer(const FramePacket& f) const override {
    if (!in_capture_ && f.index == bad_) throw InputError("inference failed");
    return RawModelOutput(kRowHeader + 64);
  }

 private:
  int bad_;
  bool in_capture_;
};

class BadRowSource : public DetectionSource {
 public:
  int num_frames() const override { return 500; }
  std::size_t embedding_dim() const override { return 64; }
  FramePacket capture(int i) const override { return {i, 0.0, 0.0, 0.0}; }
  RawModelOutput infer(const FramePacket& f) const override {
    return RawModelOutput(f.index == 30 ? kRowHeader + 63 : kRowHeader + 64);
  }
};

}  // namespace

TEST(StageQueue, FifoCapacityAndSentinel) {
  StageQueue<int> q(3);
  EXPECT_THROW(StageQueue<int>(0), ConfigError);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(q.push(i));
  std::atomic<bool> pushed{false};
  std::thread producer([&] {
    q.push(3);  // blocks until a slot frees
    pushed = true;
    q.close();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  EXPECT_FALSE(pushed.load());
  for (int i = 0; i < 4; ++i) EXPECT_EQ(q.pop(), i);
  producer.join();
  EXPECT_EQ(q.pop(), std::nullopt);
  EXPECT_TRUE(q.end_of_stream_seen());
  EXPECT_EQ(q.max_occupancy(), 3u);
}

TEST(StageQueue, AbortWakesWaiters) {
  StageQueue<int> q(1);
  std::thread consumer([&] { EXPECT_EQ(q.pop(), std::nullopt); });
  std::this_thread::sleep_for(std::chrono::milliseconds(10));
  q.abort();
  consumer.join();
  EXPECT_FALSE(q.push(1));
}

TEST(Batcher, SplitsTenFramesIntoFourFourTwo) {
  StageQueue<int> q(16);
  for (int i = 0; i < 10; ++i) q.push(i);
  q.close();
  Batcher<int> b(q, 4);
  EXPECT_EQ(b.next(), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(b.next(), (std::vector<int>{4, 5, 6, 7}));
  EXPECT_EQ(b.next(), (std::vector<int>{8, 9}));
  EXPECT_TRUE(b.next().empty());
}

TEST(Batcher, BatchOfOneAndDropPartial) {
  StageQueue<int> q(16);
  for (int i = 0; i < 3; ++i) q.push(i);
  q.close();
  Batcher<int> one(q, 1);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(one.next(), std::vector<int>{i});
  EXPECT_TRUE(one.next().empty());

  StageQueue<int> q2(16);
  for (int i = 0; i < 5; ++i) q2.push(i);
  q2.close();
  Batcher<int> drop(q2, 4, false);
  EXPECT_EQ(drop.next().size(), 4u);
  EXPECT_TRUE(drop.next().empty());
  EXPECT_THROW(Batcher<int>(q2, 0), ConfigError);
}

TEST(MeasureFps, Examples) {
  std::vector<double> cap(300), out(300);
  for (int i = 0; i < 300; ++i) {
    cap[i] = i / 30.0;
    out[i] = (i + 1) / 30.0;
  }
  const auto m = measure_fps(cap, out, 0);
  EXPECT_EQ(m.frames, 300);
  EXPECT_NEAR(m.fps, 30.0, 1e-9);

  // 310 frames, 10 warm-up: the window opens at frame 11's capture.
  std::vector<double> c2(310), o2(310);
  for (int i = 0; i < 310; ++i) {
    c2[i] = 5.0 + i * 0.1;
    o2[i] = c2[i] + 0.1;
  }
  const auto w = measure_fps(c2, o2, 10);
  EXPECT_EQ(w.frames, 300);
  EXPECT_NEAR(w.seconds, o2.back() - c2[10], 1e-12);

  EXPECT_THROW(measure_fps({}, {}, 0), MeasurementError);
  EXPECT_THROW(measure_fps({1.0}, {1.0, 2.0}, 0), MeasurementError);
  EXPECT_THROW(measure_fps(c2, o2, 310), MeasurementError);
}

TEST(RunReport, CsvRoundTrip) {
  RunReport r;
  r.mode = {ExecutionMode::Parallel, Precision::Mixed, 4};
  r.frames = 290;
  r.seconds = 8.123456789012345;
  r.fps = 35.69999999999;
  r.max_q1 = 12;
  r.max_q2 = 3;
  const auto back = parse_csv_row(to_csv_row(r));
  EXPECT_EQ(back.mode, r.mode);
  EXPECT_EQ(back.frames, r.frames);
  EXPECT_EQ(back.seconds, r.seconds);
  EXPECT_EQ(back.fps, r.fps);
  EXPECT_EQ(back.max_q1, r.max_q1);
  EXPECT_EQ(back.max_q2, r.max_q2);
  EXPECT_EQ(to_csv_row(back), to_csv_row(r));
  EXPECT_THROW(parse_csv_row("parallel,mixed,4"), ParseError);
  EXPECT_THROW(parse_csv_row("warp,mixed,4,1,1,1,1,1"), ConfigError);
}

TEST(Modes, Validation) {
  EXPECT_THROW(validate(PipelineMode{ExecutionMode::Serial, Precision::Full, 4}), ConfigError);
  EXPECT_THROW(validate(PipelineMode{ExecutionMode::Parallel, Precision::Full, 0}), ConfigError);
  EXPECT_THROW(parse_execution_mode("turbo"), ConfigError);
  EXPECT_THROW(parse_precision("half"), ConfigError);
  EXPECT_EQ(parse_execution_mode("batched"), ExecutionMode::BatchedSerial);
}

TEST(Run, AllModesProduceIdenticalOutputs) {
  const SyntheticSource source(scene(10, 100), 3);
  for (auto precision : {Precision::Full, Precision::Mixed}) {
    std::string per_precision;
    for (PipelineMode m : {PipelineMode{ExecutionMode::Serial, precision, 1},
                           PipelineMode{ExecutionMode::BatchedSerial, precision, 3},
                           PipelineMode{ExecutionMode::Parallel, precision, 1},
                           PipelineMode{ExecutionMode::Parallel, precision, 7}}) {
      Tracker t(tracker_config());
      const auto r = run(source, t, m, no_emulation());
      ASSERT_EQ(r.outputs.size(), 100u);
      for (int i = 0; i < 100; ++i) EXPECT_EQ(r.outputs[i].frame_index, i);
      const auto text = mot_text(r);
      if (per_precision.empty()) per_precision = text;
      EXPECT_EQ(text, per_precision) << to_string(m.execution) << " " << m.batch_size;
    }
    EXPECT_FALSE(per_precision.empty());
  }
}

TEST(Run, ThreadCapsKeepOutputs) {
  const SyntheticSource source(scene(6, 60), 8);
  std::string reference;
  for (int cap : {0, 1, 2, 3}) {
    auto cfg = no_emulation();
    cfg.max_threads = cap;
    Tracker t(tracker_config());
    const auto text = mot_text(run(source, t, {ExecutionMode::Parallel, Precision::Full, 4}, cfg));
    if (reference.empty()) reference = text;
    EXPECT_EQ(text, reference) << cap;
  }
}

TEST(Run, SmallQueuesApplyBackpressure) {
  const SyntheticSource source(scene(4, 80), 2);
  auto cfg = no_emulation();
  cfg.q1_capacity = 2;
  cfg.q2_capacity = 1;
  Tracker t(tracker_config());
  const auto r = run(source, t, {ExecutionMode::Parallel, Precision::Full, 2}, cfg);
  EXPECT_EQ(r.outputs.size(), 80u);
  EXPECT_LE(r.report.max_q1, 2u);
  EXPECT_LE(r.report.max_q2, 1u);
}

TEST(Run, ErrorsPropagateFromEveryStage) {
  for (bool in_capture : {true, false}) {
    for (auto mode : {PipelineMode{ExecutionMode::Serial, Precision::Full, 1},
                      PipelineMode{ExecutionMode::Parallel, Precision::Full, 4}}) {
      const ThrowingSource source(57, in_capture);
      Tracker t(tracker_config());
      EXPECT_THROW(run(source, t, mode, no_emulation()), InputError);
    }
  }
  // A malformed frame fails in post-processing; upstream threads are aborted.
  const BadRowSource bad;
  Tracker t(tracker_config());
  EXPECT_THROW(run(bad, t, {ExecutionMode::Parallel, Precision::Full, 2}, no_emulation()), LayoutError);
}

TEST(Run, EmptySourceIsNotAnError) {
  const SyntheticSource source(scene(3, 0), 1);
  Tracker t(tracker_config());
  const auto r = run(source, t, {ExecutionMode::Parallel, Precision::Full, 4}, no_emulation());
  EXPECT_TRUE(r.outputs.empty());
  EXPECT_EQ(r.report.frames, 0);
}

TEST(Quantize, OnlyEmbeddingColumnsChange) {
  RawModelOutput raw(kRowHeader + 2);
  raw.append({0.1, 0.2, 10.3, 20.7}, 0.91, 0.77, std::vector<float>{0.1f, 0.3f});
  const auto q = quantize_embeddings(raw);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(q.row(0)[k], raw.row(0)[k]);
  EXPECT_EQ(q.row(0)[6], round_to_binary16(raw.row(0)[6]));
  EXPECT_NE(q.row(0)[6], raw.row(0)[6]);
}

TEST(Predicted, Examples) {
  const EmulationConfig e;
  EXPECT_NEAR(predicted_fps(e, {ExecutionMode::Serial, Precision::Full, 1}, 20), 1000.0 / 52.5, 1e-9);
  const double par = predicted_fps(e, {ExecutionMode::Parallel, Precision::Mixed, 4}, 20);
  EXPECT_NEAR(par, 1000.0 / (114.896 / 4), 1e-9);
  EXPECT_NEAR(par, 34.8, 0.05);
  EXPECT_GE(par, 1.45 * predicted_fps(e, {ExecutionMode::Serial, Precision::Full, 1}, 20));
}

TEST(Run, EmulatedSerialThroughputNearPrediction) {
  const SyntheticSource source(scene(20, 40), 4);
  PipelineConfig cfg;
  Tracker t(tracker_config());
  const auto r = run(source, t, {ExecutionMode::Serial, Precision::Full, 1}, cfg);
  const double expected = predicted_fps(cfg.emulation, r.report.mode, r.report.mean_detections);
  EXPECT_NEAR(r.report.fps, expected, 0.1 * expected);
  EXPECT_EQ(r.report.frames, 30);
}
