#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "trackforge/detgen.hpp"
#include "trackforge/tracker.hpp"

using namespace trackforge;

namespace {

Embedding axis(std::size_t dim, std::size_t k) {
  Embedding e(dim);
  e[k] = 1.0f;
  return e;
}

TrackerConfig small_config(std::size_t dim = 8) {
  TrackerConfig c;
  c.embedding_dim = dim;
  return c;
}

Detection det(BoundingBox b, const Embedding& e, double score = 0.9) { return {b, score, 1.0, e}; }

ScenarioConfig separable(int objects, int frames, std::size_t dim) {
  ScenarioConfig c;
  c.num_objects = objects;
  c.num_frames = frames;
  c.embedding_dim = dim;
  c.separation_margin = 0.5;
  c.full_lifetime = false;
  return c;
}

std::vector<Detection> detections_of(const FrameSample& s, std::size_t dim) { return parse_output(s.output, dim); }

}  // namespace

TEST(Tracker, EmptyInputEmptyOutput) {
  Tracker t(small_config());
  const auto out = t.step(0, {});
  EXPECT_TRUE(out.objects.empty());
  EXPECT_TRUE(t.tracks().empty());
}

TEST(Tracker, RedetectionKeepsId) {
  Tracker t(small_config());
  const auto e = axis(8, 0);
  const auto a = t.step(0, {det({100, 100, 40, 80}, e)});
  ASSERT_EQ(a.objects.size(), 1u);
  EXPECT_EQ(a.objects[0].track_id, 1);
  const auto b = t.step(1, {det({102, 101, 40, 80}, e)});
  ASSERT_EQ(b.objects.size(), 1u);
  EXPECT_EQ(b.objects[0].track_id, 1);
  EXPECT_EQ(t.next_track_id(), 2);
}

TEST(Tracker, OutOfOrderFrameRejected) {
  Tracker t(small_config());
  t.step(3, {});
  EXPECT_THROW(t.step(3, {}), OrderingError);
  EXPECT_THROW(t.step(1, {}), OrderingError);
}

TEST(Tracker, RemovalAfterMaxLost) {
  auto cfg = small_config();
  cfg.max_lost = 5;
  Tracker t(cfg);
  t.step(0, {det({100, 100, 40, 80}, axis(8, 0))});
  for (int f = 1; f <= 5; ++f) {
    t.step(f, {});
    ASSERT_EQ(t.tracks().size(), 1u) << f;
    EXPECT_EQ(t.tracks()[0].state, TrackState::Lost);
    EXPECT_EQ(t.tracks()[0].lost_since, 1);
  }
  const auto out = t.step(6, {});
  EXPECT_TRUE(out.objects.empty());
  EXPECT_TRUE(t.tracks().empty());
  ASSERT_EQ(t.removed_tracks().size(), 1u);
  EXPECT_EQ(t.removed_tracks()[0].state, TrackState::Removed);
  EXPECT_EQ(t.last_step().removed, std::vector<long>{1});

  // The same object coming back later gets a fresh id.
  const auto back = t.step(7, {det({100, 100, 40, 80}, axis(8, 0))});
  ASSERT_EQ(back.objects.size(), 1u);
  EXPECT_EQ(back.objects[0].track_id, 2);
}

TEST(Tracker, LostTrackRecoversWithinWindow) {
  Tracker t(small_config());
  t.step(0, {det({100, 100, 40, 80}, axis(8, 0))});
  t.step(1, {});
  t.step(2, {});
  const auto out = t.step(3, {det({100, 100, 40, 80}, axis(8, 0))});
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0].track_id, 1);
  EXPECT_EQ(t.tracks()[0].state, TrackState::Active);
  EXPECT_FALSE(t.tracks()[0].lost_since.has_value());
}

TEST(Tracker, AppearanceMismatchSpawnsNewTrack) {
  Tracker t(small_config());
  t.step(0, {det({100, 100, 40, 80}, axis(8, 0))});
  const auto out = t.step(1, {det({100, 100, 40, 80}, axis(8, 1))});
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0].track_id, 2);
  EXPECT_EQ(t.last_step().newly_lost, std::vector<long>{1});
}

TEST(Tracker, GateRejectsDistantDetection) {
  Tracker t(small_config());
  t.step(0, {det({100, 100, 40, 80}, axis(8, 0))});
  const auto out = t.step(1, {det({900, 600, 40, 80}, axis(8, 0))});
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0].track_id, 2);
}

TEST(Tracker, LowConfidenceIgnoredAndDuplicatesSuppressed) {
  Tracker t(small_config());
  const auto out = t.step(0, {det({100, 100, 40, 80}, axis(8, 0), 0.3), det({300, 100, 40, 80}, axis(8, 1), 0.9),
                              det({301, 101, 40, 80}, axis(8, 1), 0.8)});
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(t.last_step().detections_after_nms, 1u);
}

TEST(Tracker, MinHitsDelaysOutput) {
  auto cfg = small_config();
  cfg.min_hits = 2;
  Tracker t(cfg);
  EXPECT_TRUE(t.step(0, {det({100, 100, 40, 80}, axis(8, 0))}).objects.empty());
  EXPECT_EQ(t.step(1, {det({101, 100, 40, 80}, axis(8, 0))}).objects.size(), 1u);
}

TEST(Tracker, ConfigValidation) {
  auto cfg = small_config();
  cfg.smoothing_alpha = 1.5;
  EXPECT_THROW(Tracker{cfg}, ConfigError);
  cfg = small_config();
  cfg.min_hits = 0;
  EXPECT_THROW(Tracker{cfg}, ConfigError);
}

TEST(Tracker, DimensionMismatch) {
  Tracker t(small_config(8));
  EXPECT_THROW(t.step(0, {det({0, 0, 4, 8}, axis(4, 0))}), DimensionError);
}

TEST(Smoothing, Examples) {
  const auto a = axis(4, 0), b = axis(4, 1);
  EXPECT_EQ(smooth_embedding(a, b, 1.0), a);
  EXPECT_EQ(smooth_embedding(a, b, 0.0), b);
  const auto mid = smooth_embedding(a, b, 0.5);
  EXPECT_NEAR(cosine_distance(mid, a), 1.0 - 1.0 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(cosine_distance(mid, b), 1.0 - 1.0 / std::sqrt(2.0), 1e-7);
  Embedding neg(4);
  neg[0] = -1.0f;
  EXPECT_THROW(smooth_embedding(a, neg, 0.5), DegenerateEmbeddingError);
}

TEST(Tracker, DeterministicOnNoisyStream) {
  auto cfg = separable(10, 80, 32);
  cfg.sigma_box = 2;
  cfg.sigma_emb = 0.3;
  cfg.lambda_fp = 1.5;
  cfg.p_miss = 0.1;
  cfg.sigma_score = 0.1;
  const Scenario s(cfg, 5);
  Tracker a(small_config(32)), b(small_config(32));
  for (int f = 0; f < 80; ++f) {
    const auto d = detections_of(s.generate_frame(f), 32);
    EXPECT_EQ(a.step(f, d), b.step(f, d));
  }
}

// Lifecycle properties over randomized noisy scenes.
TEST(Tracker, LifecycleInvariants) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto cfg = separable(12, 120, 32);
    cfg.sigma_box = 3;
    cfg.sigma_emb = 0.4;
    cfg.lambda_fp = 2.0;
    cfg.p_miss = 0.3;
    cfg.sigma_score = 0.2;
    const Scenario s(cfg, seed);
    auto tcfg = small_config(32);
    tcfg.max_lost = 4;
    Tracker t(tcfg);
    std::set<long> removed, seen;
    long max_id = 0;
    for (int f = 0; f < cfg.num_frames; ++f) {
      std::map<long, TrackState> before;
      for (const auto& tr : t.tracks()) before[tr.track_id] = tr.state;
      const auto out = t.step(f, detections_of(s.generate_frame(f), 32));
      const auto& tr = t.last_step();

      std::set<long> matched;
      for (const auto& [id, j] : tr.matched) matched.insert(id);
      for (const auto& [id, state] : before) {
        if (!matched.count(id) && state == TrackState::Active) {
          EXPECT_NE(std::find(tr.newly_lost.begin(), tr.newly_lost.end(), id), tr.newly_lost.end());
        }
      }
      EXPECT_EQ(tr.spawned.size(), tr.unmatched_detections);
      EXPECT_EQ(tr.matched.size() + tr.unmatched_detections, tr.detections_after_nms);
      for (long id : tr.spawned) {
        EXPECT_GT(id, max_id);
        EXPECT_FALSE(seen.count(id));
        max_id = id;
      }
      for (long id : tr.removed) removed.insert(id);

      std::set<long> ids;
      for (const auto& o : out.objects) {
        EXPECT_TRUE(ids.insert(o.track_id).second);
        EXPECT_FALSE(removed.count(o.track_id));
        seen.insert(o.track_id);
      }
      for (std::size_t i = 0; i < t.tracks().size(); ++i) {
        const auto& x = t.tracks()[i];
        EXPECT_FALSE(removed.count(x.track_id));
        if (i > 0) {
          EXPECT_LT(t.tracks()[i - 1].track_id, x.track_id);
        }
        EXPECT_EQ(x.state == TrackState::Active, !x.lost_since.has_value());
        if (x.lost_since) {
          EXPECT_LE(f - *x.lost_since + 1, tcfg.max_lost);
        }
      }
    }
  }
}

TEST(Tracker, IdentityConservationOnSeparableScene) {
  const auto cfg = separable(15, 150, 64);
  const Scenario s(cfg, 123);
  Tracker t(small_config(64));
  std::map<long, long> gt_to_track;
  std::map<long, long> track_to_gt;
  for (int f = 0; f < cfg.num_frames; ++f) {
    const auto sample = s.generate_frame(f);
    const auto out = t.step(f, detections_of(sample, 64));
    ASSERT_EQ(out.objects.size(), sample.ground_truth.size());
    for (std::size_t i = 0; i < out.objects.size(); ++i) {
      // Output order is ascending track id; match by overlap instead.
      const auto& o = out.objects[i];
      long gt_id = -1;
      for (const auto& g : sample.ground_truth) {
        if (iou(g.box, o.box) > 0.9) gt_id = g.object_id;
      }
      ASSERT_NE(gt_id, -1);
      auto [it, fresh] = gt_to_track.emplace(gt_id, o.track_id);
      EXPECT_EQ(it->second, o.track_id);
      auto [jt, fresh2] = track_to_gt.emplace(o.track_id, gt_id);
      EXPECT_EQ(jt->second, gt_id);
    }
  }
}
