#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "trackforge/assoc.hpp"
#include "trackforge/core.hpp"
#include "trackforge/motion.hpp"
#include "trackforge/postproc.hpp"

namespace trackforge {

enum class TrackState { Active, Lost, Removed };

inline const char* to_string(TrackState s) {
  switch (s) {
    case TrackState::Active: return "active";
    case TrackState::Lost: return "lost";
    case TrackState::Removed: return "removed";
  }
  return "?";
}

enum class GateMetric { Mahalanobis, Euclidean };

struct TrackerConfig {
  double conf_threshold = 0.5;
  double nms_iou_threshold = 0.4;
  GateMetric gate_metric = GateMetric::Mahalanobis;
  /// Squared Mahalanobis threshold (chi-square 0.95, 4 dof).
  double gate_threshold = kChi2Gate4;
  /// Centre distance limit in pixels when gate_metric is Euclidean.
  double euclidean_gate_px = 100.0;
  double max_cost = 0.7;
  double smoothing_alpha = 0.9;
  int max_lost = 30;
  /// Tracks are reported once they have this many updates (1 = immediately).
  int min_hits = 1;
  std::size_t embedding_dim = kEmbeddingDim;
  KalmanNoise kalman;
};

inline void validate(const TrackerConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("tracker: " + m); };
  if (!(c.conf_threshold >= 0.0 && c.conf_threshold <= 1.0)) fail("conf_threshold must lie in [0,1]");
  if (!(c.nms_iou_threshold > 0.0 && c.nms_iou_threshold < 1.0)) fail("nms_iou_threshold must lie in (0,1)");
  if (!(c.gate_threshold > 0.0) || !(c.euclidean_gate_px > 0.0)) fail("gate thresholds must be positive");
  if (!(c.max_cost >= 0.0)) fail("max_cost must be >= 0");
  if (!(c.smoothing_alpha >= 0.0 && c.smoothing_alpha <= 1.0)) fail("smoothing_alpha must lie in [0,1]");
  if (c.max_lost < 0) fail("max_lost must be >= 0");
  if (c.min_hits < 1) fail("min_hits must be >= 1");
  if (c.embedding_dim == 0) fail("embedding_dim must be positive");
}

struct Track {
  long track_id = 0;
  TrackState state = TrackState::Active;
  KalmanState kalman;
  Embedding smooth_embedding;
  int last_update_frame = 0;
  std::optional<int> lost_since;
  int hits = 0;
  double last_objectness = 0.0;
};

struct TrackedObject {
  long track_id = 0;
  BoundingBox box;
  double objectness = 0.0;

  friend bool operator==(const TrackedObject&, const TrackedObject&) = default;
};

struct TrackerOutput {
  int frame_index = 0;
  std::vector<TrackedObject> objects;

  friend bool operator==(const TrackerOutput&, const TrackerOutput&) = default;
};

/// What the last step() did, for inspection and lifecycle checks.
struct StepTrace {
  int frame_index = 0;
  std::size_t detections_after_nms = 0;
  std::vector<std::pair<long, std::size_t>> matched;  // (track id, detection index)
  std::vector<long> newly_lost;
  std::vector<long> removed;
  std::vector<long> spawned;
  std::size_t unmatched_detections = 0;
};

/// normalize(alpha * old + (1 - alpha) * new)
inline Embedding smooth_embedding(const Embedding& old_e, const Embedding& new_e, double alpha) {
  if (old_e.size() != new_e.size()) throw DimensionError("smoothing embeddings of different lengths");
  Embedding mix(old_e.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix[i] = static_cast<float>(alpha * old_e[i] + (1.0 - alpha) * new_e[i]);
  }
  return normalize(mix);
}

/// Per-frame tracking-by-detection post-processing with an
/// Active -> Lost -> Removed track lifecycle. Single owner; step() calls
/// must arrive in strictly increasing frame order.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {}) : config_(config), filter_(config.kalman) { validate(config_); }

  const TrackerConfig& config() const { return config_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  const std::vector<Track>& removed_tracks() const { return removed_; }
  const StepTrace& last_step() const { return trace_; }
  long next_track_id() const { return next_id_; }

  TrackerOutput step(int frame_index, const std::vector<Detection>& detections) {
    if (last_frame_ && frame_index <= *last_frame_) {
      throw OrderingError("frame " + std::to_string(frame_index) + " arrived after frame " +
                          std::to_string(*last_frame_));
    }
    last_frame_ = frame_index;
    trace_ = StepTrace{};
    trace_.frame_index = frame_index;

    const auto dets = nms(filter_confidence(detections, config_.conf_threshold), config_.nms_iou_threshold);
    trace_.detections_after_nms = dets.size();
    for (const auto& d : dets) {
      if (d.embedding.size() != config_.embedding_dim) throw DimensionError("detection embedding length mismatch");
    }

    for (auto& t : tracks_) t.kalman = filter_.predict(t.kalman);

    const Assignment assignment = associate(dets);

    for (const auto& m : assignment.matches) {
      Track& t = tracks_[m.track];
      const Detection& d = dets[m.detection];
      t.kalman = filter_.update(t.kalman, box_to_measurement(d.box));
      t.smooth_embedding = smooth_embedding(t.smooth_embedding, d.embedding, config_.smoothing_alpha);
      t.state = TrackState::Active;
      t.lost_since.reset();
      t.last_update_frame = frame_index;
      t.last_objectness = d.objectness;
      ++t.hits;
      trace_.matched.emplace_back(t.track_id, m.detection);
    }

    for (auto idx : assignment.unmatched_tracks) {
      Track& t = tracks_[idx];
      if (t.state == TrackState::Active) {
        t.state = TrackState::Lost;
        t.lost_since = frame_index;
        trace_.newly_lost.push_back(t.track_id);
      }
    }

    std::vector<Track> kept;
    kept.reserve(tracks_.size());
    for (auto& t : tracks_) {
      if (t.state == TrackState::Lost && frame_index - *t.lost_since + 1 > config_.max_lost) {
        t.state = TrackState::Removed;
        trace_.removed.push_back(t.track_id);
        removed_.push_back(std::move(t));
      } else {
        kept.push_back(std::move(t));
      }
    }
    tracks_ = std::move(kept);

    trace_.unmatched_detections = assignment.unmatched_detections.size();
    for (auto j : assignment.unmatched_detections) {
      const Detection& d = dets[j];
      Track t;
      t.track_id = next_id_++;
      t.state = TrackState::Active;
      t.kalman = filter_.initiate(box_to_measurement(d.box));
      t.smooth_embedding = d.embedding;
      t.last_update_frame = frame_index;
      t.last_objectness = d.objectness;
      t.hits = 1;
      trace_.spawned.push_back(t.track_id);
      tracks_.push_back(std::move(t));
    }

    TrackerOutput out;
    out.frame_index = frame_index;
    for (const auto& t : tracks_) {
      if (t.state == TrackState::Active && t.last_update_frame == frame_index && t.hits >= config_.min_hits) {
        out.objects.push_back({t.track_id, KalmanFilter::box_of(t.kalman), t.last_objectness});
      }
    }
    return out;
  }

 private:
  Assignment associate(const std::vector<Detection>& dets) const {
    std::vector<Embedding> track_emb;
    track_emb.reserve(tracks_.size());
    for (const auto& t : tracks_) track_emb.push_back(t.smooth_embedding);
    std::vector<Embedding> det_emb;
    det_emb.reserve(dets.size());
    for (const auto& d : dets) det_emb.push_back(d.embedding);

    const CostMatrix cost = build_cost_matrix(track_emb, det_emb);

    std::vector<Measurement> meas;
    meas.reserve(dets.size());
    for (const auto& d : dets) meas.push_back(box_to_measurement(d.box));
    CostMatrix gate(tracks_.size(), dets.size());
    double threshold = config_.gate_threshold;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
      if (config_.gate_metric == GateMetric::Mahalanobis) {
        const auto dist = filter_.gating_distance(tracks_[i].kalman, meas);
        for (std::size_t j = 0; j < dets.size(); ++j) gate(i, j) = dist[j];
      } else {
        const auto& mean = tracks_[i].kalman.mean;
        for (std::size_t j = 0; j < dets.size(); ++j) {
          const double dx = meas[j][0] - mean(0);
          const double dy = meas[j][1] - mean(1);
          gate(i, j) = dx * dx + dy * dy;
        }
      }
    }
    if (config_.gate_metric == GateMetric::Euclidean) threshold = config_.euclidean_gate_px * config_.euclidean_gate_px;

    const CostMatrix gated = apply_gate(cost, gate, threshold);
    return match_with_threshold(hungarian_solve(gated), gated, config_.max_cost);
  }

  TrackerConfig config_;
  KalmanFilter filter_;
  std::vector<Track> tracks_;  // Active and Lost, ascending id
  std::vector<Track> removed_;
  std::optional<int> last_frame_;
  long next_id_ = 1;
  StepTrace trace_;
};

}  // namespace trackforge
