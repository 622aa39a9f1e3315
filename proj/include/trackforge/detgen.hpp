#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "trackforge/core.hpp"
#include "trackforge/mot_format.hpp"
#include "trackforge/raw_output.hpp"

namespace trackforge {

// ---------------------------------------------------------------------------
// Synthetic scenario generator
// ---------------------------------------------------------------------------

struct ScenarioConfig {
  int num_objects = 20;
  int num_frames = 300;
  double frame_width = 1920.0;
  double frame_height = 1080.0;
  std::size_t embedding_dim = kEmbeddingDim;
  /// Probability that a live object produces no detection in a frame.
  double p_miss = 0.0;
  /// Mean number of false-positive detections per frame (Poisson).
  double lambda_fp = 0.0;
  /// Std of the per-coordinate box jitter, pixels.
  double sigma_box = 0.0;
  /// Expected norm of the appearance perturbation added to the identity
  /// vector (per-component std is sigma_emb / sqrt(dim)).
  double sigma_emb = 0.0;
  /// Std of objectness around 0.9.
  double sigma_score = 0.0;
  /// Minimum pairwise cosine distance between identity embeddings.
  double separation_margin = 0.5;
  /// Maximum absolute horizontal speed, pixels/frame.
  double max_speed = 4.0;
  /// Objects live for the whole sequence instead of random sub-intervals.
  bool full_lifetime = false;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

inline void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("scenario: " + m); };
  if (c.num_objects < 0) fail("num_objects must be >= 0");
  if (c.num_frames < 0) fail("num_frames must be >= 0");
  if (!(c.frame_width > 0) || !(c.frame_height > 0)) fail("frame dimensions must be positive");
  if (c.embedding_dim == 0) fail("embedding_dim must be positive");
  if (!(c.p_miss >= 0.0 && c.p_miss <= 1.0)) fail("p_miss must lie in [0,1]");
  if (!(c.lambda_fp >= 0.0)) fail("lambda_fp must be >= 0");
  if (!(c.sigma_box >= 0.0) || !(c.sigma_emb >= 0.0) || !(c.sigma_score >= 0.0)) fail("noise stds must be >= 0");
  if (!(c.separation_margin >= 0.0 && c.separation_margin <= 2.0)) fail("separation_margin must lie in [0,2]");
  if (!(c.max_speed >= 0.0)) fail("max_speed must be >= 0");
}

struct ScenarioObject {
  long object_id = 0;
  int spawn_frame = 0;
  int despawn_frame = 0;  // exclusive
  BoundingBox initial_box;
  double vx = 0.0;
  double vy = 0.0;
  Embedding identity_embedding;

  bool alive_at(int frame) const { return frame >= spawn_frame && frame < despawn_frame; }

  BoundingBox box_at(int frame) const {
    const double dt = frame - spawn_frame;
    return {initial_box.x + vx * dt, initial_box.y + vy * dt, initial_box.w, initial_box.h};
  }
};

struct GroundTruthEntry {
  long object_id = 0;
  BoundingBox box;

  friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

struct FrameSample {
  RawModelOutput output;
  std::vector<GroundTruthEntry> ground_truth;
};

namespace detail {

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline Embedding random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    Embedding e(dim);
    for (std::size_t i = 0; i < dim; ++i) e[i] = static_cast<float>(gauss(rng));
    if (e.norm() > 1e-6) return normalize(e);
  }
}

}  // namespace detail

/// A seeded scene: objects move at constant velocity in disjoint horizontal
/// lanes so true boxes never overlap. Immutable after construction.
class Scenario {
 public:
  static constexpr int kMaxEmbeddingDraws = 1000;

  Scenario(ScenarioConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
    validate(config_);
    build_objects();
  }

  const ScenarioConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<ScenarioObject>& objects() const { return objects_; }

  std::vector<GroundTruthEntry> ground_truth(int frame_index) const {
    std::vector<GroundTruthEntry> gt;
    for (const auto& o : objects_) {
      if (o.alive_at(frame_index)) gt.push_back({o.object_id, o.box_at(frame_index)});
    }
    return gt;
  }

  /// Detections and truth for one frame; a pure function of
  /// (config, seed, frame_index).
  FrameSample generate_frame(int frame_index) const {
    if (frame_index < 0) throw ConfigError("frame_index must be >= 0");
    const std::size_t dim = config_.embedding_dim;
    FrameSample sample{RawModelOutput(kRowHeader + dim), ground_truth(frame_index)};
    auto rng = detail::make_rng(seed_, 1, static_cast<std::uint64_t>(frame_index));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double emb_std = config_.sigma_emb / std::sqrt(static_cast<double>(dim));

    for (const auto& o : objects_) {
      if (!o.alive_at(frame_index)) continue;
      const bool missed = unit(rng) < config_.p_miss;
      if (missed) continue;
      BoundingBox b = o.box_at(frame_index);
      if (config_.sigma_box > 0.0) {
        b.x += config_.sigma_box * gauss(rng);
        b.y += config_.sigma_box * gauss(rng);
        b.w = std::max(1.0, b.w + config_.sigma_box * gauss(rng));
        b.h = std::max(1.0, b.h + config_.sigma_box * gauss(rng));
      }
      Embedding e = o.identity_embedding;
      if (emb_std > 0.0) {
        for (std::size_t i = 0; i < dim; ++i) e[i] = static_cast<float>(e[i] + emb_std * gauss(rng));
      }
      e = normalize(e);
      double score = 0.9;
      if (config_.sigma_score > 0.0) score += config_.sigma_score * gauss(rng);
      sample.output.append(b, std::clamp(score, 0.0, 1.0), 1.0, e.values());
    }

    if (config_.lambda_fp > 0.0) {
      std::poisson_distribution<int> fp_count(config_.lambda_fp);
      const int n = fp_count(rng);
      for (int k = 0; k < n; ++k) {
        const double h = 30.0 + 90.0 * unit(rng);
        const double w = h * (0.35 + 0.15 * unit(rng));
        const double x = unit(rng) * std::max(1.0, config_.frame_width - w);
        const double y = unit(rng) * std::max(1.0, config_.frame_height - h);
        const double score = unit(rng);
        const Embedding e = detail::random_unit(dim, rng);
        sample.output.append({x, y, w, h}, score, 1.0, e.values());
      }
    }
    return sample;
  }

 private:
  void build_objects() {
    auto rng = detail::make_rng(seed_, 0, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = config_.num_objects;
    const int frames = config_.num_frames;
    const double lane_h = config_.frame_height / std::max(n, 1);
    objects_.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      ScenarioObject o;
      o.object_id = i + 1;
      if (config_.full_lifetime || frames < 4) {
        o.spawn_frame = 0;
        o.despawn_frame = frames;
      } else {
        o.spawn_frame = static_cast<int>(unit(rng) * (frames / 4));
        const int min_end = (3 * frames) / 4 + 1;
        o.despawn_frame = min_end + static_cast<int>(unit(rng) * (frames - min_end + 1));
        o.despawn_frame = std::clamp(o.despawn_frame, o.spawn_frame + 1, frames);
      }
      const double h = std::min(120.0, 0.8 * lane_h) * (0.75 + 0.25 * unit(rng));
      const double w = h * (0.35 + 0.15 * unit(rng));
      const double x = config_.frame_width * (0.1 + 0.8 * unit(rng)) - w / 2.0;
      const double y = lane_h * i + (lane_h - h) / 2.0;
      o.initial_box = {x, y, w, h};
      o.vx = config_.max_speed * (2.0 * unit(rng) - 1.0);
      o.vy = 0.0;
      o.identity_embedding = draw_identity(rng);
      objects_.push_back(std::move(o));
    }
  }

  Embedding draw_identity(std::mt19937_64& rng) const {
    for (int attempt = 0; attempt < kMaxEmbeddingDraws; ++attempt) {
      Embedding e = detail::random_unit(config_.embedding_dim, rng);
      const bool separated = std::all_of(objects_.begin(), objects_.end(), [&](const ScenarioObject& o) {
        return cosine_distance(o.identity_embedding, e) >= config_.separation_margin;
      });
      if (separated) return e;
    }
    throw ConfigError("could not draw identity embeddings with separation margin " +
                      std::to_string(config_.separation_margin) + " in dimension " +
                      std::to_string(config_.embedding_dim));
  }

  ScenarioConfig config_;
  std::uint64_t seed_;
  std::vector<ScenarioObject> objects_;
};

inline FrameSample generate_frame(const ScenarioConfig& config, int frame_index, std::uint64_t seed) {
  return Scenario(config, seed).generate_frame(frame_index);
}

// ---------------------------------------------------------------------------
// Inference latency emulation
// ---------------------------------------------------------------------------

/// Cost of one forward pass: t_fixed + batch * t_image * kappa (ms).
struct LatencyModel {
  double t_fixed_ms = 8.0;
  double t_image_ms = 34.0;
  double kappa = 1.0;
};

inline void validate(const LatencyModel& m) {
  if (!(m.t_fixed_ms > 0.0) || !(m.t_image_ms > 0.0)) throw ConfigError("latency times must be positive");
  if (!(m.kappa > 0.0 && m.kappa <= 1.0)) throw ConfigError("kappa must lie in (0,1]");
}

inline double emulated_latency(const LatencyModel& model, int batch_size) {
  validate(model);
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  return model.t_fixed_ms + batch_size * model.t_image_ms * model.kappa;
}

// ---------------------------------------------------------------------------
// File-backed detections
// ---------------------------------------------------------------------------

using DetectionMap = std::map<int, RawModelOutput>;

/// Reads a MOT16 det file into per-frame outputs of width 6 (no embedding).
/// Class score is set to 1.
inline DetectionMap load_mot_detections(const std::string& path) {
  DetectionMap out;
  for (const MotRow& r : read_mot_file(path)) {
    auto [it, inserted] = out.try_emplace(r.frame, kRowHeader);
    it->second.append(r.box, r.conf, 1.0);
  }
  return out;
}

inline constexpr char kSidecarMagic[4] = {'E', 'M', 'B', '1'};

struct SidecarRecord {
  std::uint32_t frame = 0;  // 0-indexed
  std::uint32_t det_index = 0;
  std::vector<float> values;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

}  // namespace detail

/// Sidecar layout, little-endian: "EMB1", u32 dim, then records of
/// (u32 frame, u32 det_index, dim x f32).
inline void write_embedding_sidecar(const std::string& path, std::uint32_t dim,
                                    const std::vector<SidecarRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.write(kSidecarMagic, 4);
  detail::put_u32(out, dim);
  for (const auto& r : records) {
    if (r.values.size() != dim) throw DimensionError("sidecar record length differs from declared dim");
    detail::put_u32(out, r.frame);
    detail::put_u32(out, r.det_index);
    for (float f : r.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_u32(out, bits);
    }
  }
}

inline std::pair<std::uint32_t, std::vector<SidecarRecord>> read_embedding_sidecar(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kSidecarMagic, 4) != 0) {
    throw ParseError(path + ": missing EMB1 magic");
  }
  std::uint32_t dim = 0;
  if (!detail::get_u32(in, dim)) throw ParseError(path + ": truncated header");
  std::vector<SidecarRecord> records;
  for (;;) {
    SidecarRecord r;
    if (!detail::get_u32(in, r.frame)) break;
    if (!detail::get_u32(in, r.det_index)) throw ParseError(path + ": truncated record");
    r.values.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      std::uint32_t bits;
      if (!detail::get_u32(in, bits)) throw ParseError(path + ": truncated record");
      std::memcpy(&r.values[i], &bits, 4);
    }
    records.push_back(std::move(r));
  }
  return {dim, std::move(records)};
}

/// Attaches sidecar embeddings (normalized on load) to plain detections.
/// Every detection needs exactly one record and vice versa.
inline DetectionMap load_embedding_sidecar(const std::string& path, const DetectionMap& detections,
                                           std::size_t expected_dim = kEmbeddingDim) {
  auto [dim, records] = read_embedding_sidecar(path);
  if (dim != expected_dim) {
    throw DimensionError(path + ": sidecar declares dim " + std::to_string(dim) + ", expected " +
                         std::to_string(expected_dim));
  }
  std::map<std::pair<int, std::size_t>, const SidecarRecord*> by_key;
  for (const auto& r : records) {
    const auto key = std::make_pair(static_cast<int>(r.frame), static_cast<std::size_t>(r.det_index));
    auto it = detections.find(key.first);
    if (it == detections.end() || key.second >= it->second.rows()) {
      throw ConsistencyError(path + ": record (frame " + std::to_string(key.first) + ", det " +
                             std::to_string(key.second) + ") has no matching detection");
    }
    if (!by_key.emplace(key, &r).second) {
      throw ConsistencyError(path + ": duplicate record (frame " + std::to_string(key.first) + ", det " +
                             std::to_string(key.second) + ")");
    }
  }

  DetectionMap out;
  for (const auto& [frame, raw] : detections) {
    RawModelOutput attached(kRowHeader + dim);
    for (std::size_t i = 0; i < raw.rows(); ++i) {
      auto it = by_key.find({frame, i});
      if (it == by_key.end()) {
        throw ConsistencyError(path + ": missing embedding for (frame " + std::to_string(frame) + ", det " +
                               std::to_string(i) + ")");
      }
      const Embedding e = normalize(Embedding(it->second->values));
      const auto row = raw.row(i);
      attached.append({row[0], row[1], row[2], row[3]}, row[4], row[5], e.values());
    }
    out.emplace(frame, std::move(attached));
  }
  return out;
}

}  // namespace trackforge
