#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "trackforge/detgen.hpp"
#include "trackforge/pipeline.hpp"
#include "trackforge/tracker.hpp"

namespace trackforge {

using nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError("'" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown key '" + section + "." + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("'" + section + "." + key + "': " + e.what());
  }
}

}  // namespace detail

inline void apply_json(const json& j, KalmanNoise& k) {
  detail::reject_unknown(j,
                         {"std_weight_position", "std_weight_velocity", "std_aspect", "std_aspect_velocity",
                          "std_aspect_measurement"},
                         "tracker.kalman");
  detail::read(j, "std_weight_position", k.std_weight_position, "tracker.kalman");
  detail::read(j, "std_weight_velocity", k.std_weight_velocity, "tracker.kalman");
  detail::read(j, "std_aspect", k.std_aspect, "tracker.kalman");
  detail::read(j, "std_aspect_velocity", k.std_aspect_velocity, "tracker.kalman");
  detail::read(j, "std_aspect_measurement", k.std_aspect_measurement, "tracker.kalman");
}

inline void apply_json(const json& j, TrackerConfig& c) {
  const std::string s = "tracker";
  detail::reject_unknown(j,
                         {"conf_threshold", "nms_iou_threshold", "gate_metric", "gate_threshold", "euclidean_gate_px",
                          "max_cost", "smoothing_alpha", "max_lost", "min_hits", "embedding_dim", "kalman"},
                         s);
  detail::read(j, "conf_threshold", c.conf_threshold, s);
  detail::read(j, "nms_iou_threshold", c.nms_iou_threshold, s);
  if (j.contains("gate_metric")) {
    std::string m;
    detail::read(j, "gate_metric", m, s);
    if (m == "mahalanobis") {
      c.gate_metric = GateMetric::Mahalanobis;
    } else if (m == "euclidean") {
      c.gate_metric = GateMetric::Euclidean;
    } else {
      throw ConfigError("tracker.gate_metric must be 'mahalanobis' or 'euclidean'");
    }
  }
  detail::read(j, "gate_threshold", c.gate_threshold, s);
  detail::read(j, "euclidean_gate_px", c.euclidean_gate_px, s);
  detail::read(j, "max_cost", c.max_cost, s);
  detail::read(j, "smoothing_alpha", c.smoothing_alpha, s);
  detail::read(j, "max_lost", c.max_lost, s);
  detail::read(j, "min_hits", c.min_hits, s);
  detail::read(j, "embedding_dim", c.embedding_dim, s);
  if (j.contains("kalman")) apply_json(j.at("kalman"), c.kalman);
  validate(c);
}

inline void apply_json(const json& j, EmulationConfig& e) {
  const std::string s = "emulation";
  detail::reject_unknown(j,
                         {"enabled", "t_fixed_ms", "t_image_ms", "kappa_full", "kappa_mixed", "post_fixed_ms",
                          "post_per_detection_ms", "busy_wait"},
                         s);
  detail::read(j, "enabled", e.enabled, s);
  detail::read(j, "t_fixed_ms", e.t_fixed_ms, s);
  detail::read(j, "t_image_ms", e.t_image_ms, s);
  detail::read(j, "kappa_full", e.kappa_full, s);
  detail::read(j, "kappa_mixed", e.kappa_mixed, s);
  detail::read(j, "post_fixed_ms", e.post_fixed_ms, s);
  detail::read(j, "post_per_detection_ms", e.post_per_detection_ms, s);
  detail::read(j, "busy_wait", e.busy_wait, s);
}

inline void apply_json(const json& j, PipelineConfig& c) {
  const std::string s = "pipeline";
  detail::reject_unknown(j, {"q1_capacity", "q2_capacity", "warmup_frames", "max_threads"}, s);
  detail::read(j, "q1_capacity", c.q1_capacity, s);
  detail::read(j, "q2_capacity", c.q2_capacity, s);
  detail::read(j, "warmup_frames", c.warmup_frames, s);
  detail::read(j, "max_threads", c.max_threads, s);
}

inline void apply_json(const json& j, ScenarioConfig& c) {
  const std::string s = "scenario";
  detail::reject_unknown(j,
                         {"num_objects", "num_frames", "frame_width", "frame_height", "embedding_dim", "p_miss",
                          "lambda_fp", "sigma_box", "sigma_emb", "sigma_score", "separation_margin", "max_speed",
                          "full_lifetime"},
                         s);
  detail::read(j, "num_objects", c.num_objects, s);
  detail::read(j, "num_frames", c.num_frames, s);
  detail::read(j, "frame_width", c.frame_width, s);
  detail::read(j, "frame_height", c.frame_height, s);
  detail::read(j, "embedding_dim", c.embedding_dim, s);
  detail::read(j, "p_miss", c.p_miss, s);
  detail::read(j, "lambda_fp", c.lambda_fp, s);
  detail::read(j, "sigma_box", c.sigma_box, s);
  detail::read(j, "sigma_emb", c.sigma_emb, s);
  detail::read(j, "sigma_score", c.sigma_score, s);
  detail::read(j, "separation_margin", c.separation_margin, s);
  detail::read(j, "max_speed", c.max_speed, s);
  detail::read(j, "full_lifetime", c.full_lifetime, s);
  validate(c);
}

inline json to_json(const ScenarioConfig& c) {
  return json{{"num_objects", c.num_objects},
              {"num_frames", c.num_frames},
              {"frame_width", c.frame_width},
              {"frame_height", c.frame_height},
              {"embedding_dim", c.embedding_dim},
              {"p_miss", c.p_miss},
              {"lambda_fp", c.lambda_fp},
              {"sigma_box", c.sigma_box},
              {"sigma_emb", c.sigma_emb},
              {"sigma_score", c.sigma_score},
              {"separation_margin", c.separation_margin},
              {"max_speed", c.max_speed},
              {"full_lifetime", c.full_lifetime}};
}

/// Everything a run can be configured with. Each section is optional.
struct RunSettings {
  TrackerConfig tracker;
  PipelineConfig pipeline;
  ScenarioConfig scenario;
  std::uint64_t seed = 0;
  bool has_scenario = false;
};

inline void apply_json(const json& j, RunSettings& r) {
  detail::reject_unknown(j, {"tracker", "emulation", "pipeline", "scenario", "seed"}, "<root>");
  if (j.contains("tracker")) apply_json(j.at("tracker"), r.tracker);
  if (j.contains("emulation")) apply_json(j.at("emulation"), r.pipeline.emulation);
  if (j.contains("pipeline")) apply_json(j.at("pipeline"), r.pipeline);
  if (j.contains("scenario")) {
    apply_json(j.at("scenario"), r.scenario);
    r.has_scenario = true;
  }
  detail::read(j, "seed", r.seed, "<root>");
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace trackforge
