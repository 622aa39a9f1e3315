#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trackforge/errors.hpp"

namespace trackforge {

/// Appearance embedding width emitted by the joint detection/embedding model.
inline constexpr std::size_t kEmbeddingDim = 512;

/// Number of leading values in a model output row before the embedding:
/// 4 box values, objectness, class score.
inline constexpr std::size_t kRowHeader = 6;

/// Axis-aligned box in pixels, stored as top-left corner plus extent ("tlwh").
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline bool is_valid(const BoundingBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
         b.w > 0.0 && b.h > 0.0;
}

inline void validate(const BoundingBox& b) {
  if (!is_valid(b)) {
    throw InvalidBoxError("box (" + std::to_string(b.x) + "," + std::to_string(b.y) + "," +
                          std::to_string(b.w) + "," + std::to_string(b.h) +
                          ") must be finite with positive width and height");
  }
}

/// Intersection over union. Symmetric, in [0,1], 0 for disjoint boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  validate(a);
  validate(b);
  const double ix = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double iy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Kalman measurement space: centre x, centre y, aspect ratio w/h, height.
using Measurement = std::array<double, 4>;

inline Measurement box_to_measurement(const BoundingBox& b) {
  validate(b);
  return {b.x + b.w / 2.0, b.y + b.h / 2.0, b.w / b.h, b.h};
}

inline BoundingBox measurement_to_box(const Measurement& m) {
  const double h = m[3];
  const double w = m[2] * h;
  return {m[0] - w / 2.0, m[1] - h / 2.0, w, h};
}

/// Fixed-width appearance vector. Values have float32 semantics at rest;
/// arithmetic on them is carried out in double.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<float> values) : values_(std::move(values)) {}
  explicit Embedding(std::size_t dim, float fill = 0.0f) : values_(dim, fill) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  float operator[](std::size_t i) const { return values_[i]; }
  float& operator[](std::size_t i) { return values_[i]; }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  double norm() const {
    double s = 0.0;
    for (float v : values_) s += static_cast<double>(v) * v;
    return std::sqrt(s);
  }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<float> values_;
};

struct Detection {
  BoundingBox box;
  double objectness = 0.0;
  double class_score = 0.0;
  Embedding embedding;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline double dot(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw DimensionError("embedding lengths differ: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

/// 1 - <a,b> for unit vectors, clamped to [0,2] to absorb rounding.
inline double cosine_distance(const Embedding& a, const Embedding& b) {
  return std::clamp(1.0 - dot(a, b), 0.0, 2.0);
}

inline Embedding normalize(const Embedding& e) {
  const double n = e.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw DegenerateEmbeddingError("cannot normalize a zero or non-finite vector");
  }
  Embedding out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = static_cast<float>(e[i] / n);
  return out;
}

/// Largest finite IEEE 754 binary16 value.
inline constexpr double kBinary16Max = 65504.0;

/// Rounds one value to the nearest binary16-representable value
/// (round-to-nearest-even), returned widened.
inline float round_to_binary16(double v) {
  if (!std::isfinite(v) || std::fabs(v) > kBinary16Max) {
    throw PrecisionOverflowError("value " + std::to_string(v) + " outside binary16 range");
  }
  if (v == 0.0) return static_cast<float>(v);
  int exp2 = 0;
  std::frexp(v, &exp2);  // |v| = m * 2^exp2, m in [0.5, 1)
  // 10 explicit mantissa bits; exponents below -14 share the subnormal quantum 2^-24.
  const int unbiased = std::max(exp2 - 1, -14);
  const double quantum = std::ldexp(1.0, unbiased - 10);
  // Scaling by a power of two is exact, so nearbyint sees the true quotient.
  const double q = std::nearbyint(v / quantum) * quantum;
  return static_cast<float>(q);
}

/// Emulates storing an embedding at half precision.
inline Embedding quantize_binary16(const Embedding& e) {
  Embedding out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = round_to_binary16(e[i]);
  return out;
}

}  // namespace trackforge
