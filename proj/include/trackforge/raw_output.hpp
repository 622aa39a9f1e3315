#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

/// One frame of model output: a (num_detections x row_width) row-major
/// matrix. Row layout: x, y, w, h, objectness, class score, embedding...
/// Rows without an embedding (plain detection files) have width 6.
class RawModelOutput {
 public:
  explicit RawModelOutput(std::size_t row_width = kRowHeader + kEmbeddingDim) : width_(row_width) {
    if (width_ == 0) throw LayoutError("row width must be positive");
  }

  RawModelOutput(std::size_t row_width, std::vector<double> data)
      : width_(row_width), data_(std::move(data)) {
    if (width_ == 0) throw LayoutError("row width must be positive");
    if (data_.size() % width_ != 0) {
      throw LayoutError("flat buffer of " + std::to_string(data_.size()) +
                        " values is not a whole number of rows of width " + std::to_string(width_));
    }
  }

  std::size_t row_width() const { return width_; }
  std::size_t rows() const { return data_.size() / width_; }
  bool empty() const { return data_.empty(); }

  /// Embedding length implied by the row width (0 for plain detections).
  std::size_t embedding_dim() const { return width_ > kRowHeader ? width_ - kRowHeader : 0; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * width_, width_);
  }
  std::span<double> row(std::size_t i) { return std::span<double>(data_).subspan(i * width_, width_); }

  std::span<const double> data() const { return data_; }

  void append_row(std::span<const double> values) {
    if (values.size() != width_) {
      throw LayoutError("row of width " + std::to_string(values.size()) + " appended to output of width " +
                        std::to_string(width_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
  }

  void append(const BoundingBox& box, double objectness, double class_score,
              std::span<const float> embedding = {}) {
    if (kRowHeader + embedding.size() != width_) {
      throw LayoutError("embedding of length " + std::to_string(embedding.size()) +
                        " does not fit row width " + std::to_string(width_));
    }
    data_.insert(data_.end(), {box.x, box.y, box.w, box.h, objectness, class_score});
    for (float v : embedding) data_.push_back(v);
  }

  friend bool operator==(const RawModelOutput&, const RawModelOutput&) = default;

 private:
  std::size_t width_;
  std::vector<double> data_;
};

}  // namespace trackforge
