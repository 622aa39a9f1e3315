#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "trackforge/core.hpp"
#include "trackforge/raw_output.hpp"

namespace trackforge {

/// Decodes model output rows into detections. Rows must carry exactly
/// `embedding_dim` embedding values; embeddings are normalized here, once.
inline std::vector<Detection> parse_output(const RawModelOutput& raw, std::size_t embedding_dim = kEmbeddingDim) {
  if (raw.row_width() != kRowHeader + embedding_dim) {
    throw LayoutError("row width " + std::to_string(raw.row_width()) + ", expected " +
                      std::to_string(kRowHeader + embedding_dim));
  }
  std::vector<Detection> dets;
  dets.reserve(raw.rows());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto row = raw.row(i);
    Detection d;
    d.box = {row[0], row[1], row[2], row[3]};
    d.objectness = row[4];
    d.class_score = row[5];
    Embedding e(embedding_dim);
    for (std::size_t k = 0; k < embedding_dim; ++k) e[k] = static_cast<float>(row[kRowHeader + k]);
    d.embedding = normalize(e);
    dets.push_back(std::move(d));
  }
  return dets;
}

/// Inverse of parse_output for already-normalized detections.
inline RawModelOutput serialize_output(const std::vector<Detection>& dets, std::size_t embedding_dim = kEmbeddingDim) {
  RawModelOutput raw(kRowHeader + embedding_dim);
  for (const auto& d : dets) raw.append(d.box, d.objectness, d.class_score, d.embedding.values());
  return raw;
}

/// Keeps detections with objectness >= threshold, in order.
inline std::vector<Detection> filter_confidence(const std::vector<Detection>& dets, double threshold) {
  std::vector<Detection> kept;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(kept),
               [threshold](const Detection& d) { return d.objectness >= threshold; });
  return kept;
}

/// Greedy non-max suppression by objectness. Equal scores keep the lower
/// input index first. Survivors come back in score order.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].objectness > dets[b].objectness; });

  std::vector<char> suppressed(dets.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[order[i]]) continue;
    const Detection& top = dets[order[i]];
    kept.push_back(top);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (!suppressed[order[j]] && iou(top.box, dets[order[j]].box) > iou_threshold) suppressed[order[j]] = 1;
    }
  }
  return kept;
}

}  // namespace trackforge
