#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// Dense rows x cols cost matrix (rows = tracks, cols = detections).
/// +inf marks a forbidden pair.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Match {
  std::size_t track = 0;
  std::size_t detection = 0;
  double cost = 0.0;

  friend bool operator==(const Match&, const Match&) = default;
};

/// Matches sorted by track index; unmatched index lists ascending.
struct Assignment {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;

  double total_cost() const {
    double s = 0.0;
    for (const auto& m : matches) s += m.cost;
    return s;
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// True when every track in [0,rows) and detection in [0,cols) appears
/// exactly once across matches and the unmatched lists.
inline bool is_partition(const Assignment& a, std::size_t rows, std::size_t cols) {
  std::vector<int> seen_r(rows, 0), seen_c(cols, 0);
  for (const auto& m : a.matches) {
    if (m.track >= rows || m.detection >= cols) return false;
    ++seen_r[m.track];
    ++seen_c[m.detection];
  }
  for (auto r : a.unmatched_tracks) {
    if (r >= rows) return false;
    ++seen_r[r];
  }
  for (auto c : a.unmatched_detections) {
    if (c >= cols) return false;
    ++seen_c[c];
  }
  return std::all_of(seen_r.begin(), seen_r.end(), [](int n) { return n == 1; }) &&
         std::all_of(seen_c.begin(), seen_c.end(), [](int n) { return n == 1; });
}

inline CostMatrix build_cost_matrix(const std::vector<Embedding>& tracks, const std::vector<Embedding>& dets) {
  CostMatrix cost(tracks.size(), dets.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < dets.size(); ++j) cost(i, j) = cosine_distance(tracks[i], dets[j]);
  }
  return cost;
}

/// Cells whose gate distance exceeds the threshold become +inf.
inline CostMatrix apply_gate(const CostMatrix& cost, const CostMatrix& gate_distances, double gate_threshold) {
  if (cost.rows() != gate_distances.rows() || cost.cols() != gate_distances.cols()) {
    throw DimensionError("gate matrix shape differs from cost matrix shape");
  }
  CostMatrix out = cost;
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t j = 0; j < cost.cols(); ++j) {
      if (gate_distances(i, j) > gate_threshold) out(i, j) = kInfiniteCost;
    }
  }
  return out;
}

namespace detail {

/// Minimum-cost perfect matching on a square finite matrix (Kuhn-Munkres
/// with row/column potentials, O(n^3)). Returns column -> row.
inline std::vector<std::size_t> hungarian_square(const std::vector<double>& a, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_to_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_to_row[j - 1] = p[j] - 1;
  return col_to_row;
}

}  // namespace detail

/// Optimal assignment avoiding +inf pairs: maximises the number of finite
/// matches, then minimises their total cost. Rectangular input is padded to
/// square with a sentinel larger than any sum of finite costs; sentinel
/// matches are reported as unmatched.
inline Assignment hungarian_solve(const CostMatrix& cost) {
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  const std::size_t n = std::max(rows, cols);
  Assignment result;
  if (n == 0) return result;

  double finite_sum = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (std::isfinite(cost(i, j))) finite_sum += std::fabs(cost(i, j));
    }
  }
  const double sentinel = finite_sum + 1.0;

  std::vector<double> padded(n * n, sentinel);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (std::isfinite(cost(i, j))) padded[i * n + j] = cost(i, j);
    }
  }

  const auto col_to_row = detail::hungarian_square(padded, n);
  std::vector<char> row_matched(rows, 0), col_matched(cols, 0);
  for (std::size_t j = 0; j < cols; ++j) {
    const std::size_t i = col_to_row[j];
    if (i < rows && std::isfinite(cost(i, j))) {
      result.matches.push_back({i, j, cost(i, j)});
      row_matched[i] = 1;
      col_matched[j] = 1;
    }
  }
  std::sort(result.matches.begin(), result.matches.end(),
            [](const Match& a, const Match& b) { return a.track < b.track; });
  for (std::size_t i = 0; i < rows; ++i) {
    if (!row_matched[i]) result.unmatched_tracks.push_back(i);
  }
  for (std::size_t j = 0; j < cols; ++j) {
    if (!col_matched[j]) result.unmatched_detections.push_back(j);
  }
  return result;
}

/// Dissolves matches whose cost exceeds max_cost into the unmatched lists.
inline Assignment match_with_threshold(const Assignment& assignment, const CostMatrix& cost, double max_cost) {
  Assignment out;
  out.unmatched_tracks = assignment.unmatched_tracks;
  out.unmatched_detections = assignment.unmatched_detections;
  for (const auto& m : assignment.matches) {
    const double c = cost(m.track, m.detection);
    if (c > max_cost) {
      out.unmatched_tracks.push_back(m.track);
      out.unmatched_detections.push_back(m.detection);
    } else {
      out.matches.push_back({m.track, m.detection, c});
    }
  }
  std::sort(out.unmatched_tracks.begin(), out.unmatched_tracks.end());
  std::sort(out.unmatched_detections.begin(), out.unmatched_detections.end());
  return out;
}

}  // namespace trackforge
