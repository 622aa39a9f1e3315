#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trackforge/assoc.hpp"
#include "trackforge/core.hpp"
#include "trackforge/mot_format.hpp"

namespace trackforge {

struct ObjectBox {
  long id = 0;
  BoundingBox box;
};

using FrameObjects = std::vector<ObjectBox>;

/// Per-frame objects of one sequence, keyed by 0-indexed frame.
struct Sequence {
  std::map<int, FrameObjects> frames;

  std::size_t total_objects() const {
    std::size_t n = 0;
    for (const auto& [f, objs] : frames) n += objs.size();
    return n;
  }
};

/// Builds a sequence from MOT rows. With `skip_ignored`, rows whose 7th
/// column is 0 (ground-truth "ignore" flag) are dropped.
inline Sequence sequence_from_rows(const std::vector<MotRow>& rows, bool skip_ignored = false) {
  Sequence s;
  for (const auto& r : rows) {
    if (skip_ignored && r.conf == 0.0) continue;
    s.frames[r.frame].push_back({r.id, r.box});
  }
  return s;
}

struct MatchedPair {
  long gt_id = 0;
  long hyp_id = 0;
  double iou = 0.0;
};

struct FrameCorrespondence {
  int frame = 0;
  std::vector<MatchedPair> matches;
  std::vector<long> unmatched_gt;
  std::vector<long> unmatched_hyp;
  int switches = 0;
};

/// The hypothesis each ground-truth id was last matched to, across gaps.
class MatchHistory {
 public:
  std::optional<long> last_hyp(long gt_id) const {
    auto it = last_.find(gt_id);
    if (it == last_.end()) return std::nullopt;
    return it->second;
  }

  void record(const FrameCorrespondence& c) {
    for (const auto& m : c.matches) last_[m.gt_id] = m.hyp_id;
  }

 private:
  std::map<long, long> last_;
};

inline void require_unique_ids(const FrameObjects& objs, const char* what) {
  std::set<long> ids;
  for (const auto& o : objs) {
    if (!ids.insert(o.id).second) throw InputError(std::string("duplicate ") + what + " id " + std::to_string(o.id));
  }
}

/// CLEAR-MOT frame matching: previous correspondences that still overlap
/// are kept, the rest are paired by minimum total (1 - IoU) with pairs
/// below iou_min forbidden. A gt matched to a hypothesis other than the
/// one it was last matched to counts as an identity switch.
inline FrameCorrespondence match_frame(const FrameObjects& gt, const FrameObjects& hyp, const MatchHistory& prev,
                                       double iou_min, int frame = 0) {
  require_unique_ids(gt, "ground-truth");
  require_unique_ids(hyp, "hypothesis");
  FrameCorrespondence out;
  out.frame = frame;

  std::vector<std::vector<double>> overlap(gt.size(), std::vector<double>(hyp.size(), 0.0));
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t j = 0; j < hyp.size(); ++j) overlap[i][j] = iou(gt[i].box, hyp[j].box);
  }

  std::vector<char> gt_done(gt.size(), 0), hyp_done(hyp.size(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto last = prev.last_hyp(gt[i].id);
    if (!last) continue;
    for (std::size_t j = 0; j < hyp.size(); ++j) {
      if (!hyp_done[j] && hyp[j].id == *last && overlap[i][j] >= iou_min) {
        out.matches.push_back({gt[i].id, hyp[j].id, overlap[i][j]});
        gt_done[i] = hyp_done[j] = 1;
        break;
      }
    }
  }

  std::vector<std::size_t> gi, hj;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt_done[i]) gi.push_back(i);
  }
  for (std::size_t j = 0; j < hyp.size(); ++j) {
    if (!hyp_done[j]) hj.push_back(j);
  }
  CostMatrix cost(gi.size(), hj.size(), kInfiniteCost);
  for (std::size_t a = 0; a < gi.size(); ++a) {
    for (std::size_t b = 0; b < hj.size(); ++b) {
      const double o = overlap[gi[a]][hj[b]];
      if (o >= iou_min) cost(a, b) = 1.0 - o;
    }
  }
  for (const auto& m : hungarian_solve(cost).matches) {
    const auto i = gi[m.track];
    const auto j = hj[m.detection];
    out.matches.push_back({gt[i].id, hyp[j].id, overlap[i][j]});
    gt_done[i] = hyp_done[j] = 1;
    const auto last = prev.last_hyp(gt[i].id);
    if (last && *last != hyp[j].id) ++out.switches;
  }

  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt_done[i]) out.unmatched_gt.push_back(gt[i].id);
  }
  for (std::size_t j = 0; j < hyp.size(); ++j) {
    if (!hyp_done[j]) out.unmatched_hyp.push_back(hyp[j].id);
  }
  return out;
}

struct ClearMotMetrics {
  double mota = 0.0;
  double motp = 0.0;  // mean (1 - IoU) over matches
  int fp = 0;
  int fn = 0;
  int id_switches = 0;
  int fragmentations = 0;
  double recall = 0.0;
  double precision = 0.0;
  int mostly_tracked = 0;
  int partially_tracked = 0;
  int mostly_lost = 0;
  int total_gt = 0;
  int true_positives = 0;
};

inline constexpr double kMostlyTrackedRatio = 0.8;
inline constexpr double kMostlyLostRatio = 0.2;

inline ClearMotMetrics clear_mot(const std::vector<FrameCorrespondence>& frames) {
  ClearMotMetrics m;
  double distance_sum = 0.0;
  struct GtHistory {
    int present = 0;
    int tracked = 0;
    bool was_tracked = false;
    bool interrupted = false;
  };
  std::map<long, GtHistory> history;

  for (const auto& f : frames) {
    m.fp += static_cast<int>(f.unmatched_hyp.size());
    m.fn += static_cast<int>(f.unmatched_gt.size());
    m.id_switches += f.switches;
    m.true_positives += static_cast<int>(f.matches.size());
    for (const auto& p : f.matches) {
      distance_sum += 1.0 - p.iou;
      auto& h = history[p.gt_id];
      ++h.present;
      ++h.tracked;
      if (h.interrupted) ++m.fragmentations;
      h.was_tracked = true;
      h.interrupted = false;
    }
    for (long id : f.unmatched_gt) {
      auto& h = history[id];
      ++h.present;
      if (h.was_tracked) h.interrupted = true;
    }
  }
  m.total_gt = m.true_positives + m.fn;
  if (m.total_gt == 0) throw UndefinedMetricError("no ground-truth objects");

  m.mota = 1.0 - static_cast<double>(m.fp + m.fn + m.id_switches) / m.total_gt;
  m.motp = m.true_positives > 0 ? distance_sum / m.true_positives : std::numeric_limits<double>::quiet_NaN();
  m.recall = static_cast<double>(m.true_positives) / m.total_gt;
  m.precision = m.true_positives + m.fp > 0 ? static_cast<double>(m.true_positives) / (m.true_positives + m.fp) : 0.0;
  for (const auto& [id, h] : history) {
    const double ratio = static_cast<double>(h.tracked) / h.present;
    if (ratio >= kMostlyTrackedRatio) {
      ++m.mostly_tracked;
    } else if (ratio <= kMostlyLostRatio) {
      ++m.mostly_lost;
    } else {
      ++m.partially_tracked;
    }
  }
  return m;
}

using Trajectories = std::map<long, std::map<int, BoundingBox>>;

inline Trajectories to_trajectories(const Sequence& s) {
  Trajectories t;
  for (const auto& [frame, objs] : s.frames) {
    for (const auto& o : objs) t[o.id][frame] = o.box;
  }
  return t;
}

/// Frames in which both trajectories exist with IoU >= iou_min.
inline int joint_coverage(const std::map<int, BoundingBox>& a, const std::map<int, BoundingBox>& b, double iou_min) {
  int n = 0;
  for (const auto& [frame, box] : a) {
    auto it = b.find(frame);
    if (it != b.end() && iou(box, it->second) >= iou_min) ++n;
  }
  return n;
}

struct IdMetrics {
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  int idtp = 0;
  int idfp = 0;
  int idfn = 0;
};

/// Identity metrics from the optimal one-to-one matching of whole
/// trajectories. A gt-hyp pair costs the frames either side covers alone;
/// every trajectory may instead stay unmatched at the cost of its length.
inline IdMetrics id_metrics(const Trajectories& gt, const Trajectories& hyp, double iou_min) {
  std::vector<const std::map<int, BoundingBox>*> g, h;
  int total_gt = 0, total_hyp = 0;
  for (const auto& [id, t] : gt) {
    g.push_back(&t);
    total_gt += static_cast<int>(t.size());
  }
  for (const auto& [id, t] : hyp) {
    h.push_back(&t);
    total_hyp += static_cast<int>(t.size());
  }
  if (total_gt == 0) throw UndefinedMetricError("no ground-truth objects");

  const std::size_t G = g.size(), H = h.size(), n = G + H;
  std::vector<std::vector<int>> overlap(G, std::vector<int>(H, 0));
  CostMatrix cost(n, n, kInfiniteCost);
  for (std::size_t i = 0; i < G; ++i) {
    for (std::size_t j = 0; j < H; ++j) {
      overlap[i][j] = joint_coverage(*g[i], *h[j], iou_min);
      cost(i, j) = static_cast<double>(g[i]->size() + h[j]->size()) - 2.0 * overlap[i][j];
    }
    cost(i, H + i) = static_cast<double>(g[i]->size());
  }
  for (std::size_t j = 0; j < H; ++j) {
    cost(G + j, j) = static_cast<double>(h[j]->size());
    for (std::size_t i = 0; i < G; ++i) cost(G + j, H + i) = 0.0;
  }

  IdMetrics m;
  for (const auto& match : hungarian_solve(cost).matches) {
    if (match.track < G && match.detection < H) m.idtp += overlap[match.track][match.detection];
  }
  m.idfn = total_gt - m.idtp;
  m.idfp = total_hyp - m.idtp;
  m.idr = static_cast<double>(m.idtp) / total_gt;
  m.idp = total_hyp > 0 ? static_cast<double>(m.idtp) / total_hyp : 0.0;
  m.idf1 = 2.0 * m.idtp / (total_gt + total_hyp);
  return m;
}

/// All columns of the comparison table, in its order.
struct MotMetrics {
  IdMetrics id;
  ClearMotMetrics clear;
};

inline constexpr double kDefaultMatchIou = 0.5;

struct EvaluationInput {
  std::vector<FrameCorrespondence> correspondences;
  Trajectories gt;
  Trajectories hyp;
};

/// Matches every frame of `gt`; hypothesis frames outside gt's frame range
/// are dropped and reported through `dropped_frames`.
inline EvaluationInput prepare_evaluation(const Sequence& gt, const Sequence& hyp, double iou_min,
                                          std::vector<int>* dropped_frames = nullptr) {
  EvaluationInput in;
  if (gt.frames.empty()) throw UndefinedMetricError("ground truth is empty");
  const int first = gt.frames.begin()->first;
  const int last = gt.frames.rbegin()->first;
  Sequence kept_hyp;
  for (const auto& [f, objs] : hyp.frames) {
    if (f < first || f > last) {
      if (dropped_frames) dropped_frames->push_back(f);
    } else {
      kept_hyp.frames[f] = objs;
    }
  }
  std::set<int> frames;
  for (const auto& [f, o] : gt.frames) frames.insert(f);
  for (const auto& [f, o] : kept_hyp.frames) frames.insert(f);

  MatchHistory history;
  static const FrameObjects empty;
  for (int f : frames) {
    auto g = gt.frames.find(f);
    auto h = kept_hyp.frames.find(f);
    auto c = match_frame(g == gt.frames.end() ? empty : g->second, h == kept_hyp.frames.end() ? empty : h->second,
                         history, iou_min, f);
    history.record(c);
    in.correspondences.push_back(std::move(c));
  }
  in.gt = to_trajectories(gt);
  in.hyp = to_trajectories(kept_hyp);
  return in;
}

inline MotMetrics evaluate(const Sequence& gt, const Sequence& hyp, double iou_min = kDefaultMatchIou,
                           std::vector<int>* dropped_frames = nullptr) {
  const auto in = prepare_evaluation(gt, hyp, iou_min, dropped_frames);
  return {id_metrics(in.gt, in.hyp, iou_min), clear_mot(in.correspondences)};
}

inline constexpr const char* kMetricsCsvHeader = "IDF1,IDP,IDR,Rcll,Prcn,MT,PT,ML,FP,FN,IDs,FM,MOTA,MOTP";

inline std::string metrics_csv_row(const MotMetrics& m) {
  std::ostringstream out;
  const auto& c = m.clear;
  out << format_number(m.id.idf1) << ',' << format_number(m.id.idp) << ',' << format_number(m.id.idr) << ','
      << format_number(c.recall) << ',' << format_number(c.precision) << ',' << c.mostly_tracked << ','
      << c.partially_tracked << ',' << c.mostly_lost << ',' << c.fp << ',' << c.fn << ',' << c.id_switches << ','
      << c.fragmentations << ',' << format_number(c.mota) << ',' << format_number(c.motp);
  return out.str();
}

/// Markdown row with percentages, laid out like the comparison table.
inline std::string metrics_markdown(const std::string& label, const MotMetrics& m) {
  auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << v * 100.0 << '%';
    return s.str();
  };
  std::ostringstream out;
  const auto& c = m.clear;
  out << "| | IDF1 | IDP | IDR | Rcll | Prcn | MT | PT | ML | FP | FN | IDs | FM | MOTA | MOTP |\n"
      << "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|\n"
      << "| " << label << " | " << pct(m.id.idf1) << " | " << pct(m.id.idp) << " | " << pct(m.id.idr) << " | "
      << pct(c.recall) << " | " << pct(c.precision) << " | " << c.mostly_tracked << " | " << c.partially_tracked
      << " | " << c.mostly_lost << " | " << c.fp << " | " << c.fn << " | " << c.id_switches << " | "
      << c.fragmentations << " | " << pct(c.mota) << " | ";
  if (std::isnan(c.motp)) {
    out << "nan";
  } else {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << c.motp;
    out << s.str();
  }
  out << " |\n";
  return out.str();
}

}  // namespace trackforge
