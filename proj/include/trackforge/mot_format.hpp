#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_field(std::string_view text, T& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

/// One row of a MOT16 det/gt/result file. `frame` is 0-indexed here; the
/// file stores it 1-indexed.
struct MotRow {
  int frame = 0;
  long id = -1;
  BoundingBox box;
  double conf = 1.0;
  std::size_t line = 0;
};

inline constexpr std::size_t kMotMinFields = 7;

/// Parses `frame,id,bb_left,bb_top,bb_width,bb_height,conf[,...]` rows.
/// Blank lines are skipped. Errors name the offending line.
inline std::vector<MotRow> parse_mot_rows(std::istream& in, const std::string& source = "<stream>") {
  std::vector<MotRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (view.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto fields = split_csv(view);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() < kMotMinFields) {
      throw ParseError(where + ": expected at least " + std::to_string(kMotMinFields) + " fields, got " +
                       std::to_string(fields.size()));
    }
    MotRow row;
    row.line = line_no;
    double frame_value = 0.0;
    double id_value = 0.0;
    double v[5];
    bool ok = parse_field(fields[0], frame_value) && parse_field(fields[1], id_value);
    for (int i = 0; i < 5 && ok; ++i) ok = parse_field(fields[2 + i], v[i]);
    if (!ok) throw ParseError(where + ": non-numeric field");
    if (frame_value < 1.0 || frame_value != static_cast<double>(static_cast<int>(frame_value))) {
      throw ParseError(where + ": frame must be a positive integer");
    }
    row.frame = static_cast<int>(frame_value) - 1;
    row.id = static_cast<long>(id_value);
    row.box = {v[0], v[1], v[2], v[3]};
    row.conf = v[4];
    if (!is_valid(row.box)) {
      throw InvalidBoxError(where + ": width and height must be positive and finite");
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<MotRow> read_mot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_mot_rows(in, path);
}

/// Writes one MOT16 result row: frame,id,x,y,w,h,conf,-1,-1,-1 (frame 1-indexed).
inline void write_mot_result_row(std::ostream& out, int frame, long id, const BoundingBox& box, double conf) {
  out << (frame + 1) << ',' << id << ',' << format_number(box.x) << ',' << format_number(box.y) << ','
      << format_number(box.w) << ',' << format_number(box.h) << ',' << format_number(conf) << ",-1,-1,-1\n";
}

/// Writes a ground-truth row: frame,id,x,y,w,h,1,1,1.
inline void write_mot_gt_row(std::ostream& out, int frame, long id, const BoundingBox& box) {
  out << (frame + 1) << ',' << id << ',' << format_number(box.x) << ',' << format_number(box.y) << ','
      << format_number(box.w) << ',' << format_number(box.h) << ",1,1,1\n";
}

/// Writes a detection row: frame,-1,x,y,w,h,conf.
inline void write_mot_det_row(std::ostream& out, int frame, const BoundingBox& box, double conf) {
  out << (frame + 1) << ",-1," << format_number(box.x) << ',' << format_number(box.y) << ','
      << format_number(box.w) << ',' << format_number(box.h) << ',' << format_number(conf) << '\n';
}

}  // namespace trackforge
