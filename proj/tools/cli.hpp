#pragma once

// Command-line front end: track, bench, eval, synth.
// Exit codes: 0 success, 1 internal invariant violation, 2 usage/config error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trackforge/config_io.hpp"
#include "trackforge/trackforge.hpp"

namespace trackforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitUsage = 2;

/// Raised when a cross-check that must always hold fails.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kThreadsEnv = "TRACKFORGE_THREADS";

inline int threads_from_env() {
  const char* v = std::getenv(kThreadsEnv);
  if (v == nullptr || *v == '\0') return 0;
  int n = 0;
  if (!parse_field(std::string_view(v), n) || n < 1) {
    throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer");
  }
  return n;
}

struct CommonRunOptions {
  std::string config_path;
  std::optional<int> frames;
  std::optional<std::uint64_t> seed;
  bool no_emulation = false;
};

inline RunSettings load_settings(const std::string& scenario_path, const CommonRunOptions& o) {
  RunSettings s;
  if (!scenario_path.empty()) {
    apply_json(load_json_file(scenario_path), s);
    if (!s.has_scenario) throw ConfigError(scenario_path + ": no 'scenario' section");
  }
  if (!o.config_path.empty()) apply_json(load_json_file(o.config_path), s);
  if (o.frames) s.scenario.num_frames = *o.frames;
  if (o.seed) s.seed = *o.seed;
  if (o.no_emulation) s.pipeline.emulation.enabled = false;
  const int env_threads = threads_from_env();
  if (env_threads > 0) s.pipeline.max_threads = env_threads;
  validate(s.scenario);
  // Synthetic runs take the embedding width from the scenario.
  if (s.has_scenario) s.tracker.embedding_dim = s.scenario.embedding_dim;
  return s;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << text;
}

inline std::string mot_text(const std::vector<TrackerOutput>& outputs) {
  std::ostringstream s;
  write_mot_results(s, outputs);
  return s.str();
}

inline std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct TrackOptions {
  CommonRunOptions common;
  std::string scenario;
  std::string detections;
  std::string embeddings;
  std::string mode = "serial";
  std::string precision = "full";
  int batch_size = 1;
  std::string out = "results.txt";
  std::string report;
};

inline int cmd_track(const TrackOptions& o, std::ostream& out, std::ostream& err) {
  const bool file_driven = !o.detections.empty() || !o.embeddings.empty();
  if (o.scenario.empty() && !file_driven) {
    err << "track: need --scenario or --detections/--embeddings\n";
    return kExitUsage;
  }
  if (!o.scenario.empty() && file_driven) {
    err << "track: --scenario cannot be combined with --detections/--embeddings\n";
    return kExitUsage;
  }
  if (file_driven && (o.detections.empty() || o.embeddings.empty())) {
    err << "track: --detections and --embeddings go together\n";
    return kExitUsage;
  }

  RunSettings s = load_settings(o.scenario, o.common);
  const PipelineMode mode{parse_execution_mode(o.mode), parse_precision(o.precision), o.batch_size};
  validate(mode);

  std::unique_ptr<DetectionSource> source;
  if (file_driven) {
    auto dets = load_embedding_sidecar(o.embeddings, load_mot_detections(o.detections), s.tracker.embedding_dim);
    source = std::make_unique<FileSource>(std::move(dets), s.tracker.embedding_dim);
  } else {
    source = std::make_unique<SyntheticSource>(s.scenario, s.seed);
  }

  Tracker tracker(s.tracker);
  const RunResult result = run(*source, tracker, mode, s.pipeline);
  write_text(o.out, mot_text(result.outputs));

  std::ostringstream report;
  report << kRunReportCsvHeader << '\n' << to_csv_row(result.report) << '\n';
  if (o.report.empty()) {
    out << report.str();
  } else {
    write_text(o.report, report.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchOptions {
  CommonRunOptions common;
  std::string scenario;
  std::vector<int> batch_sizes;
  std::vector<std::string> modes{"serial", "batched", "parallel"};
  std::vector<std::string> precisions{"full", "mixed"};
  std::string out;
  std::string markdown;
  bool table2 = false;
  int table_batch = 4;
};

inline int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  if (o.batch_sizes.empty()) {
    err << "bench: --batch-sizes must list at least one batch size\n";
    return kExitUsage;
  }
  for (int b : o.batch_sizes) {
    if (b < 1) {
      err << "bench: batch sizes must be >= 1\n";
      return kExitUsage;
    }
  }
  RunSettings s = load_settings(o.scenario, o.common);
  const SyntheticSource source(s.scenario, s.seed);

  std::vector<PipelineMode> plan;
  auto add = [&](PipelineMode m) {
    for (const auto& p : plan) {
      if (p == m) return;
    }
    plan.push_back(m);
  };
  for (const auto& ps : o.precisions) {
    const Precision p = parse_precision(ps);
    for (const auto& ms : o.modes) {
      const ExecutionMode e = parse_execution_mode(ms);
      if (e == ExecutionMode::Serial) {
        add({e, p, 1});
      } else {
        for (int b : o.batch_sizes) add({e, p, b});
      }
    }
  }
  if (o.table2) {
    add({ExecutionMode::Serial, Precision::Full, 1});
    add({ExecutionMode::Serial, Precision::Mixed, 1});
    add({ExecutionMode::BatchedSerial, Precision::Mixed, o.table_batch});
    add({ExecutionMode::Parallel, Precision::Mixed, o.table_batch});
  }
  for (const auto& m : plan) validate(m);

  std::vector<RunResult> results;
  std::map<Precision, const std::vector<TrackerOutput>*> reference;
  for (const auto& m : plan) {
    Tracker tracker(s.tracker);
    results.push_back(run(source, tracker, m, s.pipeline));
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto [it, first] = reference.emplace(plan[i].precision, &results[i].outputs);
    if (!first && *it->second != results[i].outputs) {
      throw InvariantViolation(std::string("tracker outputs differ between modes (") + to_string(plan[i].execution) +
                               ", batch " + std::to_string(plan[i].batch_size) + ", " +
                               to_string(plan[i].precision) + ")");
    }
  }

  std::ostringstream csv;
  csv << kRunReportCsvHeader << '\n';
  for (const auto& r : results) csv << to_csv_row(r.report) << '\n';
  if (o.out.empty()) {
    out << csv.str();
  } else {
    write_text(o.out, csv.str());
  }

  if (!o.markdown.empty()) {
    auto fps_of = [&](const PipelineMode& m) -> std::optional<double> {
      for (std::size_t i = 0; i < plan.size(); ++i) {
        if (plan[i] == m) return results[i].report.fps;
      }
      return std::nullopt;
    };
    std::ostringstream md;
    md << "## FPS by batch size\n\n| batch |";
    std::vector<std::pair<ExecutionMode, Precision>> columns;
    for (const auto& m : plan) {
      std::pair<ExecutionMode, Precision> key{m.execution, m.precision};
      if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    }
    for (const auto& [e, p] : columns) md << ' ' << to_string(e) << '/' << to_string(p) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
    md << '\n';
    for (int b : o.batch_sizes) {
      md << "| " << b << " |";
      for (const auto& [e, p] : columns) {
        const auto f = fps_of({e, p, e == ExecutionMode::Serial ? 1 : b});
        md << ' ' << (f ? fixed(*f, 2) : std::string("-")) << " |";
      }
      md << '\n';
    }
    if (o.table2) {
      md << "\n## Pipeline variants (batch " << o.table_batch << ")\n\n"
         << "| scenario | OP | MP | MP and BW | MP, BW and PP |\n|---|---|---|---|---|\n| "
         << (o.scenario.empty() ? std::string("scenario") : o.scenario) << " | "
         << fixed(*fps_of({ExecutionMode::Serial, Precision::Full, 1}), 2) << " | "
         << fixed(*fps_of({ExecutionMode::Serial, Precision::Mixed, 1}), 2) << " | "
         << fixed(*fps_of({ExecutionMode::BatchedSerial, Precision::Mixed, o.table_batch}), 2) << " | "
         << fixed(*fps_of({ExecutionMode::Parallel, Precision::Mixed, o.table_batch}), 2) << " |\n";
    }
    write_text(o.markdown, md.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string gt;
  std::string results;
  double iou_min = kDefaultMatchIou;
  std::string out;
  bool markdown = false;
};

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const Sequence gt = sequence_from_rows(read_mot_file(o.gt), true);
  const Sequence hyp = sequence_from_rows(read_mot_file(o.results), false);
  std::vector<int> dropped;
  const MotMetrics m = evaluate(gt, hyp, o.iou_min, &dropped);
  if (!dropped.empty()) {
    err << "warning: " << dropped.size()
        << " result frame(s) fall outside the ground-truth frame range and were ignored\n";
  }
  std::ostringstream csv;
  csv << kMetricsCsvHeader << '\n' << metrics_csv_row(m) << '\n';
  if (!o.out.empty()) write_text(o.out, csv.str());
  if (o.markdown) {
    out << metrics_markdown(o.results, m);
  } else {
    out << csv.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  ScenarioConfig scenario;
  std::uint64_t seed = 0;
  std::string out_scenario = "scenario.json";
  std::string out_gt = "gt.txt";
  std::string out_det;
  std::string out_emb;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream&) {
  validate(o.scenario);
  const Scenario scenario(o.scenario, o.seed);
  const json doc{{"seed", o.seed}, {"scenario", to_json(o.scenario)}};
  write_text(o.out_scenario, doc.dump(2) + "\n");

  std::ostringstream gt, det;
  std::vector<SidecarRecord> records;
  const bool want_dets = !o.out_det.empty() || !o.out_emb.empty();
  for (int f = 0; f < o.scenario.num_frames; ++f) {
    if (want_dets) {
      const FrameSample sample = scenario.generate_frame(f);
      for (const auto& g : sample.ground_truth) write_mot_gt_row(gt, f, g.object_id, g.box);
      for (std::size_t i = 0; i < sample.output.rows(); ++i) {
        const auto row = sample.output.row(i);
        write_mot_det_row(det, f, {row[0], row[1], row[2], row[3]}, row[4]);
        SidecarRecord r{static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(i), {}};
        for (std::size_t k = kRowHeader; k < row.size(); ++k) r.values.push_back(static_cast<float>(row[k]));
        records.push_back(std::move(r));
      }
    } else {
      for (const auto& g : scenario.ground_truth(f)) write_mot_gt_row(gt, f, g.object_id, g.box);
    }
  }
  write_text(o.out_gt, gt.str());
  if (!o.out_det.empty()) write_text(o.out_det, det.str());
  if (!o.out_emb.empty()) {
    write_embedding_sidecar(o.out_emb, static_cast<std::uint32_t>(o.scenario.embedding_dim), records);
  }
  out << "wrote " << o.out_scenario << " and " << o.out_gt << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"trackforge: tracking-by-detection pipeline, benchmarks and MOT metrics"};
  app.require_subcommand(1);

  const std::vector<std::string> mode_names{"serial", "batched", "batched-serial", "parallel"};
  const std::vector<std::string> precision_names{"full", "mixed"};

  auto add_common = [](CLI::App* sub, CommonRunOptions& c) {
    sub->add_option("--config", c.config_path, "JSON config (tracker/emulation/pipeline sections)");
    sub->add_option("--frames", c.frames, "Override the scenario frame count");
    sub->add_option("--seed", c.seed, "Override the scenario seed");
    sub->add_flag("--no-emulation", c.no_emulation, "Skip latency emulation");
  };

  TrackOptions track;
  auto* track_cmd = app.add_subcommand("track", "Run the tracker and write MOT16 result rows");
  add_common(track_cmd, track.common);
  track_cmd->add_option("--scenario", track.scenario, "Scenario JSON written by synth");
  track_cmd->add_option("--detections", track.detections, "MOT16 det file");
  track_cmd->add_option("--embeddings", track.embeddings, "Embedding sidecar (EMB1)");
  track_cmd->add_option("--mode", track.mode)->check(CLI::IsMember(mode_names));
  track_cmd->add_option("--precision", track.precision)->check(CLI::IsMember(precision_names));
  track_cmd->add_option("--batch-size", track.batch_size)->check(CLI::PositiveNumber);
  track_cmd->add_option("--out", track.out, "Result file");
  track_cmd->add_option("--report", track.report, "Run report CSV (stdout when omitted)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Sweep modes, precisions and batch sizes");
  add_common(bench_cmd, bench.common);
  bench_cmd->add_option("--scenario", bench.scenario, "Scenario JSON")->required();
  bench_cmd->add_option("--batch-sizes", bench.batch_sizes, "Comma-separated batch sizes")->delimiter(',');
  bench_cmd->add_option("--modes", bench.modes)->delimiter(',')->check(CLI::IsMember(mode_names));
  bench_cmd->add_option("--precisions", bench.precisions)->delimiter(',')->check(CLI::IsMember(precision_names));
  bench_cmd->add_option("--out", bench.out, "Report CSV (stdout when omitted)");
  bench_cmd->add_option("--markdown", bench.markdown, "Markdown tables");
  bench_cmd->add_flag("--table2", bench.table2, "Also run the four pipeline variants");
  bench_cmd->add_option("--table-batch", bench.table_batch)->check(CLI::PositiveNumber);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "CLEAR-MOT and identity metrics");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth file")->required();
  eval_cmd->add_option("--results", eval.results, "Result file")->required();
  eval_cmd->add_option("--iou", eval.iou_min, "Match IoU threshold");
  eval_cmd->add_option("--out", eval.out, "Metrics CSV");
  eval_cmd->add_flag("--markdown", eval.markdown, "Print a markdown row with percentages");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic scenario and its ground truth");
  synth_cmd->add_option("--objects", synth.scenario.num_objects);
  synth_cmd->add_option("--frames", synth.scenario.num_frames);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--p-miss", synth.scenario.p_miss);
  synth_cmd->add_option("--fp-rate", synth.scenario.lambda_fp);
  synth_cmd->add_option("--sigma-box", synth.scenario.sigma_box);
  synth_cmd->add_option("--sigma-emb", synth.scenario.sigma_emb);
  synth_cmd->add_option("--sigma-score", synth.scenario.sigma_score);
  synth_cmd->add_option("--dim", synth.scenario.embedding_dim);
  synth_cmd->add_option("--margin", synth.scenario.separation_margin);
  synth_cmd->add_option("--max-speed", synth.scenario.max_speed);
  synth_cmd->add_flag("--full-lifetime", synth.scenario.full_lifetime);
  synth_cmd->add_option("--out-scenario", synth.out_scenario);
  synth_cmd->add_option("--out-gt", synth.out_gt);
  synth_cmd->add_option("--out-det", synth.out_det, "Also write detections (MOT16 det rows)");
  synth_cmd->add_option("--out-emb", synth.out_emb, "Also write the embedding sidecar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*track_cmd) return cmd_track(track, out, err);
    if (*bench_cmd) return cmd_bench(bench, out, err);
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*synth_cmd) return cmd_synth(synth, out, err);
  } catch (const InvariantViolation& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitUsage;
}

}  // namespace trackforge::cli
