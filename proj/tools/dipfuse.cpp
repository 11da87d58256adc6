// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// dipfuse: fuse two grayscale images by optimizing an untrained
// encoder-decoder against the sensor-gain forward model, estimate gain maps,
// score fused results, and sweep channel counts over a list of pairs.
//
// Exit codes: 0 ok, 2 bad flags, 3 I/O failure, 4 dimension mismatch,
// 5 diverged optimization.
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dipfuse/digest.hpp"
#include "dipfuse/errors.hpp"
#include "dipfuse/fusion.hpp"
#include "dipfuse/metrics.hpp"
#include "json.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitBadFlags = 2;
constexpr int kExitIo = 3;
constexpr int kExitDims = 4;
constexpr int kExitDiverged = 5;

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw dipfuse::IoError("cannot open " + path);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw dipfuse::IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw dipfuse::IoError("short write to " + path);
}

json input_digests(const std::vector<std::string>& paths) {
  json arr = json::array();
  for (const auto& p : paths) {
    // Unreadable inputs surface as error rows or earlier exits; the manifest
    // still records them, with a null digest.
    try {
      arr.push_back({{"path", p}, {"sha256", dipfuse::sha256_hex(read_file(p))}});
    } catch (const dipfuse::IoError&) {
      arr.push_back({{"path", p}, {"sha256", nullptr}});
    }
  }
  return arr;
}

void write_manifest(const std::string& path, const std::string& command_line,
                    const json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double seconds) {
  json m;
  m["command"] = command_line;
  m["config"] = config;
  m["inputs"] = input_digests(inputs);
  m["outputs"] = outputs;
  m["duration_s"] = seconds;
  m["version"] = kVersion;
  write_text(path, m.dump(2) + "\n");
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

bool parse_resize(const std::string& spec, int* w, int* h) {
  const size_t x = spec.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= spec.size()) return false;
  try {
    size_t used = 0;
    *w = std::stoi(spec.substr(0, x), &used);
    if (used != x) return false;
    *h = std::stoi(spec.substr(x + 1), &used);
    if (used != spec.size() - x - 1) return false;
  } catch (const std::exception&) {
    return false;
  }
  return *w >= 1 && *h >= 1;
}

struct FuseArgs {
  std::vector<std::string> src;
  std::string out;
  int channels = 10;
  int iters = 2000;
  double lr = 0.01;
  uint64_t seed = 0;
  int gain_window = 7;
  std::string loss_csv;
  std::string resize;
};

int cmd_fuse(const FuseArgs& a, const std::string& command_line) {
  int rw = 0, rh = 0;
  if (!a.resize.empty() && !parse_resize(a.resize, &rw, &rh)) {
    std::cerr << "error: --resize expects WxH, got '" << a.resize << "'\n";
    return kExitBadFlags;
  }

  dipfuse::Image x1 = dipfuse::load_image_file(a.src[0]);
  dipfuse::Image x2 = dipfuse::load_image_file(a.src[1]);
  if (!a.resize.empty()) {
    x1 = dipfuse::resize_bilinear(x1, rw, rh);
    x2 = dipfuse::resize_bilinear(x2, rw, rh);
  }
  if (x1.width != x2.width || x1.height != x2.height) {
    std::cerr << "error: source dimensions differ (" << x1.width << "x"
              << x1.height << " vs " << x2.width << "x" << x2.height
              << "); use --resize\n";
    return kExitDims;
  }

  dipfuse::FusionConfig cfg;
  cfg.channels = a.channels;
  cfg.iterations = a.iters;
  cfg.lr = a.lr;
  cfg.seed = a.seed;
  cfg.gain_window = a.gain_window;

  const auto t0 = Clock::now();
  const dipfuse::FusionResult result = dipfuse::run_fusion(x1, x2, cfg);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  dipfuse::save_image_file(result.fused, a.out);
  std::vector<std::string> outputs = {a.out};
  if (!a.loss_csv.empty()) {
    write_text(a.loss_csv, dipfuse::loss_curve_csv(result.loss_curve));
    outputs.push_back(a.loss_csv);
  }

  json config = {{"channels", cfg.channels}, {"iterations", cfg.iterations},
                 {"lr", cfg.lr},             {"seed", cfg.seed},
                 {"gain_window", cfg.gain_window},
                 {"best_loss", result.best_loss},
                 {"best_iteration", result.best_iteration}};
  if (!a.resize.empty()) config["resize"] = a.resize;
  write_manifest(a.out + ".manifest.json", command_line, config, a.src, outputs,
                 seconds);
  return 0;
}

struct GainsArgs {
  std::vector<std::string> src;
  std::string out_prefix;
  int gain_window = 7;
};

int cmd_gains(const GainsArgs& a, const std::string& command_line) {
  const dipfuse::Image x1 = dipfuse::load_image_file(a.src[0]);
  const dipfuse::Image x2 = dipfuse::load_image_file(a.src[1]);
  if (x1.width != x2.width || x1.height != x2.height) {
    std::cerr << "error: source dimensions differ\n";
    return kExitDims;
  }
  const auto t0 = Clock::now();
  const dipfuse::GainPair gains = dipfuse::estimate_gains(x1, x2, a.gain_window);
  const std::string b1 = a.out_prefix + "_b1.pgm";
  const std::string b2 = a.out_prefix + "_b2.pgm";
  dipfuse::save_image_file(gains.beta1, b1);
  dipfuse::save_image_file(gains.beta2, b2);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(a.out_prefix + "_gains.manifest.json", command_line,
                 {{"gain_window", a.gain_window}}, a.src, {b1, b2}, seconds);
  return 0;
}

struct MetricsArgs {
  std::string fused;
  std::vector<std::string> src;
  std::string json_out = "-";
};

int cmd_metrics(const MetricsArgs& a, const std::string& command_line) {
  const dipfuse::Image x1 = dipfuse::load_image_file(a.src[0]);
  const dipfuse::Image x2 = dipfuse::load_image_file(a.src[1]);
  const dipfuse::Image f = dipfuse::load_image_file(a.fused);
  if (x1.width != x2.width || x1.height != x2.height || x1.width != f.width ||
      x1.height != f.height) {
    std::cerr << "error: image dimensions differ\n";
    return kExitDims;
  }
  const auto t0 = Clock::now();
  dipfuse::MetricReport report = dipfuse::evaluate_all(x1, x2, f);
  report.file_a = a.src[0];
  report.file_b = a.src[1];
  report.file_f = a.fused;
  const std::string text = dipfuse::metric_report_json(report);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (a.json_out == "-") {
    std::cout << text;
  } else {
    write_text(a.json_out, text);
    write_manifest(a.json_out + ".manifest.json", command_line, json::object(),
                   {a.src[0], a.src[1], a.fused}, {a.json_out}, seconds);
  }
  return 0;
}

struct SweepArgs {
  std::string pairs_file;
  std::string channels = "1,10";
  int iters = 2000;
  uint64_t seed = 0;
  int gain_window = 7;
  std::string out;
  int jobs = 1;
};

struct SweepJob {
  size_t pair_idx, channel_idx;
  std::string a, b;
  int channels;
};

struct SweepRow {
  bool ok = false;
  std::string error;
  dipfuse::MetricReport report;
  double best_loss = 0.0;
  double seconds = 0.0;
};

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int cmd_sweep(const SweepArgs& a, const std::string& command_line) {
  std::ifstream pf(a.pairs_file);
  if (!pf) {
    std::cerr << "error: cannot open pairs file " << a.pairs_file << "\n";
    return kExitIo;
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(pf, line)) {
    std::istringstream ss(line);
    std::string p1, p2, extra;
    if (!(ss >> p1)) continue;  // blank line
    if (!(ss >> p2) || (ss >> extra)) {
      std::cerr << "error: pairs file line must hold exactly two paths: '"
                << line << "'\n";
      return kExitBadFlags;
    }
    pairs.emplace_back(p1, p2);
  }
  std::vector<int> channel_list;
  {
    std::istringstream ss(a.channels);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        channel_list.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        channel_list.clear();
        break;
      }
      if (channel_list.back() < 1) {
        channel_list.clear();
        break;
      }
    }
    if (channel_list.empty()) {
      std::cerr << "error: --channels expects a comma list of positive ints\n";
      return kExitBadFlags;
    }
  }
  if (pairs.empty()) {
    std::cerr << "error: pairs file is empty\n";
    return kExitBadFlags;
  }

  std::vector<SweepJob> jobs;
  for (size_t p = 0; p < pairs.size(); ++p) {
    for (size_t c = 0; c < channel_list.size(); ++c) {
      jobs.push_back({p, c, pairs[p].first, pairs[p].second, channel_list[c]});
    }
  }
  std::vector<SweepRow> rows(jobs.size());

  const auto run_job = [&](size_t i) {
    SweepRow& row = rows[i];
    const SweepJob& job = jobs[i];
    const auto t0 = Clock::now();
    try {
      const dipfuse::Image x1 = dipfuse::load_image_file(job.a);
      const dipfuse::Image x2 = dipfuse::load_image_file(job.b);
      dipfuse::FusionConfig cfg;
      cfg.channels = job.channels;
      cfg.iterations = a.iters;
      cfg.seed = a.seed;
      cfg.gain_window = a.gain_window;
      const auto result = dipfuse::run_fusion(x1, x2, cfg);
      row.report = dipfuse::evaluate_all(x1, x2, result.fused);
      row.best_loss = result.best_loss;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  };

  const auto t0 = Clock::now();
  if (a.jobs <= 1) {
    for (size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const int nw = std::min<size_t>(a.jobs, jobs.size());
    for (int w = 0; w < nw; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          run_job(i);
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  const double total_seconds =
      std::chrono::duration<double>(Clock::now() - t0).count();

  // Rows in manifest order x channel order regardless of scheduling.
  std::string csv = "pair,channels,pe,mi,q,cv,best_loss,seconds\n";
  size_t ok_count = 0;
  for (size_t i = 0; i < jobs.size(); ++i) {
    const SweepJob& job = jobs[i];
    const SweepRow& row = rows[i];
    const std::string pair_id = job.a + "|" + job.b;
    if (row.ok) {
      ++ok_count;
      csv += pair_id + "," + std::to_string(job.channels) + "," +
             csv_number(row.report.pe) + "," + csv_number(row.report.mi) + "," +
             csv_number(row.report.q) + "," + csv_number(row.report.cv) + "," +
             csv_number(row.best_loss) + "," + csv_number(row.seconds) + "\n";
    } else {
      std::string msg = row.error;
      for (auto& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      csv += pair_id + "," + std::to_string(job.channels) + ",error," + msg +
             ",,,,\n";
    }
  }
  // Per-channel averages across pairs, mirroring the aggregated comparison.
  for (size_t c = 0; c < channel_list.size(); ++c) {
    double pe = 0, mi = 0, q = 0, cv = 0, loss = 0, secs = 0;
    size_t n = 0;
    for (size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].channel_idx == c && rows[i].ok) {
        pe += rows[i].report.pe;
        mi += rows[i].report.mi;
        q += rows[i].report.q;
        cv += rows[i].report.cv;
        loss += rows[i].best_loss;
        secs += rows[i].seconds;
        ++n;
      }
    }
    if (n == 0) {
      csv += "average," + std::to_string(channel_list[c]) + ",error,no successful runs,,,,\n";
      continue;
    }
    const double dn = static_cast<double>(n);
    csv += "average," + std::to_string(channel_list[c]) + "," +
           csv_number(pe / dn) + "," + csv_number(mi / dn) + "," +
           csv_number(q / dn) + "," + csv_number(cv / dn) + "," +
           csv_number(loss / dn) + "," + csv_number(secs / dn) + "\n";
  }
  write_text(a.out, csv);

  std::vector<std::string> inputs = {a.pairs_file};
  for (const auto& [p1, p2] : pairs) {
    inputs.push_back(p1);
    inputs.push_back(p2);
  }
  write_manifest(a.out + ".manifest.json", command_line,
                 {{"channels", channel_list},
                  {"iterations", a.iters},
                  {"seed", a.seed},
                  {"gain_window", a.gain_window},
                  {"jobs", a.jobs}},
                 inputs, {a.out}, total_seconds);
  return ok_count > 0 ? 0 : kExitDiverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image fusion with an untrained encoder-decoder prior"};
  app.require_subcommand(1);

  FuseArgs fuse;
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "Fuse two source images");
  fuse_cmd->add_option("--src", fuse.src, "Source image (give exactly twice)")
      ->expected(2)
      ->required();
  fuse_cmd->add_option("--out", fuse.out, "Fused output image (.pgm or .png)")
      ->required();
  fuse_cmd->add_option("--channels", fuse.channels, "Output channels n");
  fuse_cmd->add_option("--iters", fuse.iters, "Optimization iterations");
  fuse_cmd->add_option("--lr", fuse.lr, "Adam learning rate");
  fuse_cmd->add_option("--seed", fuse.seed, "Random seed");
  fuse_cmd->add_option("--gain-window", fuse.gain_window, "PCA window (odd)");
  fuse_cmd->add_option("--loss-csv", fuse.loss_csv, "Write the loss curve CSV");
  fuse_cmd->add_option("--resize", fuse.resize, "Resize both sources to WxH first");

  GainsArgs gains;
  CLI::App* gains_cmd = app.add_subcommand("gains", "Write the PCA gain maps");
  gains_cmd->add_option("--src", gains.src, "Source image (give exactly twice)")
      ->expected(2)
      ->required();
  gains_cmd->add_option("--out-prefix", gains.out_prefix, "Output path prefix")
      ->required();
  gains_cmd->add_option("--gain-window", gains.gain_window, "PCA window (odd)");

  MetricsArgs metrics;
  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "Score a fused image against its sources");
  metrics_cmd->add_option("--fused", metrics.fused, "Fused image")->required();
  metrics_cmd->add_option("--src", metrics.src, "Source image (give exactly twice)")
      ->expected(2)
      ->required();
  metrics_cmd->add_option("--json", metrics.json_out, "Report path, or - for stdout");

  SweepArgs sweep;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Run fusion+metrics over pairs x channel counts");
  sweep_cmd->add_option("--pairs", sweep.pairs_file,
                        "File with one pair of paths per line")
      ->required();
  sweep_cmd->add_option("--channels", sweep.channels, "Comma list, e.g. 1,2,10");
  sweep_cmd->add_option("--iters", sweep.iters, "Iterations per run");
  sweep_cmd->add_option("--seed", sweep.seed, "Random seed");
  sweep_cmd->add_option("--gain-window", sweep.gain_window, "PCA window (odd)");
  sweep_cmd->add_option("--out", sweep.out, "Output CSV path")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Parallel fusion jobs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitBadFlags;
  }

  const std::string command_line = join_args(argc, argv);
  try {
    if (fuse_cmd->parsed()) return cmd_fuse(fuse, command_line);
    if (gains_cmd->parsed()) return cmd_gains(gains, command_line);
    if (metrics_cmd->parsed()) return cmd_metrics(metrics, command_line);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, command_line);
  } catch (const dipfuse::DivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const dipfuse::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDims;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitBadFlags;
}
