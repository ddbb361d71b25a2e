#pragma once

// Command implementations behind the `fbfrac` tool. Each command takes a flat KeyValues
// (config file merged with flags) and returns the manifest or rows it wrote.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fbfrac/blur.hpp"
#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"
#include "fbfrac/metrics.hpp"
#include "fbfrac/nonlocal.hpp"
#include "fbfrac/solver.hpp"
#include "fbfrac/solver_config.hpp"

namespace fbfrac::cli {

#ifdef FBFRAC_VERSION
inline constexpr const char* kToolVersion = FBFRAC_VERSION;
#else
inline constexpr const char* kToolVersion = "unversioned";
#endif

inline constexpr const char* kReportHeader =
    "image,kernel,sigma,seed,psnr_degraded,ssim_degraded,psnr_restored,ssim_restored,steps,wall_ms";
inline constexpr const char* kSweepHeader = "row,lambda1,lambda2,lambda3,gamma,s,psnr,ssim,steps,best";
inline constexpr const char* kBenchHeader = "size,mode,p,ms_per_step,checksum";

// ---------------------------------------------------------------------------------------
// Kernel descriptors: identity | average:N | disk:R | motion:L:THETA (THETA in radians).

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(KeyValues::trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline BlurKernel parse_kernel(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw ValidationError("kernel: empty descriptor");
  const auto& kind = parts[0];
  auto arity = [&](std::size_t n) {
    if (parts.size() != n + 1)
      throw ValidationError("kernel '" + text + "': expected " + std::to_string(n) + " parameter(s)");
  };
  if (kind == "identity") {
    arity(0);
    return make_identity_kernel();
  }
  if (kind == "average") {
    arity(1);
    return make_average_kernel(static_cast<int>(KeyValues::to_long("kernel", parts[1])));
  }
  if (kind == "disk") {
    arity(1);
    return make_disk_kernel(KeyValues::to_double("kernel", parts[1]));
  }
  if (kind == "motion") {
    arity(2);
    return make_motion_kernel(KeyValues::to_double("kernel", parts[1]), KeyValues::to_double("kernel", parts[2]));
  }
  throw ValidationError("kernel '" + text + "': unknown kind (expected identity|average:N|disk:R|motion:L:THETA)");
}

inline std::string kernel_descriptor(const BlurKernel& k) {
  switch (k.kind) {
    case KernelKind::identity: return "identity";
    case KernelKind::average: return "average:" + std::to_string(static_cast<long>(k.param1));
    case KernelKind::disk: return "disk:" + format_double(k.param1);
    case KernelKind::motion: return "motion:" + format_double(k.param1) + ":" + format_double(k.param2);
    case KernelKind::custom: break;
  }
  throw ValidationError("custom kernels have no descriptor");
}

inline std::uint64_t parse_seed(const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long s = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw ValidationError("key 'seed': '" + v + "' is not a nonnegative integer");
  }
}

// ---------------------------------------------------------------------------------------
// Key sets per command. Manifests add informational keys, accepted and ignored on re-read.

inline const std::vector<std::string>& informational_keys() {
  static const std::vector<std::string> keys = {
      "command", "tool_version", "noise_generator", "wall_ms", "psnr", "ssim",
      "psnr_degraded", "ssim_degraded", "steps", "max_steps_reached"};
  return keys;
}

inline std::vector<std::string> with_solver_keys(std::vector<std::string> keys) {
  const auto& s = solver_config_keys();
  keys.insert(keys.end(), s.begin(), s.end());
  return keys;
}

inline std::vector<std::string> allowed_keys(const std::string& command) {
  std::vector<std::string> keys;
  if (command == "degrade") {
    keys = {"input", "output", "kernel", "sigma", "seed", "noise_file", "manifest"};
  } else if (command == "restore") {
    keys = with_solver_keys({"input", "output", "kernel", "reference", "history", "report", "image", "sigma",
                             "seed", "snapshot_dir", "snapshot_every", "manifest"});
  } else if (command == "evaluate") {
    keys = {"input", "reference", "report", "image"};
  } else if (command == "sweep") {
    keys = with_solver_keys({"input", "reference", "kernel", "grid", "output"});
  } else if (command == "bench") {
    keys = with_solver_keys({"sizes", "modes", "steps_per_size", "output"});
  } else {
    throw ValidationError("unknown command '" + command + "'");
  }
  const auto& info = informational_keys();
  keys.insert(keys.end(), info.begin(), info.end());
  return keys;
}

inline const std::string& require_key(const KeyValues& kv, const std::string& k, const std::string& command) {
  if (!kv.has(k) || kv.get(k).empty()) throw ValidationError(command + ": missing required key '" + k + "'");
  return kv.get(k);
}

inline std::string value_or(const KeyValues& kv, const std::string& k, const std::string& fallback) {
  return kv.has(k) ? kv.get(k) : fallback;
}

inline std::string basename_of(const std::string& path) { return std::filesystem::path(path).filename().string(); }

// Solver config from keys; the oracle reference is attached by the caller.
inline SolverConfig solver_from_keys(const KeyValues& kv) {
  SolverConfig cfg;
  apply_solver_keys(kv, cfg);
  return cfg;
}

inline void append_csv_row(const std::string& path, const char* header, const std::string& row) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to '" + path + "'");
  if (fresh) out << header << "\n";
  out << row << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------------------

/// Blur + noise of a clean PGM. Writes the degraded PGM and its manifest.
inline KeyValues cmd_degrade(const KeyValues& kv) {
  kv.require_known(allowed_keys("degrade"), "degrade");
  const auto& input = require_key(kv, "input", "degrade");
  const auto& output = require_key(kv, "output", "degrade");
  const BlurKernel kernel = parse_kernel(value_or(kv, "kernel", "identity"));
  DegradationSpec spec{kernel, kv.has("sigma") ? kv.get_double("sigma") : 0.0,
                       kv.has("seed") ? parse_seed(kv.get("seed")) : 0};
  const ImageGrid clean = load_pgm(input);
  std::vector<double> noise;
  const bool from_file = kv.has("noise_file") && !kv.get("noise_file").empty();
  if (from_file) noise = load_noise_file(kv.get("noise_file"), clean.rows(), clean.cols());
  const ImageGrid f = degrade(clean, spec, from_file ? &noise : nullptr);
  save_pgm(f, output);

  KeyValues m;
  m.set("command", "degrade");
  m.set("tool_version", kToolVersion);
  m.set("noise_generator", from_file ? std::string("file") : std::string(CounterGaussian::kName));
  m.set("input", input);
  m.set("output", output);
  m.set("kernel", kernel_descriptor(kernel));
  m.set("sigma", format_double(spec.sigma));
  m.set("seed", std::to_string(spec.seed));
  if (from_file) m.set("noise_file", kv.get("noise_file"));
  m.save(value_or(kv, "manifest", output + ".manifest"));
  return m;
}

/// Explicit restoration of a degraded PGM. Writes the restored PGM, the history CSV, the
/// manifest, and optionally a report row and snapshots.
inline KeyValues cmd_restore(const KeyValues& kv) {
  kv.require_known(allowed_keys("restore"), "restore");
  const auto& input = require_key(kv, "input", "restore");
  const auto& output = require_key(kv, "output", "restore");
  const BlurKernel kernel = parse_kernel(value_or(kv, "kernel", "identity"));
  SolverConfig cfg = solver_from_keys(kv);
  const ImageGrid f = load_pgm(input);
  std::shared_ptr<const ImageGrid> ref;
  if (kv.has("reference") && !kv.get("reference").empty()) {
    ref = std::make_shared<const ImageGrid>(load_pgm(kv.get("reference")));
    ref->require_same_shape(f, "restore reference");
  }
  if (cfg.stop.mode == StopMode::oracle && !ref)
    throw ValidationError("restore: oracle stopping requires --reference");
  cfg.stop.reference = ref;

  RunHooks hooks;
  if (kv.has("snapshot_dir") && !kv.get("snapshot_dir").empty()) {
    const long every = kv.has("snapshot_every") ? kv.get_long("snapshot_every") : 10;
    hooks = pgm_snapshot_hooks(kv.get("snapshot_dir"), every);
  }
  const RunResult r = run(f, cfg, kernel, hooks);
  save_pgm(r.state.u, output);
  const std::string history = value_or(kv, "history", output + ".history.csv");
  write_history_csv(r.history, history);

  KeyValues m = solver_keys(cfg);
  m.set("command", "restore");
  m.set("tool_version", kToolVersion);
  m.set("input", input);
  m.set("output", output);
  m.set("history", history);
  m.set("kernel", kernel_descriptor(kernel));
  m.set("steps", std::to_string(r.state.step));
  m.set("max_steps_reached", r.max_steps_reached ? "1" : "0");
  m.set("wall_ms", format_double(r.wall_ms));
  for (const char* k : {"image", "sigma", "seed", "report", "snapshot_dir", "snapshot_every"})
    if (kv.has(k)) m.set(k, kv.get(k));
  if (ref) {
    m.set("reference", kv.get("reference"));
    const ImageGrid restored = quantize(r.state.u);
    const MetricsReport before = evaluate(f, *ref), after = evaluate(restored, *ref);
    m.set("psnr_degraded", format_double(before.psnr));
    m.set("ssim_degraded", format_double(before.ssim));
    m.set("psnr", format_double(after.psnr));
    m.set("ssim", format_double(after.ssim));
    if (kv.has("report") && !kv.get("report").empty()) {
      const std::string image = value_or(kv, "image", basename_of(kv.get("reference")));
      append_csv_row(kv.get("report"), kReportHeader,
                     image + "," + kernel_descriptor(kernel) + "," + value_or(kv, "sigma", "") + "," +
                         value_or(kv, "seed", "") + "," + m.get("psnr_degraded") + "," + m.get("ssim_degraded") +
                         "," + m.get("psnr") + "," + m.get("ssim") + "," + m.get("steps") + "," + m.get("wall_ms"));
    }
  }
  m.save(value_or(kv, "manifest", output + ".manifest"));
  return m;
}

/// PSNR/SSIM of `input` against `reference`, printed as key = value lines and optionally
/// appended to a report CSV (degraded and restored columns both hold this pair).
inline MetricsReport cmd_evaluate(const KeyValues& kv, std::ostream& out) {
  kv.require_known(allowed_keys("evaluate"), "evaluate");
  const ImageGrid a = load_pgm(require_key(kv, "input", "evaluate"));
  const ImageGrid b = load_pgm(require_key(kv, "reference", "evaluate"));
  a.require_same_shape(b, "evaluate");
  const MetricsReport r = evaluate(a, b);
  out << "psnr = " << format_double(r.psnr) << "\nssim = " << format_double(r.ssim) << "\n";
  if (kv.has("report") && !kv.get("report").empty()) {
    const std::string image = value_or(kv, "image", basename_of(kv.get("reference")));
    const std::string p = format_double(r.psnr), s = format_double(r.ssim);
    append_csv_row(kv.get("report"), kReportHeader, image + ",,,," + p + "," + s + "," + p + "," + s + ",,");
  }
  return r;
}

struct SweepRow {
  SolverConfig cfg;
  double psnr = 0.0;
  double ssim = 0.0;
  long steps = 0;
  bool best = false;
};

/// Parameter grid: a CSV whose header names solver keys; one tuple per following line.
/// Blank lines and `#` comments are skipped.
inline std::vector<KeyValues> load_sweep_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sweep grid '" + path + "'");
  std::vector<std::string> header;
  std::vector<KeyValues> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (KeyValues::trim(line).empty()) continue;
    auto cells = split(KeyValues::trim(line), ',');
    if (header.empty()) {
      header = cells;
      KeyValues probe;
      for (const auto& h : header) probe.set(h, "");
      probe.require_known(solver_config_keys(), path + ": header");
      continue;
    }
    if (cells.size() != header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " cells");
    KeyValues kv;
    for (std::size_t c = 0; c < cells.size(); ++c) kv.set(header[c], cells[c]);
    rows.push_back(std::move(kv));
  }
  if (rows.empty()) throw ValidationError(path + ": sweep grid has no tuples");
  return rows;
}

/// One oracle-stopped restore per grid tuple; the max-PSNR row is flagged, ties to the lower row.
inline std::vector<SweepRow> run_sweep(const ImageGrid& f, std::shared_ptr<const ImageGrid> ref,
                                       const BlurKernel& kernel, const KeyValues& base,
                                       const std::vector<KeyValues>& grid) {
  std::vector<SweepRow> rows;
  for (const auto& tuple : grid) {
    KeyValues kv = base;
    kv.merge(tuple);
    SweepRow row;
    row.cfg = solver_from_keys(kv);
    row.cfg.stop.mode = StopMode::oracle;
    row.cfg.stop.reference = ref;
    const RunResult r = run(f, row.cfg, kernel);
    const ImageGrid restored = quantize(r.state.u);
    row.psnr = psnr(restored, *ref);
    row.ssim = ssim(restored, *ref);
    row.steps = r.state.step;
    rows.push_back(std::move(row));
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].psnr > rows[best].psnr) best = k;
  rows[best].best = true;
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << kSweepHeader << "\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    os << k << ',' << format_double(r.cfg.lambda1) << ',' << format_double(r.cfg.lambda2) << ','
       << format_double(r.cfg.lambda3) << ',' << format_double(r.cfg.gamma) << ',' << format_double(r.cfg.s) << ','
       << format_double(r.psnr) << ',' << format_double(r.ssim) << ',' << r.steps << ',' << (r.best ? 1 : 0)
       << "\n";
  }
}

inline std::vector<SweepRow> cmd_sweep(const KeyValues& kv, std::ostream& out) {
  kv.require_known(allowed_keys("sweep"), "sweep");
  const ImageGrid f = load_pgm(require_key(kv, "input", "sweep"));
  auto ref = std::make_shared<const ImageGrid>(load_pgm(require_key(kv, "reference", "sweep")));
  ref->require_same_shape(f, "sweep reference");
  const BlurKernel kernel = parse_kernel(value_or(kv, "kernel", "identity"));
  const auto grid = load_sweep_grid(require_key(kv, "grid", "sweep"));
  KeyValues base = kv;
  for (const char* k : {"input", "reference", "kernel", "grid", "output"}) base.erase(k);
  for (const auto& k : informational_keys()) base.erase(k);
  const auto rows = run_sweep(f, ref, kernel, base, grid);
  if (kv.has("output") && !kv.get("output").empty()) {
    std::ofstream os(kv.get("output"));
    if (!os) throw IoError("cannot write '" + kv.get("output") + "'");
    write_sweep_csv(rows, os);
  } else {
    write_sweep_csv(rows, out);
  }
  return rows;
}

struct BenchRow {
  std::size_t size = 0;
  std::string mode;
  double p = 1.0;
  double ms_per_step = 0.0;
  double checksum = 0.0;  // sum of u after the timed steps
};

/// Deterministic synthetic test image: smooth ramps plus counter-generator noise.
inline ImageGrid bench_image(std::size_t n) {
  ImageGrid u(n, n);
  const CounterGaussian gen(7);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = static_cast<double>(i) / static_cast<double>(n), y = static_cast<double>(j) / static_cast<double>(n);
      u(i, j) = 128.0 + 80.0 * std::sin(6.0 * x) * std::cos(4.0 * y) + 10.0 * gen.normal(i * n + j);
    }
  return u;
}

inline NonlocalMode parse_bench_mode(const std::string& m, int radius) {
  const NonlocalKind k = parse_nonlocal_kind(m);
  NonlocalMode mode;
  mode.kind = k;
  mode.radius = radius;
  return mode;
}

/// Times explicit steps for every (size, mode) pair; fft_p2 rows are skipped unless p = 2.
inline std::vector<BenchRow> cmd_bench(const KeyValues& kv, std::ostream& out) {
  kv.require_known(allowed_keys("bench"), "bench");
  std::vector<std::size_t> sizes;
  for (const auto& s : split(value_or(kv, "sizes", "64,128"), ',')) {
    const long n = KeyValues::to_long("sizes", s);
    if (n < 2) throw ValidationError("bench: sizes must be >= 2");
    sizes.push_back(static_cast<std::size_t>(n));
  }
  const auto modes = split(value_or(kv, "modes", "dense,truncated"), ',');
  const long steps = kv.has("steps_per_size") ? kv.get_long("steps_per_size") : 3;
  if (steps < 1) throw ValidationError("bench: steps_per_size must be >= 1");
  const SolverConfig base = solver_from_keys(kv);
  const BlurKernel kernel = make_disk_kernel(3);
  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    const ImageGrid f = bench_image(n);
    for (const auto& m : modes) {
      SolverConfig cfg = base;
      cfg.nonlocal = parse_bench_mode(m, base.nonlocal.radius);
      if (cfg.nonlocal.kind == NonlocalKind::fft_p2 && cfg.p != 2.0) continue;
      cfg.stop = StoppingPolicy::fixed(steps);
      cfg.validate();
      const NonlocalPlan plan = plan_for(f, cfg);
      RestorationState st = initial_state(f);
      const auto t0 = std::chrono::steady_clock::now();
      for (long k = 0; k < steps; ++k) st = step(st, f, cfg, plan, kernel);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      BenchRow row;
      row.size = n;
      row.mode = to_string(plan.mode().kind);
      row.p = cfg.p;
      row.ms_per_step = ms / static_cast<double>(steps);
      for (double v : st.u.values()) row.checksum += v;
      rows.push_back(row);
    }
  }
  std::ofstream file;
  const bool to_file = kv.has("output") && !kv.get("output").empty();
  if (to_file) {
    file.open(kv.get("output"));
    if (!file) throw IoError("cannot write '" + kv.get("output") + "'");
  }
  std::ostream& os = to_file ? file : out;
  os << kBenchHeader << "\n";
  for (const auto& r : rows)
    os << r.size << ',' << r.mode << ',' << format_double(r.p) << ',' << format_double(r.ms_per_step) << ','
       << format_double(r.checksum) << "\n";
  return rows;
}

}  // namespace fbfrac::cli
