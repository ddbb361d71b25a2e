#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"
#include "fbfrac/nonlocal.hpp"

namespace fbfrac {

enum class StopMode { oracle, fixed, residual };

struct StoppingPolicy {
  StopMode mode = StopMode::oracle;
  std::shared_ptr<const ImageGrid> reference;  // oracle mode only
  int patience = 5;
  long steps = 0;     // fixed mode
  double tol = 1e-6;  // residual mode

  static StoppingPolicy oracle(std::shared_ptr<const ImageGrid> ref, int patience = 5) {
    StoppingPolicy s;
    s.mode = StopMode::oracle;
    s.reference = std::move(ref);
    s.patience = patience;
    return s;
  }
  static StoppingPolicy fixed(long steps) {
    StoppingPolicy s;
    s.mode = StopMode::fixed;
    s.steps = steps;
    return s;
  }
  static StoppingPolicy residual(double tol) {
    StoppingPolicy s;
    s.mode = StopMode::residual;
    s.tol = tol;
    return s;
  }

  void validate() const {
    if (patience < 1) throw ValidationError("stop: patience must be >= 1, got " + std::to_string(patience));
    if (!(tol > 0.0)) throw ValidationError("stop: residual tolerance must be > 0");
    if (steps < 0) throw ValidationError("stop: fixed step count must be >= 0");
  }
};

inline std::string to_string(StopMode m) {
  switch (m) {
    case StopMode::oracle: return "oracle";
    case StopMode::fixed: return "fixed";
    case StopMode::residual: return "residual";
  }
  return "?";
}

inline StopMode parse_stop_mode(const std::string& s) {
  if (s == "oracle") return StopMode::oracle;
  if (s == "fixed") return StopMode::fixed;
  if (s == "residual") return StopMode::residual;
  throw ValidationError("unknown stop mode '" + s + "' (expected oracle|fixed|residual)");
}

struct SolverConfig {
  double dt = 0.01;
  double delta = 0.28;
  double gamma = 1.33;
  double s = 0.8;
  double p = 1.0;
  double lambda1 = 0.0;
  double lambda2 = 14.0;
  double lambda3 = 14.0;
  int eps = 0;
  double e = 1e-8;
  double h = 1.0;
  NonlocalMode nonlocal;
  long max_steps = 2000;
  StoppingPolicy stop;

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ValidationError("config: " + msg);
    };
    need(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
    need(std::isfinite(delta) && delta > 0.0, "delta must be > 0");
    need(gamma > 1.0 && gamma <= 2.0, "gamma must lie in (1,2]");
    need(s > 0.0 && s < 1.0, "s must lie in (0,1)");
    need(p >= 1.0 && p <= 2.0, "p must lie in [1,2]");
    need(std::isfinite(lambda1) && lambda1 >= 0.0, "lambda1 must be >= 0");
    need(std::isfinite(lambda2) && lambda2 >= 0.0, "lambda2 must be >= 0");
    need(std::isfinite(lambda3) && lambda3 >= 0.0, "lambda3 must be >= 0");
    need(eps == 0 || eps == 1, "eps must be 0 or 1");
    need(std::isfinite(e) && e >= 0.0, "e must be >= 0");
    need(e > 0.0 || gamma == 2.0, "e must be > 0 when gamma < 2");
    need(std::isfinite(h) && h > 0.0, "h must be > 0");
    need(max_steps >= 0, "max_steps must be >= 0");
    need(nonlocal.kind != NonlocalKind::fft_p2 || p == 2.0, "nonlocal_mode fft_p2 requires p = 2");
    need(nonlocal.kind != NonlocalKind::truncated || nonlocal.radius >= 1, "nonlocal_radius must be >= 1");
    stop.validate();
  }
};

// ---------------------------------------------------------------------------------------
// Flat `key = value` files with `#` comments.

class KeyValues {
 public:
  using Map = std::map<std::string, std::string>;

  KeyValues() = default;
  explicit KeyValues(Map m) : entries_(std::move(m)) {}

  static KeyValues parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const auto key = trim(body.substr(0, eq));
      const auto value = trim(body.substr(eq + 1));
      if (key.empty()) throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
      kv.entries_[key] = value;
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << serialize();
    if (!out) throw IoError("write failed for '" + path + "'");
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
    return os.str();
  }

  bool has(const std::string& k) const { return entries_.count(k) != 0; }
  const std::string& get(const std::string& k) const { return entries_.at(k); }
  void set(const std::string& k, std::string v) { entries_[k] = std::move(v); }
  void erase(const std::string& k) { entries_.erase(k); }
  const Map& entries() const { return entries_; }

  // Later entries win.
  void merge(const KeyValues& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
  }

  // Any key outside `allowed` is a hard error.
  void require_known(const std::vector<std::string>& allowed, const std::string& where) const {
    for (const auto& [k, v] : entries_) {
      bool ok = false;
      for (const auto& a : allowed) ok = ok || a == k;
      if (!ok) throw ValidationError(where + ": unknown key '" + k + "'");
    }
  }

  double get_double(const std::string& k) const { return to_double(k, get(k)); }
  long get_long(const std::string& k) const { return to_long(k, get(k)); }

  static double to_double(const std::string& k, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ValidationError("key '" + k + "': '" + v + "' is not a number");
    }
  }
  static long to_long(const std::string& k, const std::string& v) {
    try {
      std::size_t used = 0;
      const long d = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ValidationError("key '" + k + "': '" + v + "' is not an integer");
    }
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  Map entries_;
};

/// Round-trip exact decimal form of a double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest form that parses back to the same value.
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[40];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

inline const std::vector<std::string>& solver_config_keys() {
  static const std::vector<std::string> keys = {
      "dt",       "delta",      "gamma",          "s",           "p",          "lambda1",
      "lambda2",  "lambda3",    "eps",            "e",           "h",          "nonlocal_mode",
      "nonlocal_radius",        "sum_domain",     "max_steps",   "stop",       "patience",
      "fixed_steps",            "residual_tol"};
  return keys;
}

/// Applies every solver key present in `kv` on top of `cfg`; other keys are left to the caller.
inline void apply_solver_keys(const KeyValues& kv, SolverConfig& cfg) {
  auto num = [&](const char* k, double& dst) {
    if (kv.has(k)) dst = kv.get_double(k);
  };
  num("dt", cfg.dt);
  num("delta", cfg.delta);
  num("gamma", cfg.gamma);
  num("s", cfg.s);
  num("p", cfg.p);
  num("lambda1", cfg.lambda1);
  num("lambda2", cfg.lambda2);
  num("lambda3", cfg.lambda3);
  num("e", cfg.e);
  num("h", cfg.h);
  num("residual_tol", cfg.stop.tol);
  if (kv.has("eps")) cfg.eps = static_cast<int>(kv.get_long("eps"));
  if (kv.has("nonlocal_mode")) cfg.nonlocal.kind = parse_nonlocal_kind(kv.get("nonlocal_mode"));
  if (kv.has("nonlocal_radius")) cfg.nonlocal.radius = static_cast<int>(kv.get_long("nonlocal_radius"));
  if (kv.has("sum_domain")) {
    const auto& d = kv.get("sum_domain");
    if (d == "all_pairs") cfg.nonlocal.domain = SumDomain::all_pairs;
    else if (d == "exclude_axes") cfg.nonlocal.domain = SumDomain::exclude_axes;
    else throw ValidationError("unknown sum_domain '" + d + "' (expected all_pairs|exclude_axes)");
  }
  if (kv.has("max_steps")) cfg.max_steps = kv.get_long("max_steps");
  if (kv.has("stop")) cfg.stop.mode = parse_stop_mode(kv.get("stop"));
  if (kv.has("patience")) cfg.stop.patience = static_cast<int>(kv.get_long("patience"));
  if (kv.has("fixed_steps")) cfg.stop.steps = kv.get_long("fixed_steps");
}

inline KeyValues solver_keys(const SolverConfig& cfg) {
  KeyValues kv;
  kv.set("dt", format_double(cfg.dt));
  kv.set("delta", format_double(cfg.delta));
  kv.set("gamma", format_double(cfg.gamma));
  kv.set("s", format_double(cfg.s));
  kv.set("p", format_double(cfg.p));
  kv.set("lambda1", format_double(cfg.lambda1));
  kv.set("lambda2", format_double(cfg.lambda2));
  kv.set("lambda3", format_double(cfg.lambda3));
  kv.set("eps", std::to_string(cfg.eps));
  kv.set("e", format_double(cfg.e));
  kv.set("h", format_double(cfg.h));
  kv.set("nonlocal_mode", to_string(cfg.nonlocal.kind));
  kv.set("nonlocal_radius", std::to_string(cfg.nonlocal.radius));
  kv.set("sum_domain", cfg.nonlocal.domain == SumDomain::all_pairs ? "all_pairs" : "exclude_axes");
  kv.set("max_steps", std::to_string(cfg.max_steps));
  kv.set("stop", to_string(cfg.stop.mode));
  kv.set("patience", std::to_string(cfg.stop.patience));
  kv.set("fixed_steps", std::to_string(cfg.stop.steps));
  kv.set("residual_tol", format_double(cfg.stop.tol));
  return kv;
}

}  // namespace fbfrac
