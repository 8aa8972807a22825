#pragma once

// Experiment drivers: threshold sweeps, hitting-time trials, containment
// validation, packing campaigns, and CSV/JSONL/SVG emission.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "latinbox/arrays.hpp"
#include "latinbox/enumeration.hpp"
#include "latinbox/finders.hpp"
#include "latinbox/matching.hpp"
#include "latinbox/packing.hpp"
#include "latinbox/rng.hpp"

namespace latinbox {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ExperimentFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string kind = "sweep";  // sweep | hitting | qval | pack
  int n = 12;
  double eps = 0.5;
  std::string shape = "rows";  // rows: (1-eps)n x n x n; symbols: n x n x (1+eps)n; cube: n x n x n
  std::vector<double> p_grid;
  int trials = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string finder = "exact";  // exact | block | plane | staged
  std::uint64_t node_cap = 5'000'000;
  int n0 = 2;
  std::vector<int> pack_n;
  int pack_seeds = 10;
  double horizon = 1.0;  // packing steps = horizon * n^2
  bool record_wall_time = false;
  std::string out = "out";

  void validate() const {
    static const std::vector<std::string> kinds = {"sweep", "hitting", "qval", "pack"};
    static const std::vector<std::string> shapes = {"rows", "symbols", "cube"};
    static const std::vector<std::string> finders = {"exact", "block", "plane", "staged"};
    auto one_of = [](const std::string& v, const std::vector<std::string>& opts) {
      return std::find(opts.begin(), opts.end(), v) != opts.end();
    };
    if (!one_of(kind, kinds)) throw ConfigError("unknown experiment kind: " + kind);
    if (!one_of(shape, shapes)) throw ConfigError("unknown shape rule: " + shape);
    if (!one_of(finder, finders)) throw ConfigError("unknown finder: " + finder);
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (n < 1) throw ConfigError("n must be positive");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (shape == "rows" && !(eps < 1.0)) throw ConfigError("eps must lie in (0,1) for the rows shape");
    for (double p : p_grid)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p grid values must lie in [0,1]");
    if (n0 < 1 || n0 > 3) throw ConfigError("n0 must be 1, 2 or 3");
    if (pack_seeds < 1) throw ConfigError("pack_seeds must be at least 1");
    if (!(horizon >= 0.0)) throw ConfigError("horizon must be non-negative");
    for (int v : pack_n)
      if (v < 1) throw ConfigError("pack_n values must be positive");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return nlohmann::json{{"kind", c.kind},       {"n", c.n},
                        {"eps", c.eps},         {"shape", c.shape},
                        {"p_grid", c.p_grid},   {"trials", c.trials},
                        {"seed", c.seed},       {"threads", c.threads},
                        {"finder", c.finder},   {"node_cap", c.node_cap},
                        {"n0", c.n0},           {"pack_n", c.pack_n},
                        {"pack_seeds", c.pack_seeds}, {"horizon", c.horizon},
                        {"record_wall_time", c.record_wall_time}, {"out", c.out}};
}

/// Keys mirror the struct fields; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "kind") base.kind = v.get<std::string>();
      else if (k == "n") base.n = v.get<int>();
      else if (k == "eps") base.eps = v.get<double>();
      else if (k == "shape") base.shape = v.get<std::string>();
      else if (k == "p_grid") base.p_grid = v.get<std::vector<double>>();
      else if (k == "trials") base.trials = v.get<int>();
      else if (k == "seed") base.seed = v.get<std::uint64_t>();
      else if (k == "threads") base.threads = v.get<int>();
      else if (k == "finder") base.finder = v.get<std::string>();
      else if (k == "node_cap") base.node_cap = v.get<std::uint64_t>();
      else if (k == "n0") base.n0 = v.get<int>();
      else if (k == "pack_n") base.pack_n = v.get<std::vector<int>>();
      else if (k == "pack_seeds") base.pack_seeds = v.get<int>();
      else if (k == "horizon") base.horizon = v.get<double>();
      else if (k == "record_wall_time") base.record_wall_time = v.get<bool>();
      else if (k == "out") base.out = v.get<std::string>();
      else throw ConfigError("unknown config key: " + k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  return base;
}

/// Array shape selected by the config's shape rule.
inline Dims shape_dims(const ExperimentConfig& c) {
  const double n = c.n;
  if (c.shape == "rows") return Dims{std::max(1, static_cast<int>(std::floor((1.0 - c.eps) * n + 1e-9))), c.n, c.n};
  if (c.shape == "symbols") return Dims{c.n, c.n, static_cast<int>(std::ceil((1.0 + c.eps) * n - 1e-9))};
  return Dims{c.n, c.n, c.n};
}

// ---------------------------------------------------------------------------
// Worker pool

/// Evaluates f(0..count-1) on up to `threads` workers; results are returned
/// in index order. The first exception thrown by any item is rethrown.
template <class F>
auto parallel_map(std::size_t count, int threads, F f) -> std::vector<decltype(f(std::size_t{0}))> {
  using R = decltype(f(std::size_t{0}));
  std::vector<std::optional<R>> slots(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const int workers = static_cast<int>(std::min<std::size_t>(std::max(1, threads), std::max<std::size_t>(1, count)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct Interval {
  double lo = 0, hi = 1;
};

/// Wilson score interval (default 95%).
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(trials);
  const double ph = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (ph + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(ph * (1 - ph) / nn + z2 / (4 * nn * nn)) / denom;
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half), successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

enum class TailSide { Lower, Upper };

/// exp(-alpha^2 N p / 2) for the lower tail, exp(-alpha^2 N p / 3) for the upper.
inline double chernoff_tail(double N, double p, double alpha, TailSide side) {
  if (!(alpha > 0)) throw std::invalid_argument("chernoff_tail: alpha must be positive");
  const double denom = side == TailSide::Lower ? 2.0 : 3.0;
  return std::exp(-alpha * alpha * N * p / denom);
}

/// The alpha at which chernoff_tail equals `level`.
inline double chernoff_alpha(double N, double p, double level, TailSide side) {
  if (!(level > 0 && level < 1) || !(N * p > 0)) throw std::invalid_argument("chernoff_alpha: bad arguments");
  const double denom = side == TailSide::Lower ? 2.0 : 3.0;
  return std::sqrt(denom * std::log(1.0 / level) / (N * p));
}

struct BinomialRow {
  double x = 0;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
};

struct LogisticFit {
  double a = 0, b = 0;
  double p50 = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string warning;
};

/// Maximum-likelihood fit of P(success | x) = 1/(1+exp(-(a+bx))) by damped
/// Newton steps, with a small ridge on b so separated data stays finite.
inline LogisticFit fit_logistic(const std::vector<BinomialRow>& rows, double ridge = 1e-6) {
  LogisticFit fit;
  std::uint64_t succ = 0, tot = 0;
  for (const auto& r : rows) {
    succ += r.successes;
    tot += r.trials;
  }
  if (tot == 0 || succ == 0 || succ == tot) {
    fit.warning = "degenerate data: no transition observed";
    return fit;
  }
  auto loglik = [&](double a, double b) {
    double l = -0.5 * ridge * b * b;
    for (const auto& r : rows) {
      const double eta = a + b * r.x;
      const double log1pe = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
      l += static_cast<double>(r.successes) * eta - static_cast<double>(r.trials) * log1pe;
    }
    return l;
  };
  double a = 0, b = 0, cur = loglik(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    double ga = 0, gb = -ridge * b, haa = 0, hab = 0, hbb = ridge;
    for (const auto& r : rows) {
      const double mu = 1.0 / (1.0 + std::exp(-(a + b * r.x)));
      const double t = static_cast<double>(r.trials);
      const double res = static_cast<double>(r.successes) - t * mu;
      ga += res;
      gb += res * r.x;
      const double w = t * mu * (1 - mu);
      haa += w;
      hab += w * r.x;
      hbb += w * r.x * r.x;
    }
    if (std::abs(ga) + std::abs(gb) < 1e-9) {
      fit.converged = true;
      break;
    }
    const double det = haa * hbb - hab * hab;
    if (!(det > 0)) break;
    double da = (hbb * ga - hab * gb) / det, db = (haa * gb - hab * ga) / det;
    double step = 1.0;
    bool improved = false;
    for (int k = 0; k < 60; ++k) {
      const double cand = loglik(a + step * da, b + step * db);
      if (cand >= cur) {
        a += step * da;
        b += step * db;
        cur = cand;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      fit.converged = true;
      break;
    }
  }
  fit.a = a;
  fit.b = b;
  if (b > 0) {
    fit.p50 = -a / b;
  } else {
    fit.warning = "non-monotone fit: slope is not positive";
  }
  return fit;
}

/// x where the piecewise-linear curve through (x, phat) first reaches 1/2.
inline double interpolated_p50(const std::vector<BinomialRow>& rows) {
  double px = 0, py = 0;
  bool have = false;
  for (const auto& r : rows) {
    if (r.trials == 0) continue;
    const double y = static_cast<double>(r.successes) / static_cast<double>(r.trials);
    if (y >= 0.5) {
      if (!have) return r.x;
      return py == y ? r.x : px + (0.5 - py) * (r.x - px) / (y - py);
    }
    px = r.x;
    py = y;
    have = true;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Adjacent grid points where phat drops by more than 3 pooled standard errors.
inline int monotonicity_violations(const std::vector<BinomialRow>& rows) {
  int bad = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i - 1];
    const auto& b = rows[i];
    if (a.trials == 0 || b.trials == 0) continue;
    const double pa = static_cast<double>(a.successes) / a.trials, pb = static_cast<double>(b.successes) / b.trials;
    const double pooled = static_cast<double>(a.successes + b.successes) / static_cast<double>(a.trials + b.trials);
    const double se = std::sqrt(pooled * (1 - pooled) * (1.0 / a.trials + 1.0 / b.trials));
    if (pa > pb + 3 * se) ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Finder dispatch

struct TrialOutcome {
  FinderStatus status = FinderStatus::Exhausted;
  std::uint64_t nodes = 0;
};

inline TrialOutcome run_finder(const std::string& finder, const Array3D& a, std::uint64_t node_cap,
                               std::uint64_t seed) {
  FinderOutcome o;
  if (finder == "exact") {
    ExactOptions opt;
    opt.node_cap = node_cap;
    o = find_exact(a, opt);
  } else if (finder == "block") {
    o = find_block_recursive(a, 2);
  } else if (finder == "plane") {
    PlaneMatchingParams params;
    params.uniform = UniformMode::Fast;
    o = find_plane_matching(a, params, seed);
  } else if (finder == "staged") {
    ColoredArray ca{a, Array3D(a.dims())};
    o = find_staged(ca, StagedParams::defaults(a.cols(), std::max(1e-9, static_cast<double>(a.symbols()) / a.cols() - 1)),
                    seed);
  } else {
    throw ConfigError("unknown finder: " + finder);
  }
  if (o.result && !validate_latin_box(*o.result, a).proper) throw std::logic_error("finder returned an invalid box");
  return {o.status, o.nodes};
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepTrial {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double p = 0;
  FinderStatus status = FinderStatus::Exhausted;
  std::uint64_t nodes = 0;
  double wall_ms = 0;
};

struct SweepRow {
  double p = 0;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;  // valid trials
  std::uint64_t invalid = 0;
  double phat = 0;
  Interval ci;
};

struct SweepResult {
  Dims dims;
  std::vector<SweepRow> rows;
  std::vector<SweepTrial> trials;
  LogisticFit fit;
  double p50_interp = std::numeric_limits<double>::quiet_NaN();
  bool one_sided = false;
  int monotone_violations = 0;
};

inline std::vector<BinomialRow> binomial_rows(const std::vector<SweepRow>& rows) {
  std::vector<BinomialRow> out;
  for (const auto& r : rows) out.push_back({r.p, r.successes, r.trials});
  return out;
}

inline SweepResult run_threshold_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.p_grid.empty()) throw ConfigError("sweep: p grid is empty");
  SweepResult res;
  res.dims = shape_dims(cfg);
  res.one_sided = cfg.finder != "exact";
  const std::size_t per = static_cast<std::size_t>(cfg.trials);
  const std::size_t total = per * cfg.p_grid.size();
  res.trials = parallel_map(total, cfg.threads, [&](std::size_t i) {
    SweepTrial t;
    t.index = i;
    t.seed = derive_seed(cfg.seed, i);
    t.p = cfg.p_grid[i / per];
    const auto start = std::chrono::steady_clock::now();
    const Array3D a = sample_binomial(res.dims, t.p, t.seed);
    const TrialOutcome o = run_finder(cfg.finder, a, cfg.node_cap, derive_seed(t.seed, 1));
    t.status = o.status;
    t.nodes = o.nodes;
    t.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return t;
  });
  for (std::size_t g = 0; g < cfg.p_grid.size(); ++g) {
    SweepRow row;
    row.p = cfg.p_grid[g];
    for (std::size_t j = 0; j < per; ++j) {
      const auto& t = res.trials[g * per + j];
      if (t.status == FinderStatus::Indeterminate) {
        ++row.invalid;
        continue;
      }
      ++row.trials;
      if (t.status == FinderStatus::Success) ++row.successes;
    }
    row.phat = row.trials ? static_cast<double>(row.successes) / row.trials : 0.0;
    row.ci = wilson_interval(row.successes, row.trials);
    res.rows.push_back(row);
  }
  const auto br = binomial_rows(res.rows);
  res.fit = fit_logistic(br);
  res.p50_interp = interpolated_p50(br);
  res.monotone_violations = monotonicity_violations(br);
  return res;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::string s = "p,successes,trials,phat,lo,hi\r\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%llu,%llu,%.6f,%.6f,%.6f\r\n", row.p,
                  static_cast<unsigned long long>(row.successes), static_cast<unsigned long long>(row.trials), row.phat,
                  row.ci.lo, row.ci.hi);
    s += buf;
  }
  return s;
}

inline std::string sweep_jsonl(const SweepResult& r, bool wall_time) {
  std::string s;
  for (const auto& t : r.trials) {
    nlohmann::json j{{"index", t.index}, {"seed", t.seed}, {"p", t.p}, {"status", to_string(t.status)}, {"nodes", t.nodes}};
    if (wall_time) j["wall_ms"] = t.wall_ms;
    s += j.dump() + "\n";
  }
  return s;
}

inline nlohmann::json sweep_summary(const ExperimentConfig& cfg, const SweepResult& r) {
  std::uint64_t invalid = 0;
  for (const auto& row : r.rows) invalid += row.invalid;
  nlohmann::json j{{"config", to_json(cfg)},
                   {"seed", cfg.seed},
                   {"dims", {r.dims.m, r.dims.n, r.dims.k}},
                   {"p50_logistic", std::isnan(r.fit.p50) ? nlohmann::json(nullptr) : nlohmann::json(r.fit.p50)},
                   {"p50_interpolated", std::isnan(r.p50_interp) ? nlohmann::json(nullptr) : nlohmann::json(r.p50_interp)},
                   {"logistic_a", r.fit.a},
                   {"logistic_b", r.fit.b},
                   {"invalid_trials", invalid},
                   {"monotone_violations", r.monotone_violations},
                   {"one_sided", r.one_sided}};
  if (!r.fit.warning.empty()) j["warning"] = r.fit.warning;
  if (r.one_sided) j["caveat"] = "constructive finder: failures do not prove absence of a Latin box";
  return j;
}

// ---------------------------------------------------------------------------
// Hitting times

struct HittingTrial {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t tau_shaft = 0;
  std::size_t tau_box = 0;
  bool valid = true;
  bool equal = false;
  int probes = 0;
  std::uint64_t nodes = 0;
  double wall_ms = 0;
};

/// Decision oracle on a process prefix; nullopt when the node cap was hit.
inline std::optional<bool> box_at(const ArrayProcess& proc, std::size_t t, std::uint64_t node_cap, HittingTrial& rec) {
  ExactOptions opt;
  opt.node_cap = node_cap;
  const FinderOutcome o = find_exact(proc.prefix(t), opt);
  ++rec.probes;
  rec.nodes += o.nodes;
  if (o.status == FinderStatus::Indeterminate) return std::nullopt;
  return o.success();
}

/// One hitting-time trial: tau_shaft by scanning the order, tau_box by binary
/// search over the monotone containment property (or by linear scan).
inline HittingTrial hitting_trial(int n, int m, std::uint64_t seed, std::uint64_t node_cap, bool linear = false) {
  HittingTrial rec;
  rec.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  const ArrayProcess proc = sample_process(n, m, seed);
  rec.tau_shaft = proc.shaft_hitting_time();
  std::size_t lo = rec.tau_shaft, hi = proc.length();
  auto at = [&](std::size_t t) { return box_at(proc, t, node_cap, rec); };
  const auto first = at(lo);
  if (!first) {
    rec.valid = false;
  } else if (*first) {
    rec.tau_box = lo;
  } else if (linear) {
    for (std::size_t t = lo + 1; t <= hi; ++t) {
      const auto r = at(t);
      if (!r) {
        rec.valid = false;
        break;
      }
      if (*r) {
        rec.tau_box = t;
        break;
      }
    }
  } else {
    // invariant: no box at lo, box at hi (the full array supports one)
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto r = at(mid);
      if (!r) {
        rec.valid = false;
        break;
      }
      (*r ? hi : lo) = mid;
    }
    if (rec.valid) rec.tau_box = hi;
  }
  rec.equal = rec.valid && rec.tau_box == rec.tau_shaft;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

struct HittingResult {
  int n = 0, m = 0;
  std::vector<HittingTrial> trials;
  std::size_t valid = 0;
  std::size_t equal = 0;
  std::size_t order_violations = 0;  // tau_shaft > tau_box
  double equality_rate = 0;
};

inline HittingResult run_hitting_time(const ExperimentConfig& cfg) {
  cfg.validate();
  HittingResult res;
  res.n = cfg.n;
  res.m = static_cast<int>(std::ceil((1.0 + cfg.eps) * cfg.n - 1e-9));
  if (cfg.n > 30) throw ConfigError("hitting: n must be at most 30");
  res.trials = parallel_map(static_cast<std::size_t>(cfg.trials), cfg.threads, [&](std::size_t i) {
    HittingTrial t = hitting_trial(res.n, res.m, derive_seed(cfg.seed, i), cfg.node_cap);
    t.index = i;
    return t;
  });
  for (const auto& t : res.trials) {
    if (!t.valid) continue;
    ++res.valid;
    if (t.equal) ++res.equal;
    if (t.tau_shaft > t.tau_box) ++res.order_violations;
  }
  res.equality_rate = res.valid ? static_cast<double>(res.equal) / res.valid : 0.0;
  return res;
}

inline std::string hitting_jsonl(const HittingResult& r, bool wall_time) {
  std::string s;
  for (const auto& t : r.trials) {
    nlohmann::json j{{"index", t.index},   {"seed", t.seed},       {"tau_shaft", t.tau_shaft},
                     {"tau_box", t.tau_box}, {"valid", t.valid}, {"equal", t.equal},
                     {"probes", t.probes}, {"nodes", t.nodes}};
    if (wall_time) j["wall_ms"] = t.wall_ms;
    s += j.dump() + "\n";
  }
  return s;
}

inline nlohmann::json hitting_summary(const ExperimentConfig& cfg, const HittingResult& r) {
  return nlohmann::json{{"config", to_json(cfg)},
                        {"seed", cfg.seed},
                        {"n", r.n},
                        {"m", r.m},
                        {"trials", r.trials.size()},
                        {"valid", r.valid},
                        {"invalid", r.trials.size() - r.valid},
                        {"equal", r.equal},
                        {"equality_rate", r.equality_rate},
                        {"order_violations", r.order_violations}};
}

// ---------------------------------------------------------------------------
// Containment-polynomial validation

struct QRow {
  double p = 0;
  double q = 0;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  double phat = 0;
  double sigma = 0;
  double z = 0;
  bool flagged = false;         // chernoff_tail of the observed deviation below 1e-3
  double chernoff_alpha = 0;    // alpha at which the band reaches 1e-3
  double observed_alpha = 0;    // |phat - q| / q
};

inline std::vector<QRow> run_q_validation(int n0, const std::vector<double>& ps, int trials, std::uint64_t seed,
                                          int threads = 1) {
  if (n0 < 1 || n0 > 3) throw ConfigError("qval: n0 must be 1, 2 or 3");
  if (trials < 1) throw ConfigError("qval: trials must be at least 1");
  const Polynomial q = q_small(n0);
  const Dims d{n0, n0, n0};
  std::vector<QRow> rows;
  for (std::size_t g = 0; g < ps.size(); ++g) {
    const double p = ps[g];
    if (!(p >= 0 && p <= 1)) throw ConfigError("qval: p must lie in [0,1]");
    const std::uint64_t base = derive_seed(seed, g);
    const auto hits = parallel_map(static_cast<std::size_t>(trials), threads, [&](std::size_t i) {
      return contains_latin_square(sample_binomial(d, p, derive_seed(base, i))) ? 1 : 0;
    });
    QRow row;
    row.p = p;
    row.q = q(p);
    row.trials = static_cast<std::uint64_t>(trials);
    for (int h : hits) row.successes += static_cast<std::uint64_t>(h);
    row.phat = static_cast<double>(row.successes) / static_cast<double>(row.trials);
    row.sigma = std::sqrt(row.q * (1 - row.q) / static_cast<double>(row.trials));
    row.z = row.sigma > 0 ? (row.phat - row.q) / row.sigma : (row.phat == row.q ? 0.0 : std::numeric_limits<double>::infinity());
    if (row.q > 0) {
      const TailSide side = row.phat < row.q ? TailSide::Lower : TailSide::Upper;
      row.observed_alpha = std::abs(row.phat - row.q) / row.q;
      row.chernoff_alpha = chernoff_alpha(static_cast<double>(row.trials), row.q, 1e-3, side);
      row.flagged = row.observed_alpha > 0 &&
                    chernoff_tail(static_cast<double>(row.trials), row.q, row.observed_alpha, side) < 1e-3;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string q_validation_csv(const std::vector<QRow>& rows) {
  std::string s = "p,q,successes,trials,phat,sigma,z,flagged\r\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9f,%llu,%llu,%.6f,%.6f,%.4f,%d\r\n", r.p, r.q,
                  static_cast<unsigned long long>(r.successes), static_cast<unsigned long long>(r.trials), r.phat,
                  r.sigma, r.z, r.flagged ? 1 : 0);
    s += buf;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Packing campaigns

struct PackingRun {
  int n = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  Trajectory trajectory;
  DeviationReport deviation;
};

inline std::uint64_t packing_seed(std::uint64_t master, int n, int seed_index) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(seed_index));
}

inline PackingRun packing_run(int n, int seed_index, std::uint64_t master, double horizon) {
  PackingRun run;
  run.n = n;
  run.seed_index = seed_index;
  run.seed = packing_seed(master, n, seed_index);
  const auto steps = static_cast<std::size_t>(std::llround(horizon * n * n));
  run.trajectory = process_pack(n, steps, 0, run.seed);
  run.deviation = deviation_report(run.trajectory, n);
  return run;
}

inline std::vector<PackingRun> run_packing_campaign(const std::vector<int>& ns, int seeds, double horizon,
                                                    std::uint64_t master, int threads = 1) {
  if (seeds < 1) throw ConfigError("pack: seeds must be at least 1");
  const std::size_t per = static_cast<std::size_t>(seeds);
  return parallel_map(ns.size() * per, threads, [&](std::size_t i) {
    return packing_run(ns[i / per], static_cast<int>(i % per), master, horizon);
  });
}

inline std::string packing_summary_csv(const std::vector<PackingRun>& runs) {
  std::string s = "n,seed_index,seed,sup_deg_dev,sup_codeg_dev\r\n";
  char buf[256];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%d,%d,%llu,%.6f,%.6f\r\n", r.n, r.seed_index,
                  static_cast<unsigned long long>(r.seed), r.deviation.sup_deg_dev, r.deviation.sup_codeg_dev);
    s += buf;
  }
  return s;
}

/// Fraction of seed indices where the larger n deviates no more than the smaller.
inline double deviation_trend(const std::vector<PackingRun>& runs, int n_small, int n_large) {
  std::map<int, double> small, large;
  for (const auto& r : runs) {
    const double dev = std::max(r.deviation.sup_deg_dev, r.deviation.sup_codeg_dev);
    if (r.n == n_small) small[r.seed_index] = dev;
    if (r.n == n_large) large[r.seed_index] = dev;
  }
  int pairs = 0, ok = 0;
  for (const auto& [idx, dev] : small) {
    const auto it = large.find(idx);
    if (it == large.end()) continue;
    ++pairs;
    if (it->second <= dev) ++ok;
  }
  return pairs ? static_cast<double>(ok) / pairs : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Plots

enum class PlotKind { Curve, Trajectory };

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable parse_numeric_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (first) {
      t.header = fields;
      first = false;
      continue;
    }
    if (fields.size() != t.header.size()) throw SchemaError("csv: row width differs from header");
    std::vector<double> vals;
    for (const auto& f : fields) {
      try {
        vals.push_back(f == "nan" || f == "-nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f));
      } catch (const std::exception&) {
        throw SchemaError("csv: non-numeric field '" + f + "'");
      }
    }
    t.rows.push_back(std::move(vals));
  }
  return t;
}

namespace detail {

struct Frame {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  static constexpr double kW = 640, kH = 400, kL = 60, kR = 150, kT = 20, kB = 50;
  [[nodiscard]] double sx(double x) const { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); }
  [[nodiscard]] double sy(double y) const { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); }
};

inline std::string polyline(const Frame& f, const std::vector<std::pair<double, double>>& pts, const char* color,
                            bool dashed) {
  std::string s = "<polyline fill=\"none\" stroke=\"";
  s += color;
  s += "\" stroke-width=\"1.5\"";
  if (dashed) s += " stroke-dasharray=\"5,3\"";
  s += " points=\"";
  char buf[64];
  bool firstpt = true;
  for (auto [x, y] : pts) {
    if (std::isnan(y)) continue;
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", firstpt ? "" : " ", f.sx(x), f.sy(y));
    s += buf;
    firstpt = false;
  }
  return s + "\"/>\n";
}

inline std::string axes(const Frame& f, const char* xlabel, const char* ylabel, const char* xfmt) {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n"
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                f.sx(f.x0), f.sy(f.y0), f.sx(f.x1), f.sy(f.y0), f.sx(f.x0), f.sy(f.y0), f.sx(f.x0), f.sy(f.y1));
  s += buf;
  for (int i = 0; i <= 5; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 5.0, y = f.y0 + (f.y1 - f.y0) * i / 5.0;
    char xl[32], yl[32];
    std::snprintf(xl, sizeof xl, xfmt, x);
    std::snprintf(yl, sizeof yl, "%.2f", y);
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" text-anchor=\"middle\">%s</text>\n"
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" text-anchor=\"end\">%s</text>\n",
                  f.sx(x), f.sy(f.y0) + 14, xl, f.sx(f.x0) - 4, f.sy(y) + 3, yl);
    s += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">%s</text>\n"
                "<text x=\"14\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 %.2f)\">%s</text>\n",
                (f.sx(f.x0) + f.sx(f.x1)) / 2, Frame::kH - 12, xlabel, (f.sy(f.y0) + f.sy(f.y1)) / 2,
                (f.sy(f.y0) + f.sy(f.y1)) / 2, ylabel);
  return s + buf;
}

inline std::string legend(const std::vector<std::pair<std::string, std::string>>& items) {
  std::string s;
  char buf[256];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double y = Frame::kT + 10 + 16.0 * static_cast<double>(i);
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"12\" height=\"4\" fill=\"%s\"/>\n"
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\">%s</text>\n",
                  Frame::kW - Frame::kR + 10, y - 4, items[i].second.c_str(), Frame::kW - Frame::kR + 26, y + 1,
                  items[i].first.c_str());
    s += buf;
  }
  return s;
}

inline int column(const CsvTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw SchemaError("csv: missing column " + name);
  return static_cast<int>(it - t.header.begin());
}

}  // namespace detail

/// Deterministic SVG line chart of a threshold curve (p, phat with the
/// Wilson band) or a packing trajectory (measured vs predicted, normalized
/// by n, which is read from the step-0 codegree).
inline std::string emit_plot(const std::string& csv_text, PlotKind kind) {
  const CsvTable t = parse_numeric_csv(csv_text);
  std::string body;
  detail::Frame f;
  if (kind == PlotKind::Curve) {
    const int cp = detail::column(t, "p"), ch = detail::column(t, "phat"), cl = detail::column(t, "lo"),
              cu = detail::column(t, "hi");
    std::vector<std::pair<double, double>> mid, lo, hi;
    for (const auto& r : t.rows) {
      mid.emplace_back(r[cp], r[ch]);
      lo.emplace_back(r[cp], r[cl]);
      hi.emplace_back(r[cp], r[cu]);
    }
    body += detail::axes(f, "p", "containment probability", "%.2f");
    if (!t.rows.empty()) {
      std::string band = "<polygon fill=\"#c6d4ef\" stroke=\"none\" points=\"";
      char buf[64];
      bool firstpt = true;
      for (auto [x, y] : hi) {
        std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", firstpt ? "" : " ", f.sx(x), f.sy(y));
        band += buf;
        firstpt = false;
      }
      for (auto it = lo.rbegin(); it != lo.rend(); ++it) {
        std::snprintf(buf, sizeof buf, " %.2f,%.2f", f.sx(it->first), f.sy(it->second));
        band += buf;
      }
      body += band + "\"/>\n";
      body += detail::polyline(f, mid, "#1f4e9c", false);
    }
    body += detail::legend({{"phat", "#1f4e9c"}, {"95% interval", "#c6d4ef"}});
  } else {
    const int cs = detail::column(t, "step"), cd = detail::column(t, "deg_mean"), cc = detail::column(t, "codeg_mean"),
              cy = detail::column(t, "y_pred"), cz = detail::column(t, "z_pred");
    double n = 1;
    if (!t.rows.empty()) {
      if (t.rows.front()[cs] != 0.0) throw SchemaError("trajectory csv must start at step 0");
      n = t.rows.front()[cc];
      f.x1 = std::max(1.0, t.rows.back()[cs]);
    }
    std::vector<std::pair<double, double>> deg, one_minus_y, codeg, z;
    for (const auto& r : t.rows) {
      deg.emplace_back(r[cs], r[cd] / n);
      one_minus_y.emplace_back(r[cs], 1.0 - r[cy]);
      codeg.emplace_back(r[cs], r[cc] / n);
      z.emplace_back(r[cs], r[cz]);
    }
    body += detail::axes(f, "step", "normalized value", "%.0f");
    if (!t.rows.empty()) {
      body += detail::polyline(f, deg, "#1f4e9c", false);
      body += detail::polyline(f, one_minus_y, "#1f4e9c", true);
      body += detail::polyline(f, codeg, "#b2182b", false);
      body += detail::polyline(f, z, "#b2182b", true);
    }
    body += detail::legend({{"degree / n", "#1f4e9c"}, {"1 - y (dashed)", "#1f4e9c"}, {"codegree / n", "#b2182b"},
                            {"z (dashed)", "#b2182b"}});
  }
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n"
         "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n" +
         body + "</svg>\n";
}

}  // namespace latinbox
