#pragma once

// Latin-box finders: an exact backtracking oracle and three constructive
// algorithms (block recursion, plane-by-plane matchings, and the staged
// green/blue construction).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "latinbox/arrays.hpp"
#include "latinbox/matching.hpp"
#include "latinbox/packing.hpp"
#include "latinbox/rng.hpp"

namespace latinbox {

enum class FinderStatus { Success, Exhausted, Aborted, Indeterminate };

inline const char* to_string(FinderStatus s) {
  switch (s) {
    case FinderStatus::Success: return "success";
    case FinderStatus::Exhausted: return "exhausted";
    case FinderStatus::Aborted: return "aborted";
    case FinderStatus::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

struct FinderOutcome {
  FinderStatus status = FinderStatus::Exhausted;
  std::optional<PartialLatinBox> result;
  std::string stage;   // set when aborted
  std::string reason;  // set when aborted or indeterminate
  std::uint64_t nodes = 0;
  int retries = 0;
  std::map<std::string, double> stats;
  std::optional<std::uint64_t> count;  // count_all mode only

  [[nodiscard]] bool success() const noexcept { return status == FinderStatus::Success; }
};

inline nlohmann::json to_json(const FinderOutcome& o) {
  nlohmann::json j;
  j["status"] = to_string(o.status);
  if (!o.stage.empty()) j["stage"] = o.stage;
  if (!o.reason.empty()) j["reason"] = o.reason;
  j["nodes"] = o.nodes;
  j["retries"] = o.retries;
  j["stats"] = o.stats;
  if (o.count) j["count"] = *o.count;
  j["box"] = o.result ? to_json(*o.result) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Exact oracle

enum class ExactMode { First, CountAll };

struct ExactOptions {
  ExactMode mode = ExactMode::First;
  std::uint64_t node_cap = 0;  // 0 = unlimited
  bool mrv = true;             // fewest-candidates-first instead of row-major
  bool propagate = true;       // per-line distinct-representative (Hall) pruning
};

namespace detail {

class ExactSearch {
 public:
  ExactSearch(const Array3D& a, const ExactOptions& opt)
      : rows_(a.rows()), cols_(a.cols()), syms_(a.symbols()), opt_(opt) {
    dom_.resize(static_cast<std::size_t>(rows_) * cols_);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) dom_[cell(r, c)] = a.shaft_word(r, c, 0);
    val_.assign(dom_.size(), -1);
    row_used_.assign(rows_, 0);
    col_used_.assign(cols_, 0);
    remaining_ = static_cast<int>(dom_.size());
  }

  FinderOutcome run() {
    FinderOutcome out;
    bool feasible = true;
    for (std::size_t i = 0; i < dom_.size(); ++i)
      if (!dom_[i]) feasible = false;
    if (feasible && opt_.propagate) {
      for (int r = 0; r < rows_ && feasible; ++r) feasible = line_ok(r, true);
      for (int c = 0; c < cols_ && feasible; ++c) feasible = line_ok(c, false);
      if (feasible) feasible = symbol_lines_ok();
    }
    bool found = false;
    if (feasible) found = dfs();
    out.nodes = nodes_;
    if (opt_.mode == ExactMode::CountAll) {
      out.count = count_;
      if (first_) out.result = first_;
    } else if (found) {
      out.result = first_;
    }
    if (found || (opt_.mode == ExactMode::CountAll && !capped_ && count_ > 0)) {
      out.status = FinderStatus::Success;
    } else if (capped_) {
      out.status = FinderStatus::Indeterminate;
      out.reason = "node cap exceeded";
    } else {
      out.status = FinderStatus::Exhausted;
    }
    if (opt_.mode == ExactMode::CountAll && capped_) {
      out.status = FinderStatus::Indeterminate;
      out.reason = "node cap exceeded";
    }
    return out;
  }

 private:
  [[nodiscard]] std::size_t cell(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }
  [[nodiscard]] std::uint64_t candidates(int r, int c) const {
    return dom_[cell(r, c)] & ~(row_used_[r] | col_used_[c]);
  }

  /// Unassigned cells of a line can receive distinct available symbols.
  bool line_ok(int line, bool is_row) {
    std::uint64_t masks[64];
    int count = 0;
    const int len = is_row ? cols_ : rows_;
    for (int i = 0; i < len; ++i) {
      const int r = is_row ? line : i, c = is_row ? i : line;
      if (val_[cell(r, c)] >= 0) continue;
      const std::uint64_t m = candidates(r, c);
      if (!m) return false;
      masks[count++] = m;
    }
    if (count <= 1) return true;
    std::uint64_t all = 0;
    for (int i = 0; i < count; ++i) all |= masks[i];
    if (std::popcount(all) < count) return false;
    int owner[64];
    std::fill(owner, owner + 64, -1);
    for (int i = 0; i < count; ++i) {
      std::uint64_t seen = 0;
      if (!augment(i, masks, owner, seen)) return false;
    }
    return true;
  }

  /// With n = k every row holds every symbol, so for each symbol the rows
  /// still missing it need distinct columns that can take it.
  bool symbol_lines_ok() {
    if (cols_ != syms_) return true;
    std::uint64_t masks[64];
    int owner[64];
    for (int v = 0; v < syms_; ++v) {
      const std::uint64_t bit = std::uint64_t{1} << v;
      int count = 0;
      for (int r = 0; r < rows_; ++r) {
        if (row_used_[r] & bit) continue;
        std::uint64_t m = 0;
        for (int c = 0; c < cols_; ++c)
          if (val_[cell(r, c)] < 0 && (candidates(r, c) & bit)) m |= std::uint64_t{1} << c;
        if (!m) return false;
        masks[count++] = m;
      }
      std::fill(owner, owner + 64, -1);
      for (int i = 0; i < count; ++i) {
        std::uint64_t seen = 0;
        if (!augment(i, masks, owner, seen)) return false;
      }
    }
    return true;
  }

  static bool augment(int i, const std::uint64_t* masks, int* owner, std::uint64_t& seen) {
    std::uint64_t m = masks[i] & ~seen;
    while (m) {
      const int s = std::countr_zero(m);
      m &= m - 1;
      seen |= std::uint64_t{1} << s;
      if (owner[s] < 0 || augment(owner[s], masks, owner, seen)) {
        owner[s] = i;
        return true;
      }
    }
    return false;
  }

  bool consistent_after(int r, int c) {
    for (int cc = 0; cc < cols_; ++cc)
      if (val_[cell(r, cc)] < 0 && !candidates(r, cc)) return false;
    for (int rr = 0; rr < rows_; ++rr)
      if (val_[cell(rr, c)] < 0 && !candidates(rr, c)) return false;
    if (!opt_.propagate) return true;
    for (int rr = 0; rr < rows_; ++rr)
      if (!line_ok(rr, true)) return false;
    for (int cc = 0; cc < cols_; ++cc)
      if (!line_ok(cc, false)) return false;
    return symbol_lines_ok();
    return true;
  }

  void record_solution() {
    PartialLatinBox box(rows_, cols_, syms_);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) box.assign_unchecked(r, c, val_[cell(r, c)]);
    if (!first_) first_ = std::move(box);
  }

  bool dfs() {
    if (opt_.node_cap && nodes_ >= opt_.node_cap) {
      capped_ = true;
      return false;
    }
    ++nodes_;
    if (remaining_ == 0) {
      record_solution();
      ++count_;
      return opt_.mode == ExactMode::First;
    }
    int br = -1, bc = -1;
    std::uint64_t best = 0;
    if (opt_.mrv) {
      int best_pc = 65;
      for (int r = 0; r < rows_ && best_pc > 1; ++r)
        for (int c = 0; c < cols_; ++c) {
          if (val_[cell(r, c)] >= 0) continue;
          const std::uint64_t m = candidates(r, c);
          const int pc = std::popcount(m);
          if (pc == 0) return false;
          if (pc < best_pc) {
            best_pc = pc;
            br = r;
            bc = c;
            best = m;
            if (pc == 1) break;
          }
        }
    } else {
      for (std::size_t i = 0; i < val_.size(); ++i)
        if (val_[i] < 0) {
          br = static_cast<int>(i) / cols_;
          bc = static_cast<int>(i) % cols_;
          break;
        }
      best = candidates(br, bc);
    }
    // with n = k a (row, symbol) pair must be placed too; branch on it when it has fewer columns
    int sym = -1;
    if (opt_.mrv && cols_ == syms_) {
      int best_pc = std::popcount(best);
      for (int r = 0; r < rows_ && best_pc > 1; ++r)
        for (int v = 0; v < syms_; ++v) {
          const std::uint64_t bit = std::uint64_t{1} << v;
          if (row_used_[r] & bit) continue;
          std::uint64_t cm = 0;
          for (int c = 0; c < cols_; ++c)
            if (val_[cell(r, c)] < 0 && (candidates(r, c) & bit)) cm |= std::uint64_t{1} << c;
          const int pc = std::popcount(cm);
          if (pc == 0) return false;
          if (pc < best_pc) {
            best_pc = pc;
            br = r;
            sym = v;
            best = cm;
            if (pc == 1) break;
          }
        }
    }
    std::uint64_t m = best;
    while (m) {
      const int choice = std::countr_zero(m);
      m &= m - 1;
      const int c = sym < 0 ? bc : choice, v = sym < 0 ? choice : sym;
      if (try_assign(br, c, v)) return true;
      if (capped_) return false;
    }
    return false;
  }

  bool try_assign(int r, int c, int v) {
    const std::uint64_t bit = std::uint64_t{1} << v;
    val_[cell(r, c)] = v;
    row_used_[r] |= bit;
    col_used_[c] |= bit;
    --remaining_;
    bool done = false;
    if (consistent_after(r, c)) done = dfs();
    ++remaining_;
    row_used_[r] &= ~bit;
    col_used_[c] &= ~bit;
    val_[cell(r, c)] = -1;
    return done;
  }

  int rows_, cols_, syms_;
  ExactOptions opt_;
  std::vector<std::uint64_t> dom_;
  std::vector<int> val_;
  std::vector<std::uint64_t> row_used_, col_used_;
  int remaining_ = 0;
  std::uint64_t nodes_ = 0;
  std::uint64_t count_ = 0;
  bool capped_ = false;
  std::optional<PartialLatinBox> first_;
};

}  // namespace detail

/// Decides (or counts) Latin boxes supported by an m x n x k array with
/// m <= n <= k <= 64. `exhausted` is a proof of non-existence; a node-cap hit
/// is reported as `indeterminate`, never as non-existence.
inline FinderOutcome find_exact(const Array3D& a, const ExactOptions& opt = {}) {
  const Dims d = a.dims();
  if (!(d.m <= d.n && d.n <= d.k)) throw std::invalid_argument("find_exact: requires m <= n <= k");
  if (d.k > 64) throw SizeError("find_exact: more than 64 symbols");
  return detail::ExactSearch(a, opt).run();
}

// ---------------------------------------------------------------------------
// Block recursion

/// For n = n0^j: tries every order-n0 Latin square pattern over the
/// n0 x n0 x n0 block grid and recurses into the prescribed blocks.
inline FinderOutcome find_block_recursive(const Array3D& a, int n0 = 2) {
  const Dims d = a.dims();
  if (d.m != d.n || d.n != d.k) throw std::invalid_argument("find_block_recursive: array must be a cube");
  if (n0 != 2 && n0 != 3) throw std::invalid_argument("find_block_recursive: n0 must be 2 or 3");
  int size = d.n;
  while (size > 1 && size % n0 == 0) size /= n0;
  if (size != 1) throw std::invalid_argument("find_block_recursive: n is not a power of n0");

  const auto patterns = all_latin_squares(n0);
  std::uint64_t nodes = 0;
  using Grid = std::vector<int>;

  auto solve = [&](auto&& self, int r0, int c0, int v0, int len) -> std::optional<Grid> {
    ++nodes;
    if (len == 1) return a.get(r0, c0, v0) ? std::optional<Grid>(Grid{0}) : std::nullopt;
    const int b = len / n0;
    std::vector<std::optional<std::optional<Grid>>> memo(static_cast<std::size_t>(n0) * n0 * n0);
    auto block = [&](int i, int j, int s) -> const std::optional<Grid>& {
      auto& slot = memo[(static_cast<std::size_t>(i) * n0 + j) * n0 + s];
      if (!slot) slot = self(self, r0 + i * b, c0 + j * b, v0 + s * b, b);
      return *slot;
    };
    for (const auto& pat : patterns) {
      bool ok = true;
      for (int i = 0; i < n0 && ok; ++i)
        for (int j = 0; j < n0 && ok; ++j) ok = block(i, j, pat.at(i, j)).has_value();
      if (!ok) continue;
      Grid out(static_cast<std::size_t>(len) * len);
      for (int i = 0; i < n0; ++i)
        for (int j = 0; j < n0; ++j) {
          const int s = pat.at(i, j);
          const Grid& sub = *block(i, j, s);
          for (int r = 0; r < b; ++r)
            for (int c = 0; c < b; ++c)
              out[static_cast<std::size_t>(i * b + r) * len + (j * b + c)] = s * b + sub[static_cast<std::size_t>(r) * b + c];
        }
      return out;
    }
    return std::nullopt;
  };

  FinderOutcome out;
  const auto grid = solve(solve, 0, 0, 0, d.n);
  out.nodes = nodes;
  if (grid) {
    PartialLatinBox box(d.n, d.n, d.n);
    for (int r = 0; r < d.n; ++r)
      for (int c = 0; c < d.n; ++c) box.assign_unchecked(r, c, (*grid)[static_cast<std::size_t>(r) * d.n + c]);
    out.status = FinderStatus::Success;
    out.result = std::move(box);
  } else {
    out.status = FinderStatus::Aborted;
    out.stage = "block";
    out.reason = "no block Latin square";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plane-by-plane matchings

enum class UniformMode { Exact, Fast };

struct PlaneMatchingParams {
  std::optional<double> delta;  // default max((p n / ln n)^(-1/3), 1/n)
  std::optional<double> p;      // default: density of the current plane
  bool abort_check = false;
  UniformMode uniform = UniformMode::Exact;
  int permanent_cap = kDefaultPermanentCap;
};

inline double default_delta(double p, int n) {
  const double f = p * n / std::log(static_cast<double>(n));
  return std::max(std::pow(f, -1.0 / 3.0), 1.0 / n);
}

/// Builds an m x n x n Latin box one plane at a time: plane i gets a perfect
/// matching of H_i = G_i ∩ (plane i), where G_i holds the (column, symbol)
/// pairs not used by earlier planes. With abort_check, plane i aborts when
/// Per(H_i) < L^n n!/n^n for L = (1 - delta)(n - i) p.
inline FinderOutcome find_plane_matching(const Array3D& a, const PlaneMatchingParams& params, std::uint64_t seed) {
  const Dims d = a.dims();
  if (d.m > d.n || d.n != d.k) throw std::invalid_argument("find_plane_matching: requires m <= n = k");
  const int n = d.n;
  if (params.uniform == UniformMode::Exact) detail::check_cap(n, params.permanent_cap);
  if (params.delta && !(*params.delta > 0.0 && *params.delta < 1.0))
    throw std::invalid_argument("find_plane_matching: delta must lie in (0,1)");

  Rng rng(seed);
  BipartiteGraph avail = BipartiteGraph::complete(n);
  PartialLatinBox box(d);
  FinderOutcome out;
  for (int i = 0; i < d.m; ++i) {
    const BipartiteGraph plane = BipartiteGraph::from_plane(a, i);
    const BipartiteGraph h = avail.intersect(plane);
    ++out.nodes;
    if (params.abort_check) {
      const double p = params.p.value_or(static_cast<double>(plane.edge_count()) / (static_cast<double>(n) * n));
      const double delta = params.delta.value_or(default_delta(p, n));
      if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("find_plane_matching: default delta falls outside (0,1); pass delta explicitly");
      const double L = (1.0 - delta) * (n - i) * p;
      const double log_per = log_permanent(h, params.permanent_cap);
      out.stats["log_per_" + std::to_string(i + 1)] = log_per;
      if (log_per < pm_count_lower_bound(n, L)) {
        out.status = FinderStatus::Aborted;
        out.stage = "plane " + std::to_string(i + 1);
        out.reason = "below-count-bound";
        return out;
      }
    }
    if (!max_matching(h).perfect()) {
      out.status = FinderStatus::Aborted;
      out.stage = "plane " + std::to_string(i + 1);
      out.reason = "no-matching";
      return out;
    }
    const Matching pm =
        params.uniform == UniformMode::Exact ? sample_uniform_pm(h, rng, params.permanent_cap) : sample_fast_pm(h, rng);
    for (int c = 0; c < n; ++c) {
      const int v = pm.row_to_col[c];
      box.assign_unchecked(i, c, v);
      avail.remove_edge(c, v);
    }
  }
  out.status = FinderStatus::Success;
  out.result = std::move(box);
  return out;
}

// ---------------------------------------------------------------------------
// Staged green/blue construction

struct StagedParams {
  double eps = 0.5;
  int symbol_budget_low = 1;    // ceil(ln ln n), at least 1
  int symbol_budget_high = 1;   // ceil(eps/(1+eps) ln n), at least 1
  double degree_threshold = 0;  // eps/(1+eps) ln n
  int retries = 20;

  static StagedParams defaults(int n, double eps) {
    if (!(eps > 0)) throw std::invalid_argument("StagedParams: eps must be positive");
    StagedParams p;
    p.eps = eps;
    const double ln = std::log(static_cast<double>(n));
    const double lnln = ln > 0 ? std::log(ln) : 0.0;
    p.symbol_budget_low = std::max(1, static_cast<int>(std::ceil(lnln)));
    p.degree_threshold = eps / (1.0 + eps) * ln;
    p.symbol_budget_high = std::max(1, static_cast<int>(std::ceil(p.degree_threshold)));
    return p;
  }

  void validate() const {
    if (!(eps > 0)) throw std::invalid_argument("StagedParams: eps must be positive");
    if (symbol_budget_low < 1 || symbol_budget_high < 1) throw std::invalid_argument("StagedParams: budgets must be >= 1");
    if (retries < 0) throw std::invalid_argument("StagedParams: retries must be >= 0");
  }
};

class StagedFailure : public std::runtime_error {
 public:
  StagedFailure(std::string stage, int r, int c)
      : std::runtime_error(stage + ": menu exhausted at (" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ")"),
        stage_(std::move(stage)), r_(r), c_(c) {}
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
  [[nodiscard]] int row() const noexcept { return r_; }
  [[nodiscard]] int col() const noexcept { return c_; }

 private:
  std::string stage_;
  int r_, c_;
};

struct B2Build {
  PartialLatinBox box;
  std::vector<Position> s;  // low high-degree positions (green d_m below threshold)
  std::vector<Position> t;  // subset of s with small low-symbol degree
  int retries = 0;
};

namespace detail {

/// Row/column symbol usage for an n x n grid over m symbols.
class UsageTable {
 public:
  UsageTable(int n, int m) : n_(n), m_(m), row_(static_cast<std::size_t>(n) * m, 0), col_(row_.size(), 0) {}
  explicit UsageTable(const PartialLatinBox& b) : UsageTable(b.rows(), b.symbols()) {
    for (int r = 0; r < b.rows(); ++r)
      for (int c = 0; c < b.cols(); ++c)
        if (b.covered(r, c)) mark(r, c, b.at(r, c));
  }
  [[nodiscard]] bool used(int r, int c, int v) const {
    return row_[static_cast<std::size_t>(r) * m_ + v] || col_[static_cast<std::size_t>(c) * m_ + v];
  }
  [[nodiscard]] bool used_in_row(int r, int v) const { return row_[static_cast<std::size_t>(r) * m_ + v]; }
  [[nodiscard]] bool used_in_col(int c, int v) const { return col_[static_cast<std::size_t>(c) * m_ + v]; }
  void mark(int r, int c, int v) {
    row_[static_cast<std::size_t>(r) * m_ + v] = 1;
    col_[static_cast<std::size_t>(c) * m_ + v] = 1;
  }

 private:
  int n_, m_;
  std::vector<char> row_, col_;
};

/// First entry of a random menu (size `budget`, drawn from `pool`) that is
/// unused in row r and column c, or -1.
inline int pick_from_menu(const std::vector<int>& pool, int budget, const UsageTable& used, int r, int c, Rng& rng) {
  const auto menu = rng.choose(pool, static_cast<std::size_t>(budget));
  for (int v : menu)
    if (!used.used(r, c, v)) return v;
  return -1;
}

}  // namespace detail

/// Covers every position whose green high-symbol degree is below the
/// threshold: first the positions T with few low symbols (one uniform symbol
/// each, low symbols preferred), then the rest of S greedily from random
/// low-symbol menus. Retries with fresh randomness on collision or menu
/// exhaustion; throws StagedFailure when the retries run out.
inline B2Build build_B2(const ColoredArray& ca, const StagedParams& params, Rng& rng) {
  params.validate();
  const Dims d = ca.dims();
  const int n = d.n, m = d.k;
  if (d.m != n || m < n) throw std::invalid_argument("build_B2: array must be n x n x m with n <= m");
  const Array3D full = ca.combined();

  B2Build out{PartialLatinBox(d), {}, {}, 0};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (static_cast<double>(ca.green.shaft_count(r, c, n)) < params.degree_threshold) {
        out.s.emplace_back(r, c);
        const ShaftDegrees deg = shaft_degrees(full, r, c);
        if (deg.d - deg.d_m <= params.symbol_budget_low) out.t.emplace_back(r, c);
      }
    }
  std::vector<char> in_t(static_cast<std::size_t>(n) * n, 0);
  for (auto [r, c] : out.t) in_t[static_cast<std::size_t>(r) * n + c] = 1;

  Position last_failure{0, 0};
  for (int attempt = 0; attempt <= params.retries; ++attempt) {
    PartialLatinBox box(d);
    detail::UsageTable used(n, m);
    bool ok = true;
    for (auto [r, c] : out.t) {
      std::vector<int> low, high;
      for (int v : full.shaft_symbols(r, c)) (v < n ? low : high).push_back(v);
      const auto& pool = low.empty() ? high : low;
      if (pool.empty()) {
        ok = false;
        last_failure = {r, c};
        break;
      }
      const int v = pool[rng.below(pool.size())];
      if (used.used(r, c, v)) {
        ok = false;
        last_failure = {r, c};
        break;
      }
      box.assign_unchecked(r, c, v);
      used.mark(r, c, v);
    }
    if (ok) {
      for (auto [r, c] : out.s) {
        if (in_t[static_cast<std::size_t>(r) * n + c]) continue;
        std::vector<int> low;
        for (int v : full.shaft_symbols(r, c))
          if (v < n) low.push_back(v);
        const int v = detail::pick_from_menu(low, params.symbol_budget_low, used, r, c, rng);
        if (v < 0) {
          ok = false;
          last_failure = {r, c};
          break;
        }
        box.assign_unchecked(r, c, v);
        used.mark(r, c, v);
      }
    }
    if (ok) {
      out.box = std::move(box);
      out.retries = attempt;
      return out;
    }
  }
  throw StagedFailure("B2", last_failure.first, last_failure.second);
}

inline B2Build build_B2(const ColoredArray& ca, const StagedParams& params, std::uint64_t seed) {
  Rng rng(seed);
  return build_B2(ca, params, rng);
}

/// B2 from build_B2; B3 from a random greedy packing of the green array on
/// the low symbols; B4 = B2 plus every B3 entry whose symbol B2 does not use
/// in that row or column; the remaining positions are covered greedily from
/// random menus of high symbols.
inline FinderOutcome find_staged(const ColoredArray& ca, const StagedParams& params, std::uint64_t seed) {
  params.validate();
  const Dims d = ca.dims();
  const int n = d.n, m = d.k;
  if (d.m != n || m < n) throw std::invalid_argument("find_staged: array must be n x n x m with n <= m");
  Rng rng(seed);
  FinderOutcome out;
  const Array3D full = ca.combined();

  std::optional<B2Build> built;
  try {
    built = build_B2(ca, params, rng);
  } catch (const StagedFailure& e) {
    out.status = FinderStatus::Aborted;
    out.stage = "B2";
    out.reason = e.what();
    out.retries = params.retries;
    return out;
  }
  const B2Build& b2 = *built;
  out.retries += b2.retries;
  out.stats["S"] = static_cast<double>(b2.s.size());
  out.stats["T"] = static_cast<double>(b2.t.size());
  out.stats["B2"] = static_cast<double>(b2.box.covered_count());

  Array3D low_cube(Dims{n, n, n});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      for (int v : ca.green.shaft_symbols(r, c))
        if (v < n) low_cube.set(r, c, v);
  const TriangleSET b3 = greedy_pack(from_array(low_cube), rng);
  out.stats["B3"] = static_cast<double>(b3.size());

  PartialLatinBox b4 = b2.box;
  {
    const detail::UsageTable b2_used(b2.box);
    for (const Triangle& t : b3.chosen()) {
      if (b4.covered(t.a, t.b)) continue;
      if (b2_used.used_in_row(t.a, t.c) || b2_used.used_in_col(t.b, t.c)) continue;
      b4.assign_unchecked(t.a, t.b, t.c);
    }
  }
  out.stats["B4"] = static_cast<double>(b4.covered_count());

  std::vector<Position> open;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (!b4.covered(r, c)) open.emplace_back(r, c);
  out.stats["final_cells"] = static_cast<double>(open.size());

  Position last_failure{0, 0};
  for (int attempt = 0; attempt <= params.retries; ++attempt) {
    PartialLatinBox box = b4;
    detail::UsageTable used(box);
    bool ok = true;
    for (auto [r, c] : open) {
      std::vector<int> high;
      for (int v : full.shaft_symbols(r, c))
        if (v >= n) high.push_back(v);
      const int v = detail::pick_from_menu(high, params.symbol_budget_high, used, r, c, rng);
      if (v < 0) {
        ok = false;
        last_failure = {r, c};
        break;
      }
      box.assign_unchecked(r, c, v);
      used.mark(r, c, v);
    }
    ++out.nodes;
    if (ok) {
      out.retries += attempt;
      if (!validate_latin_box(box, full).proper) throw std::logic_error("find_staged: produced an invalid box");
      out.status = FinderStatus::Success;
      out.result = std::move(box);
      return out;
    }
  }
  out.retries += params.retries;
  out.status = FinderStatus::Aborted;
  out.stage = "final";
  out.reason = StagedFailure("final", last_failure.first, last_failure.second).what();
  return out;
}

}  // namespace latinbox
