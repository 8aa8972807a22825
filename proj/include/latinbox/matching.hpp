#pragma once

// Bipartite-graph kernel: maximum matching, exact permanents, uniform
// perfect-matching sampling, L-factors, and pseudorandomness audits.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "latinbox/arrays.hpp"
#include "latinbox/rng.hpp"

namespace latinbox {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt to_bigint(unsigned __int128 x) {
  BigInt hi = static_cast<std::uint64_t>(x >> 64);
  return (hi << 64) + BigInt(static_cast<std::uint64_t>(x));
}

/// Raised when an exact computation is asked for a size beyond its cap.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class NoPerfectMatching : public std::runtime_error {
 public:
  NoPerfectMatching() : std::runtime_error("graph has no perfect matching") {}
};

inline constexpr int kDefaultPermanentCap = 24;

/// n x n biadjacency bit matrix with cached row and column degrees.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;
  explicit BipartiteGraph(int n) : n_(n), words_((n + 63) / 64) {
    if (n < 0) throw std::invalid_argument("BipartiteGraph: negative size");
    adj_.assign(static_cast<std::size_t>(n) * words_, 0);
    row_deg_.assign(n, 0);
    col_deg_.assign(n, 0);
  }

  static BipartiteGraph complete(int n) {
    BipartiteGraph g(n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) g.add_edge(r, c);
    return g;
  }
  static BipartiteGraph identity(int n) {
    BipartiteGraph g(n);
    for (int r = 0; r < n; ++r) g.add_edge(r, r);
    return g;
  }
  /// Graph of plane r of an array: edge (c, v) iff a(r, c, v) = 1.
  static BipartiteGraph from_plane(const Array3D& a, int r) {
    if (a.cols() != a.symbols()) throw std::invalid_argument("from_plane: plane must be square");
    BipartiteGraph g(a.cols());
    for (int c = 0; c < a.cols(); ++c)
      for (int v : a.shaft_symbols(r, c)) g.add_edge(c, v);
    return g;
  }

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] bool has_edge(int r, int c) const { return (adj_.at(index(r, c)) >> (c & 63)) & 1U; }

  void add_edge(int r, int c) {
    std::uint64_t& w = adj_.at(index(r, c));
    const std::uint64_t bit = std::uint64_t{1} << (c & 63);
    if (w & bit) return;
    w |= bit;
    ++row_deg_[r];
    ++col_deg_[c];
  }
  void remove_edge(int r, int c) {
    std::uint64_t& w = adj_.at(index(r, c));
    const std::uint64_t bit = std::uint64_t{1} << (c & 63);
    if (!(w & bit)) return;
    w &= ~bit;
    --row_deg_[r];
    --col_deg_[c];
  }

  [[nodiscard]] int row_degree(int r) const { return row_deg_.at(r); }
  [[nodiscard]] int col_degree(int c) const { return col_deg_.at(c); }
  [[nodiscard]] const std::vector<int>& row_degrees() const noexcept { return row_deg_; }
  [[nodiscard]] const std::vector<int>& col_degrees() const noexcept { return col_deg_; }

  [[nodiscard]] std::size_t edge_count() const {
    return static_cast<std::size_t>(std::accumulate(row_deg_.begin(), row_deg_.end(), 0));
  }

  /// Common degree if the graph is regular, otherwise nullopt.
  [[nodiscard]] std::optional<int> regular_degree() const {
    if (n_ == 0) return 0;
    const int k = row_deg_[0];
    for (int i = 0; i < n_; ++i)
      if (row_deg_[i] != k || col_deg_[i] != k) return std::nullopt;
    return k;
  }

  /// Neighbours of row r as a bitmask; only valid for n <= 64.
  [[nodiscard]] std::uint64_t row_mask(int r) const {
    if (n_ > 64) throw SizeError("row_mask: n > 64");
    return adj_.at(static_cast<std::size_t>(r) * words_);
  }

  [[nodiscard]] std::vector<int> neighbors(int r) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(row_deg_.at(r)));
    for (int w = 0; w < words_; ++w) {
      std::uint64_t word = adj_[static_cast<std::size_t>(r) * words_ + w];
      while (word) {
        out.push_back(w * 64 + std::countr_zero(word));
        word &= word - 1;
      }
    }
    return out;
  }

  /// Edge-wise intersection.
  [[nodiscard]] BipartiteGraph intersect(const BipartiteGraph& other) const {
    if (other.n_ != n_) throw std::invalid_argument("BipartiteGraph::intersect: size mismatch");
    BipartiteGraph g(n_);
    for (int r = 0; r < n_; ++r)
      for (int c : neighbors(r))
        if (other.has_edge(r, c)) g.add_edge(r, c);
    return g;
  }

  /// The graph with rows relabelled by row_perm and columns by col_perm
  /// (edge (r,c) becomes (row_perm[r], col_perm[c])).
  [[nodiscard]] BipartiteGraph permuted(const std::vector<int>& row_perm, const std::vector<int>& col_perm) const {
    BipartiteGraph g(n_);
    for (int r = 0; r < n_; ++r)
      for (int c : neighbors(r)) g.add_edge(row_perm.at(r), col_perm.at(c));
    return g;
  }

  friend bool operator==(const BipartiteGraph& a, const BipartiteGraph& b) { return a.n_ == b.n_ && a.adj_ == b.adj_; }

 private:
  [[nodiscard]] std::size_t index(int r, int c) const {
    if (r < 0 || r >= n_ || c < 0 || c >= n_) throw std::out_of_range("BipartiteGraph: index out of range");
    return static_cast<std::size_t>(r) * words_ + (c >> 6);
  }

  int n_ = 0;
  int words_ = 0;
  std::vector<std::uint64_t> adj_;
  std::vector<int> row_deg_;
  std::vector<int> col_deg_;
};

/// Partial injection rows -> columns; -1 marks an unmatched row.
struct Matching {
  std::vector<int> row_to_col;

  [[nodiscard]] int size() const {
    return static_cast<int>(std::count_if(row_to_col.begin(), row_to_col.end(), [](int c) { return c >= 0; }));
  }
  [[nodiscard]] bool perfect() const { return size() == static_cast<int>(row_to_col.size()); }
  [[nodiscard]] bool injective() const {
    std::vector<int> seen;
    for (int c : row_to_col)
      if (c >= 0) seen.push_back(c);
    std::sort(seen.begin(), seen.end());
    return std::adjacent_find(seen.begin(), seen.end()) == seen.end();
  }
  friend bool operator==(const Matching&, const Matching&) = default;
};

// ---------------------------------------------------------------------------
// Maximum matching (Hopcroft-Karp)

inline Matching max_matching(const BipartiteGraph& g) {
  const int n = g.size();
  std::vector<std::vector<int>> nbr(n);
  for (int r = 0; r < n; ++r) nbr[r] = g.neighbors(r);

  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> match_row(n, -1), match_col(n, -1), dist(n);

  auto bfs = [&] {
    std::queue<int> q;
    bool found = false;
    for (int r = 0; r < n; ++r) {
      if (match_row[r] < 0) {
        dist[r] = 0;
        q.push(r);
      } else {
        dist[r] = kInf;
      }
    }
    while (!q.empty()) {
      int r = q.front();
      q.pop();
      for (int c : nbr[r]) {
        int r2 = match_col[c];
        if (r2 < 0) {
          found = true;
        } else if (dist[r2] == kInf) {
          dist[r2] = dist[r] + 1;
          q.push(r2);
        }
      }
    }
    return found;
  };

  std::vector<std::size_t> it(n);
  auto dfs = [&](auto&& self, int r) -> bool {
    for (; it[r] < nbr[r].size(); ++it[r]) {
      int c = nbr[r][it[r]];
      int r2 = match_col[c];
      if (r2 < 0 || (dist[r2] == dist[r] + 1 && self(self, r2))) {
        match_row[r] = c;
        match_col[c] = r;
        ++it[r];
        return true;
      }
    }
    dist[r] = kInf;
    return false;
  };

  while (bfs()) {
    std::fill(it.begin(), it.end(), 0);
    for (int r = 0; r < n; ++r)
      if (match_row[r] < 0) dfs(dfs, r);
  }
  return Matching{match_row};
}

// ---------------------------------------------------------------------------
// Permanent (Ryser with Gray-code column updates)

namespace detail {

/// Ryser's formula over rows given as column bitmasks on s <= 32 columns.
/// Arithmetic is modulo 2^128; the true permanent (at most 32!) is < 2^127
/// so the final value is exact even if partial sums wrap.
inline unsigned __int128 ryser(const std::vector<std::uint32_t>& rows, int s) {
  const int n = static_cast<int>(rows.size());
  if (n != s) throw std::invalid_argument("ryser: matrix must be square");
  if (n == 0) return 1;
  std::vector<std::int64_t> row_sum(n, 0);
  unsigned __int128 total = 0;
  std::uint32_t subset = 0;
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t g = 1; g < count; ++g) {
    const int j = std::countr_zero(g);
    const std::uint32_t bit = std::uint32_t{1} << j;
    subset ^= bit;
    const int delta = (subset & bit) ? 1 : -1;
    unsigned __int128 prod = 1;
    bool zero = false;
    for (int i = 0; i < n; ++i) {
      if (rows[i] & bit) row_sum[i] += delta;
      if (row_sum[i] == 0) zero = true;
    }
    if (zero) continue;
    for (int i = 0; i < n; ++i) prod *= static_cast<unsigned __int128>(row_sum[i]);
    // sign (-1)^(n - |S|)
    if (((n - std::popcount(subset)) & 1) != 0)
      total -= prod;
    else
      total += prod;
  }
  return total;
}

/// Permanents of all minors obtained by deleting row 0 and each column j,
/// for rows given as bitmasks over s columns: out[j] = Per(A - row0 - col j).
inline std::vector<unsigned __int128> ryser_row0_minors(const std::vector<std::uint32_t>& rows, int s) {
  std::vector<unsigned __int128> out(s, 0);
  if (s == 1) {
    out[0] = 1;
    return out;
  }
  const int rest = s - 1;  // rows 1..s-1
  std::vector<std::int64_t> row_sum(rest, 0);
  std::uint32_t subset = 0;
  const std::uint32_t all = s == 32 ? ~std::uint32_t{0} : ((std::uint32_t{1} << s) - 1);
  const std::uint64_t count = std::uint64_t{1} << s;
  for (std::uint64_t g = 1; g < count; ++g) {
    const int j = std::countr_zero(g);
    const std::uint32_t bit = std::uint32_t{1} << j;
    subset ^= bit;
    const int delta = (subset & bit) ? 1 : -1;
    bool zero = false;
    for (int i = 0; i < rest; ++i) {
      if (rows[i + 1] & bit) row_sum[i] += delta;
      if (row_sum[i] == 0) zero = true;
    }
    const int size = std::popcount(subset);
    if (zero || size > rest) continue;
    unsigned __int128 prod = 1;
    for (int i = 0; i < rest; ++i) prod *= static_cast<unsigned __int128>(row_sum[i]);
    const bool negative = ((rest - size) & 1) != 0;
    std::uint32_t outside = all & ~subset;
    while (outside) {
      const int col = std::countr_zero(outside);
      outside &= outside - 1;
      if (negative)
        out[col] -= prod;
      else
        out[col] += prod;
    }
  }
  return out;
}

inline std::vector<std::uint32_t> compact_rows(const BipartiteGraph& g, const std::vector<int>& rows,
                                               const std::vector<int>& cols) {
  std::vector<int> col_pos(g.size(), -1);
  for (std::size_t i = 0; i < cols.size(); ++i) col_pos[cols[i]] = static_cast<int>(i);
  std::vector<std::uint32_t> out;
  out.reserve(rows.size());
  for (int r : rows) {
    std::uint32_t mask = 0;
    for (int c : g.neighbors(r))
      if (col_pos[c] >= 0) mask |= std::uint32_t{1} << col_pos[c];
    out.push_back(mask);
  }
  return out;
}

inline void check_cap(int n, int cap) {
  if (cap > 32) throw std::invalid_argument("permanent cap above 32 is not supported");
  if (n > cap) throw SizeError("permanent: n = " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
}

}  // namespace detail

/// Number of perfect matchings of g, exactly.
inline BigInt permanent(const BipartiteGraph& g, int cap = kDefaultPermanentCap) {
  detail::check_cap(g.size(), cap);
  std::vector<int> idx(g.size());
  std::iota(idx.begin(), idx.end(), 0);
  return to_bigint(detail::ryser(detail::compact_rows(g, idx, idx), g.size()));
}

inline double log_permanent(const BipartiteGraph& g, int cap = kDefaultPermanentCap) {
  const BigInt p = permanent(g, cap);
  if (p == 0) return -std::numeric_limits<double>::infinity();
  return std::log(p.convert_to<double>());
}

// ---------------------------------------------------------------------------
// Perfect-matching sampling

/// Uniformly random perfect matching: rows are assigned in order, each
/// column chosen with probability proportional to the permanent of the
/// remaining minor.
inline Matching sample_uniform_pm(const BipartiteGraph& g, Rng& rng, int cap = kDefaultPermanentCap) {
  const int n = g.size();
  detail::check_cap(n, cap);
  Matching result{std::vector<int>(n, -1)};
  std::vector<int> cols(n);
  std::iota(cols.begin(), cols.end(), 0);
  for (int r = 0; r < n; ++r) {
    std::vector<int> rows(n - r);
    std::iota(rows.begin(), rows.end(), r);
    const auto masks = detail::compact_rows(g, rows, cols);
    const auto minors = detail::ryser_row0_minors(masks, static_cast<int>(cols.size()));
    unsigned __int128 total = 0;
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (masks[0] & (std::uint32_t{1} << j)) total += minors[j];
    if (total == 0) throw NoPerfectMatching();
    unsigned __int128 pick = rng.below128(total);
    std::size_t chosen = cols.size();
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (!(masks[0] & (std::uint32_t{1} << j))) continue;
      if (pick < minors[j]) {
        chosen = j;
        break;
      }
      pick -= minors[j];
    }
    result.row_to_col[r] = cols[chosen];
    cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  return result;
}

inline Matching sample_uniform_pm(const BipartiteGraph& g, std::uint64_t seed, int cap = kDefaultPermanentCap) {
  Rng rng(seed);
  return sample_uniform_pm(g, rng, cap);
}

/// Fast, non-uniform perfect matching: Hopcroft-Karp on randomly relabelled
/// rows and columns. For sizes beyond the permanent cap.
inline Matching sample_fast_pm(const BipartiteGraph& g, Rng& rng) {
  const int n = g.size();
  std::vector<int> rp(n), cp(n);
  std::iota(rp.begin(), rp.end(), 0);
  std::iota(cp.begin(), cp.end(), 0);
  rng.shuffle(rp);
  rng.shuffle(cp);
  const Matching m = max_matching(g.permuted(rp, cp));
  if (!m.perfect()) throw NoPerfectMatching();
  std::vector<int> col_inv(n);
  for (int c = 0; c < n; ++c) col_inv[cp[c]] = c;
  Matching out{std::vector<int>(n, -1)};
  for (int r = 0; r < n; ++r) out.row_to_col[r] = col_inv[m.row_to_col[rp[r]]];
  return out;
}

inline BipartiteGraph random_subgraph(const BipartiteGraph& g, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("random_subgraph: p must lie in [0,1]");
  BipartiteGraph out(g.size());
  for (int r = 0; r < g.size(); ++r)
    for (int c : g.neighbors(r))
      if (rng.bernoulli(p)) out.add_edge(r, c);
  return out;
}

inline BipartiteGraph random_subgraph(const BipartiteGraph& g, double p, std::uint64_t seed) {
  Rng rng(seed);
  return random_subgraph(g, p, rng);
}

// ---------------------------------------------------------------------------
// L-factors

namespace detail {

/// Dinic max-flow on a small dense network.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes) : graph_(nodes), level_(nodes), it_(nodes) {}

  int add_edge(int from, int to, int cap) {
    graph_[from].push_back({to, cap, static_cast<int>(graph_[to].size())});
    graph_[to].push_back({from, 0, static_cast<int>(graph_[from].size()) - 1});
    return static_cast<int>(graph_[from].size()) - 1;
  }

  long long run(int s, int t) {
    long long flow = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (long long f = dfs(s, t, std::numeric_limits<int>::max())) flow += f;
    }
    return flow;
  }

  [[nodiscard]] int residual(int from, int edge) const { return graph_[from][edge].cap; }

 private:
  struct Edge {
    int to;
    int cap;
    int rev;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (const Edge& e : graph_[u])
        if (e.cap > 0 && level_[e.to] < 0) {
          level_[e.to] = level_[u] + 1;
          q.push(e.to);
        }
    }
    return level_[t] >= 0;
  }

  long long dfs(int u, int t, int f) {
    if (u == t) return f;
    for (int& i = it_[u]; i < static_cast<int>(graph_[u].size()); ++i) {
      Edge& e = graph_[u][i];
      if (e.cap > 0 && level_[e.to] == level_[u] + 1) {
        long long d = dfs(e.to, t, std::min(f, e.cap));
        if (d > 0) {
          e.cap -= static_cast<int>(d);
          graph_[e.to][e.rev].cap += static_cast<int>(d);
          return d;
        }
      }
    }
    return 0;
  }

  std::vector<std::vector<Edge>> graph_;
  std::vector<int> level_;
  std::vector<int> it_;
};

}  // namespace detail

/// An L-regular spanning subgraph of g, if one exists. Decided by max-flow:
/// source -> row (capacity L), edge (capacity 1), column -> sink (capacity L);
/// a factor exists iff the flow saturates at nL.
inline std::optional<BipartiteGraph> find_L_factor(const BipartiteGraph& g, int L) {
  const int n = g.size();
  if (L < 0 || L > n) throw std::invalid_argument("find_L_factor: requires 0 <= L <= n");
  if (L == 0) return BipartiteGraph(n);
  for (int i = 0; i < n; ++i)
    if (g.row_degree(i) < L || g.col_degree(i) < L) return std::nullopt;
  const int source = 2 * n;
  const int sink = 2 * n + 1;
  detail::MaxFlow flow(2 * n + 2);
  std::vector<std::vector<std::pair<int, int>>> handles(n);  // (column, edge id)
  for (int r = 0; r < n; ++r) {
    flow.add_edge(source, r, L);
    for (int c : g.neighbors(r)) handles[r].emplace_back(c, flow.add_edge(r, n + c, 1));
  }
  for (int c = 0; c < n; ++c) flow.add_edge(n + c, sink, L);
  if (flow.run(source, sink) != static_cast<long long>(n) * L) return std::nullopt;
  BipartiteGraph witness(n);
  for (int r = 0; r < n; ++r)
    for (auto [c, id] : handles[r])
      if (flow.residual(r, id) == 0) witness.add_edge(r, c);
  return witness;
}

inline bool has_L_factor(const BipartiteGraph& g, int L) { return find_L_factor(g, L).has_value(); }

/// The Hall-type criterion checked directly over all X subset U, Y subset V:
/// E(U\X, V\Y) >= (n - |X| - |Y|) L. Exponential; n <= 10.
inline bool has_L_factor_hall(const BipartiteGraph& g, int L) {
  const int n = g.size();
  if (n > 10) throw SizeError("has_L_factor_hall: n > 10");
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<std::uint32_t> rows(n);
  for (int r = 0; r < n; ++r) rows[r] = static_cast<std::uint32_t>(n == 0 ? 0 : g.row_mask(r));
  for (std::uint32_t x = 0; x <= full; ++x) {
    for (std::uint32_t y = 0; y <= full; ++y) {
      const int need = (n - std::popcount(x) - std::popcount(y)) * L;
      if (need <= 0) continue;
      int edges = 0;
      const std::uint32_t keep_cols = full & ~y;
      for (int r = 0; r < n; ++r)
        if (!(x & (std::uint32_t{1} << r))) edges += std::popcount(rows[r] & keep_cols);
      if (edges < need) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Pseudorandomness audit

enum class AuditMode { Exact, Sampled };

struct AuditReport {
  bool violation_found = false;
  std::vector<int> worst_x;  // rows
  std::vector<int> worst_y;  // columns
  double worst_ratio = std::numeric_limits<double>::infinity();  // min E(X,Y) n / (|X||Y| k)
  std::size_t pairs_examined = 0;
  int min_set_size = 0;
  double annotation_c = 1.0;  // echoed from AuditParams
};

struct AuditParams {
  double c = 0.1;
  double eps = 0.5;
  AuditMode mode = AuditMode::Sampled;
  std::size_t budget = 10000;
  std::uint64_t seed = 0;
  double annotation_c = 1.0;  // constant of the sparse-matching running-time bound; reported, never used
};

/// Checks whether every X, Y with |X|,|Y| >= (eps/10) n spans at least
/// (1-c)|X||Y|k/n edges. Exact mode enumerates every X and, for each size of
/// Y, the Y minimizing E(X,Y) (the columns with fewest edges into X), which
/// covers all qualifying pairs.
inline AuditReport pseudorandom_audit(const BipartiteGraph& g, const AuditParams& params) {
  const int n = g.size();
  const auto k = g.regular_degree();
  if (!k) throw std::invalid_argument("pseudorandom_audit: graph is not regular");
  if (*k == 0) throw std::invalid_argument("pseudorandom_audit: graph has no edges");
  AuditReport rep;
  rep.annotation_c = params.annotation_c;
  rep.min_set_size = std::max(1, static_cast<int>(std::ceil(params.eps / 10.0 * n - 1e-12)));
  const int smin = rep.min_set_size;
  if (smin > n) return rep;
  const double kd = *k;

  auto consider = [&](const std::vector<int>& xs, const std::vector<int>& ys, long long edges) {
    ++rep.pairs_examined;
    const double ratio = static_cast<double>(edges) * n / (static_cast<double>(xs.size()) * ys.size() * kd);
    if (ratio < rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.worst_x = xs;
      rep.worst_y = ys;
    }
  };

  if (params.mode == AuditMode::Exact) {
    if (n > 20) throw SizeError("pseudorandom_audit: exact mode requires n <= 20");
    std::vector<int> into(n);
    std::vector<int> order(n);
    for (std::uint32_t x = 1; x < (std::uint32_t{1} << n); ++x) {
      if (std::popcount(x) < smin) continue;
      std::vector<int> xs;
      std::fill(into.begin(), into.end(), 0);
      for (int r = 0; r < n; ++r)
        if (x & (std::uint32_t{1} << r)) {
          xs.push_back(r);
          for (int c : g.neighbors(r)) ++into[c];
        }
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return into[a] < into[b]; });
      long long edges = 0;
      std::vector<int> ys;
      for (int t = 1; t <= n; ++t) {
        edges += into[order[t - 1]];
        ys.push_back(order[t - 1]);
        if (t >= smin) {
          std::vector<int> sorted_ys = ys;
          std::sort(sorted_ys.begin(), sorted_ys.end());
          consider(xs, sorted_ys, edges);
        }
      }
    }
  } else {
    Rng rng(params.seed);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t b = 0; b < params.budget; ++b) {
      const auto sx = static_cast<std::size_t>(smin) + rng.below(static_cast<std::uint64_t>(n - smin + 1));
      const auto sy = static_cast<std::size_t>(smin) + rng.below(static_cast<std::uint64_t>(n - smin + 1));
      auto xs = rng.choose(all, sx);
      auto ys = rng.choose(all, sy);
      std::sort(xs.begin(), xs.end());
      std::sort(ys.begin(), ys.end());
      long long edges = 0;
      for (int r : xs)
        for (int c : ys) edges += g.has_edge(r, c) ? 1 : 0;
      consider(xs, ys, edges);
    }
  }
  rep.violation_found = rep.worst_ratio < 1.0 - params.c;
  return rep;
}

/// ln of the Egorychev-Falikman count L^n n!/n^n of perfect matchings in an
/// L-regular bipartite graph on 2n vertices; -inf for L = 0.
inline double pm_count_lower_bound(int n, double L) {
  if (L < 0) throw std::invalid_argument("pm_count_lower_bound: L must be non-negative");
  if (L == 0) return -std::numeric_limits<double>::infinity();
  return n * std::log(L) + std::lgamma(n + 1.0) - n * std::log(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Serialization: JSON edge lists (1-based) and packed binary.

inline nlohmann::json to_json(const BipartiteGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (int r = 0; r < g.size(); ++r)
    for (int c : g.neighbors(r)) edges.push_back({r + 1, c + 1});
  return {{"n", g.size()}, {"edges", std::move(edges)}};
}

inline BipartiteGraph graph_from_json(const nlohmann::json& j) {
  BipartiteGraph g(j.at("n").get<int>());
  for (const auto& e : j.at("edges")) g.add_edge(e.at(0).get<int>() - 1, e.at(1).get<int>() - 1);
  return g;
}

inline constexpr char kGraphMagic[4] = {'L', 'B', 'G', '2'};

/// Magic "LBG2", u32 version (1), u32 n, then n*n bits row-major, LSB first.
inline void write_binary(std::ostream& os, const BipartiteGraph& g) {
  os.write(kGraphMagic, 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(g.size()));
  const std::size_t n = static_cast<std::size_t>(g.size());
  std::vector<unsigned char> bytes((n * n + 7) / 8, 0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (g.has_edge(static_cast<int>(r), static_cast<int>(c))) {
        const std::size_t i = r * n + c;
        bytes[i >> 3] |= static_cast<unsigned char>(1U << (i & 7));
      }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline BipartiteGraph read_graph_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kGraphMagic, 4) != 0)
    throw std::runtime_error("read_graph_binary: bad magic");
  if (detail::get_u32(is) != 1) throw std::runtime_error("read_graph_binary: unsupported version");
  const auto n = static_cast<int>(detail::get_u32(is));
  BipartiteGraph g(n);
  const auto nn = static_cast<std::size_t>(n) * n;
  std::vector<unsigned char> bytes((nn + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("read_graph_binary: truncated payload");
  for (std::size_t i = 0; i < nn; ++i)
    if ((bytes[i >> 3] >> (i & 7)) & 1U) g.add_edge(static_cast<int>(i / n), static_cast<int>(i % n));
  return g;
}

}  // namespace latinbox
