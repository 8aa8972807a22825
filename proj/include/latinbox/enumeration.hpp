#pragma once

// Exact counts at tiny sizes, containment polynomials and their fixed
// points, and log-scale asymptotic formulas and permanent bounds.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "latinbox/arrays.hpp"
#include "latinbox/matching.hpp"

namespace latinbox {

/// Univariate real polynomial; coeffs[i] multiplies p^i.
struct Polynomial {
  std::vector<double> coeffs;

  [[nodiscard]] int degree() const {
    for (int i = static_cast<int>(coeffs.size()) - 1; i >= 0; --i)
      if (coeffs[i] != 0.0) return i;
    return -1;
  }
  [[nodiscard]] double coeff(int i) const {
    return i >= 0 && i < static_cast<int>(coeffs.size()) ? coeffs[i] : 0.0;
  }
  [[nodiscard]] double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
    return acc;
  }
  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    const int d = std::max(a.degree(), b.degree());
    for (int i = 0; i <= d; ++i)
      if (a.coeff(i) != b.coeff(i)) return false;
    return true;
  }
};

inline nlohmann::json to_json(const Polynomial& q) { return q.coeffs; }

inline Polynomial polynomial_from_json(const nlohmann::json& j) { return Polynomial{j.get<std::vector<double>>()}; }

inline std::string to_decimal(const BigInt& x) { return x.str(); }

// ---------------------------------------------------------------------------
// Exact counts

/// Number of m x n x k Latin boxes (m x n Latin rectangles on k symbols).
inline BigInt count_latin_boxes(int m, int n, int k) {
  if (m < 1 || !(m <= n && n <= k)) throw std::invalid_argument("count_latin_boxes: requires 1 <= m <= n <= k");
  if (n > 5 || k > 5) throw SizeError("count_latin_boxes: n and k must be at most 5");
  std::vector<unsigned> row_used(m, 0), col_used(n, 0);
  std::uint64_t total = 0;
  const int cells = m * n;
  auto rec = [&](auto&& self, int idx) -> void {
    if (idx == cells) {
      ++total;
      return;
    }
    const int r = idx / n, c = idx % n;
    for (int v = 0; v < k; ++v) {
      const unsigned bit = 1u << v;
      if ((row_used[r] | col_used[c]) & bit) continue;
      row_used[r] |= bit;
      col_used[c] |= bit;
      self(self, idx + 1);
      row_used[r] &= ~bit;
      col_used[c] &= ~bit;
    }
  };
  rec(rec, 0);
  return BigInt(total);
}

/// Counts sequences of m permutation matrices with pairwise disjoint
/// supports by depth-first search, updating the availability graph after
/// each choice; the last level contributes Per(availability).
inline BigInt count_rectangles_exact(int m, int n) {
  if (n < 1 || m < 1 || m > n) throw std::invalid_argument("count_rectangles_exact: requires 1 <= m <= n");
  if (n > 7) throw SizeError("count_rectangles_exact: n must be at most 7");
  BipartiteGraph avail = BipartiteGraph::complete(n);
  BigInt total = 0;

  auto level = [&](auto&& self, int depth) -> void {
    if (depth == m - 1) {
      total += permanent(avail);
      return;
    }
    std::vector<int> perm(n, -1);
    // enumerate perfect matchings of avail column by column
    unsigned used = 0;
    auto place = [&](auto&& pself, int c) -> void {
      if (c == n) {
        for (int cc = 0; cc < n; ++cc) avail.remove_edge(cc, perm[cc]);
        self(self, depth + 1);
        for (int cc = 0; cc < n; ++cc) avail.add_edge(cc, perm[cc]);
        return;
      }
      for (int v = 0; v < n; ++v) {
        if ((used >> v) & 1u || !avail.has_edge(c, v)) continue;
        used |= 1u << v;
        perm[c] = v;
        pself(pself, c + 1);
        used &= ~(1u << v);
      }
    };
    place(place, 0);
  };
  level(level, 0);
  return total;
}

/// Whether an n0 x n0 x n0 array (n0 <= 4) supports a Latin square.
inline bool contains_latin_square(const Array3D& a) {
  const Dims d = a.dims();
  if (d.m != d.n || d.n != d.k) throw std::invalid_argument("contains_latin_square: array must be a cube");
  for (const auto& sq : all_latin_squares(d.n)) {
    bool ok = true;
    for (int r = 0; r < d.n && ok; ++r)
      for (int c = 0; c < d.n && ok; ++c) ok = a.get(r, c, sq.at(r, c));
    if (ok) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Containment polynomials

/// Probability that M(n0,n0,n0;p) supports a Latin square, by
/// inclusion-exclusion over all order-n0 squares.
inline Polynomial q_small(int n0) {
  if (n0 < 1 || n0 > 3) throw std::invalid_argument("q_small: n0 must be 1, 2 or 3");
  const auto squares = all_latin_squares(n0);
  const int s = static_cast<int>(squares.size());
  const int cells = n0 * n0 * n0;
  // supports as bitmasks over the n0^3 cells (27 <= 32 bits)
  std::vector<std::uint32_t> support(s, 0);
  for (int i = 0; i < s; ++i)
    for (int r = 0; r < n0; ++r)
      for (int c = 0; c < n0; ++c) support[i] |= std::uint32_t{1} << ((r * n0 + c) * n0 + squares[i].at(r, c));

  std::vector<std::int64_t> acc(static_cast<std::size_t>(cells) + 1, 0);
  const std::uint32_t subsets = std::uint32_t{1} << s;
  std::vector<std::uint32_t> unions(subsets, 0);
  for (std::uint32_t mask = 1; mask < subsets; ++mask) {
    const int low = std::countr_zero(mask);
    unions[mask] = unions[mask & (mask - 1)] | support[low];
    const int size = std::popcount(unions[mask]);
    acc[size] += (std::popcount(mask) % 2 == 1) ? 1 : -1;
  }
  Polynomial q;
  q.coeffs.assign(acc.begin(), acc.end());
  return q;
}

/// 2 p^(n0^2) - p^(2 n0^2): probability of containing one of two fixed
/// disjoint squares.
inline Polynomial q_tilde(int n0) {
  if (n0 < 1) throw std::invalid_argument("q_tilde: n0 must be positive");
  Polynomial q;
  q.coeffs.assign(static_cast<std::size_t>(2 * n0 * n0) + 1, 0.0);
  q.coeffs[static_cast<std::size_t>(n0) * n0] = 2.0;
  q.coeffs[static_cast<std::size_t>(2 * n0) * n0] = -1.0;
  return q;
}

class NoFixedPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Roots of q(x) = x bracketed by sign changes on a uniform grid over (0,1),
/// each refined by bisection to `tol`. Ascending.
inline std::vector<double> fixed_points(const Polynomial& q, int grid = 10000, double tol = 1e-9) {
  auto g = [&](double x) { return q(x) - x; };
  std::vector<double> roots;
  double prev_x = 1.0 / grid, prev = g(prev_x);
  for (int i = 2; i < grid; ++i) {
    const double x = static_cast<double>(i) / grid;
    const double cur = g(x);
    if (prev == 0.0) {
      roots.push_back(prev_x);
    } else if ((prev < 0) != (cur < 0) && cur != 0.0) {
      double lo = prev_x, hi = x, glo = prev;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm < 0) == (glo < 0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev = cur;
  }
  if (prev == 0.0) roots.push_back(prev_x);
  return roots;
}

/// Largest root of q(x) = x in (0,1).
inline double fixed_point(const Polynomial& q) {
  const auto roots = fixed_points(q);
  if (roots.empty()) throw NoFixedPoint("fixed_point: q(x) - x has no sign change in (0,1)");
  return roots.back();
}

struct BlockIteration {
  std::vector<double> sequence;  // p_1 = q(p), p_i = q(p_{i-1})
  bool increasing = false;       // never steps down and ends above p
  bool decreasing = false;       // never steps up and ends below p
  bool near_one = false;         // last iterate above 1 - 1e-3
};

inline BlockIteration iterate_block_probability(const Polynomial& q, double p, int levels) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("iterate_block_probability: p must lie in [0,1]");
  BlockIteration it;
  double cur = p;
  bool up = true, down = true;
  for (int i = 0; i < levels; ++i) {
    const double next = q(cur);
    if (next < cur) up = false;
    if (next > cur) down = false;
    it.sequence.push_back(next);
    cur = next;
  }
  it.increasing = up && levels > 0 && cur > p;
  it.decreasing = down && levels > 0 && cur < p;
  it.near_one = !it.sequence.empty() && it.sequence.back() > 1.0 - 1e-3;
  return it;
}

// ---------------------------------------------------------------------------
// Asymptotics and permanent bounds (natural-log scale)

/// (1-eps) n^2 [ln n - 2 + eps/(1-eps) ln(1/eps) + ln p]; the ln p term is
/// dropped when p is not given.
inline double rectangle_count_asymptotic(int n, double eps, std::optional<double> p = std::nullopt) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("rectangle_count_asymptotic: eps must lie in (0,1)");
  if (n < 1) throw std::invalid_argument("rectangle_count_asymptotic: n must be positive");
  if (p && !(*p > 0.0 && *p <= 1.0)) throw std::invalid_argument("rectangle_count_asymptotic: p must lie in (0,1]");
  const double nn = static_cast<double>(n);
  double bracket = std::log(nn) - 2.0 + eps / (1.0 - eps) * std::log(1.0 / eps);
  if (p) bracket += std::log(*p);
  return (1.0 - eps) * nn * nn * bracket;
}

struct PermanentBounds {
  double lower = 0;     // n (ln k - 1)
  double upper = 0;     // (n/k) ln k!
  double ef_lower = 0;  // n ln k + ln n! - n ln n
};

/// Log-scale bounds on Per of a k-regular n x n 0-1 matrix.
inline PermanentBounds permanent_bounds(int n, int k) {
  if (!(1 <= k && k <= n)) throw std::invalid_argument("permanent_bounds: requires 1 <= k <= n");
  const double nn = n, kk = k;
  PermanentBounds b;
  b.lower = nn * (std::log(kk) - 1.0);
  b.upper = nn / kk * std::lgamma(kk + 1.0);
  b.ef_lower = nn * std::log(kk) + std::lgamma(nn + 1.0) - nn * std::log(nn);
  return b;
}

}  // namespace latinbox
