#pragma once

// Random greedy packing of edge-disjoint triangles (SETs) in tripartite
// 3-uniform hypergraphs on [n] + [n] + [n], and the coupled random process
// whose degree trajectory follows y(x) = 1/sqrt(1+2x), z(x) = 1/(1+2x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latinbox/arrays.hpp"
#include "latinbox/rng.hpp"

namespace latinbox {

struct Triangle {
  int a = 0;  // class A vertex (row)
  int b = 0;  // class B vertex (column)
  int c = 0;  // class C vertex (symbol)
  friend bool operator==(const Triangle&, const Triangle&) = default;
};

/// Triangles stored as a packed n x n x n cube.
struct TripartiteHypergraph {
  int n = 0;
  Array3D cube;

  [[nodiscard]] std::size_t triangle_count() const { return cube.ones(); }
  [[nodiscard]] bool contains(const Triangle& t) const { return cube.get(t.a, t.b, t.c); }
  [[nodiscard]] std::vector<Triangle> triangles() const {
    std::vector<Triangle> out;
    out.reserve(cube.ones());
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c : cube.shaft_symbols(a, b)) out.push_back({a, b, c});
    return out;
  }
};

inline TripartiteHypergraph from_array(const Array3D& a) {
  const Dims d = a.dims();
  if (d.m != d.n || d.n != d.k) throw std::invalid_argument("from_array: array must be a cube");
  return TripartiteHypergraph{d.n, a};
}

/// A set of edge-disjoint triangles with covered-edge maps and vertex degrees.
class TriangleSET {
 public:
  explicit TriangleSET(int n = 0) : n_(n) {
    const auto nn = static_cast<std::size_t>(n) * n;
    ab_.assign(nn, 0);
    ac_.assign(nn, 0);
    bc_.assign(nn, 0);
    deg_.assign(3 * static_cast<std::size_t>(n), 0);
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] std::size_t size() const noexcept { return chosen_.size(); }
  [[nodiscard]] const std::vector<Triangle>& chosen() const noexcept { return chosen_; }

  [[nodiscard]] bool covered_ab(int a, int b) const { return ab_[idx(a, b)]; }
  [[nodiscard]] bool covered_ac(int a, int c) const { return ac_[idx(a, c)]; }
  [[nodiscard]] bool covered_bc(int b, int c) const { return bc_[idx(b, c)]; }

  [[nodiscard]] bool edge_disjoint(const Triangle& t) const {
    return !ab_[idx(t.a, t.b)] && !ac_[idx(t.a, t.c)] && !bc_[idx(t.b, t.c)];
  }

  /// Adds t if it is edge-disjoint from the set; returns whether it was added.
  bool try_insert(const Triangle& t) {
    if (!edge_disjoint(t)) return false;
    ab_[idx(t.a, t.b)] = 1;
    ac_[idx(t.a, t.c)] = 1;
    bc_[idx(t.b, t.c)] = 1;
    ++deg_[static_cast<std::size_t>(t.a)];
    ++deg_[static_cast<std::size_t>(n_ + t.b)];
    ++deg_[static_cast<std::size_t>(2 * n_ + t.c)];
    chosen_.push_back(t);
    return true;
  }

  /// d_S(v) for vertex v of class cls (0 = A, 1 = B, 2 = C).
  [[nodiscard]] int degree(int cls, int v) const { return deg_.at(static_cast<std::size_t>(cls * n_ + v)); }
  [[nodiscard]] const std::vector<int>& degrees() const noexcept { return deg_; }

  /// Recomputes covered maps and degrees from `chosen` and compares; also
  /// checks pairwise edge-disjointness.
  [[nodiscard]] bool consistent() const {
    TriangleSET fresh(n_);
    for (const Triangle& t : chosen_)
      if (!fresh.try_insert(t)) return false;
    return fresh.ab_ == ab_ && fresh.ac_ == ac_ && fresh.bc_ == bc_ && fresh.deg_ == deg_;
  }

 private:
  [[nodiscard]] std::size_t idx(int x, int y) const { return static_cast<std::size_t>(x) * n_ + y; }

  int n_;
  std::vector<Triangle> chosen_;
  std::vector<char> ab_, ac_, bc_;
  std::vector<int> deg_;
};

/// The partial Latin box (a,b) -> c of a SET, with `symbols` >= n.
inline PartialLatinBox to_partial_box(const TriangleSET& s, int symbols) {
  PartialLatinBox box(s.n(), s.n(), symbols);
  for (const Triangle& t : s.chosen()) box.assign_unchecked(t.a, t.b, t.c);
  return box;
}

/// Random greedy packing: repeatedly add a uniformly random triangle of H
/// that is edge-disjoint from S until none remain. Scanning a uniformly
/// shuffled triangle list and keeping each still-compatible triangle yields
/// the same distribution.
inline TriangleSET greedy_pack(const TripartiteHypergraph& h, Rng& rng) {
  auto tris = h.triangles();
  rng.shuffle(tris);
  TriangleSET s(h.n);
  for (const Triangle& t : tris) s.try_insert(t);
  return s;
}

inline TriangleSET greedy_pack(const TripartiteHypergraph& h, std::uint64_t seed) {
  Rng rng(seed);
  return greedy_pack(h, rng);
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectorySample {
  std::size_t step = 0;
  int deg_min = 0;
  double deg_mean = 0;
  int deg_max = 0;
  double codeg_mean = 0;  // mean permissible-triangle count over uncovered edges
  std::size_t uncovered_edges = 0;
};

struct Trajectory {
  int n = 0;
  std::vector<TrajectorySample> samples;
};

struct Prediction {
  double y = 1;
  double z = 1;
};

inline Prediction predicted(double x) {
  if (x < 0) throw std::invalid_argument("predicted: x must be non-negative");
  return Prediction{1.0 / std::sqrt(1.0 + 2.0 * x), 1.0 / (1.0 + 2.0 * x)};
}

/// Central-difference residuals of y' = -yz and z' = -2z^2 at x (x >= h).
inline Prediction ode_residual(double x, double h = 1e-4) {
  const Prediction lo = predicted(x - h), hi = predicted(x + h), at = predicted(x);
  const double dy = (hi.y - lo.y) / (2 * h);
  const double dz = (hi.z - lo.z) / (2 * h);
  return Prediction{dy + at.y * at.z, dz + 2 * at.z * at.z};
}

/// The random triangle process on K_{n,n,n} coupled with greedy SET insertion.
class PackingProcess {
 public:
  PackingProcess(int n, std::uint64_t seed) : n_(n), set_(n), rng_(seed) {
    if (n < 1) throw std::invalid_argument("PackingProcess: n must be positive");
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    order_.resize(total);
    for (std::size_t i = 0; i < total; ++i) order_[i] = static_cast<std::uint32_t>(i);
    drawn_.assign(total, 0);
  }

  [[nodiscard]] std::size_t steps_taken() const noexcept { return step_; }
  [[nodiscard]] std::size_t total_steps() const noexcept { return order_.size(); }
  [[nodiscard]] const TriangleSET& set() const noexcept { return set_; }
  [[nodiscard]] bool drawn(const Triangle& t) const { return drawn_[lin(t)]; }

  /// Draws the next triangle (lazy Fisher-Yates) and inserts it if it is
  /// edge-disjoint from S. Returns whether it was inserted.
  bool step() {
    if (step_ >= order_.size()) throw std::out_of_range("PackingProcess::step: process exhausted");
    const std::size_t j = step_ + rng_.below(order_.size() - step_);
    std::swap(order_[step_], order_[j]);
    const std::uint32_t id = order_[step_++];
    drawn_[id] = 1;
    const auto nn = static_cast<std::uint32_t>(n_) * static_cast<std::uint32_t>(n_);
    const auto un = static_cast<std::uint32_t>(n_);
    return set_.try_insert(Triangle{static_cast<int>(id / nn), static_cast<int>((id / un) % un),
                                    static_cast<int>(id % un)});
  }

  [[nodiscard]] TrajectorySample sample() const {
    TrajectorySample s;
    s.step = step_;
    const auto& deg = set_.degrees();
    s.deg_min = *std::min_element(deg.begin(), deg.end());
    s.deg_max = *std::max_element(deg.begin(), deg.end());
    double sum = 0;
    for (int d : deg) sum += d;
    s.deg_mean = sum / static_cast<double>(deg.size());

    // Permissible triangles through each uncovered edge: not yet drawn and
    // edge-disjoint from S.
    double codeg_sum = 0;
    std::size_t edges = 0;
    const int n = n_;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (set_.covered_ab(a, b)) continue;
        int cnt = 0;
        for (int c = 0; c < n; ++c)
          cnt += (!drawn_[lin({a, b, c})] && !set_.covered_ac(a, c) && !set_.covered_bc(b, c)) ? 1 : 0;
        codeg_sum += cnt;
        ++edges;
      }
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) {
        if (set_.covered_ac(a, c)) continue;
        int cnt = 0;
        for (int b = 0; b < n; ++b)
          cnt += (!drawn_[lin({a, b, c})] && !set_.covered_ab(a, b) && !set_.covered_bc(b, c)) ? 1 : 0;
        codeg_sum += cnt;
        ++edges;
      }
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        if (set_.covered_bc(b, c)) continue;
        int cnt = 0;
        for (int a = 0; a < n; ++a)
          cnt += (!drawn_[lin({a, b, c})] && !set_.covered_ab(a, b) && !set_.covered_ac(a, c)) ? 1 : 0;
        codeg_sum += cnt;
        ++edges;
      }
    s.uncovered_edges = edges;
    s.codeg_mean = edges ? codeg_sum / static_cast<double>(edges) : std::numeric_limits<double>::quiet_NaN();
    return s;
  }

 private:
  [[nodiscard]] std::size_t lin(const Triangle& t) const {
    return (static_cast<std::size_t>(t.a) * n_ + t.b) * n_ + t.c;
  }

  int n_;
  TriangleSET set_;
  Rng rng_;
  std::vector<std::uint32_t> order_;
  std::vector<char> drawn_;
  std::size_t step_ = 0;
};

inline std::size_t default_record_every(int n) {
  const auto nn = static_cast<std::size_t>(n) * n;
  return std::max<std::size_t>(1, (nn + 49) / 50);
}

/// Runs the triangle process for m_max steps, sampling at step 0, every
/// record_every steps, and at m_max. record_every = 0 selects the default
/// ceil(n^2/50); per-step recording (1) is limited to n <= 30.
inline Trajectory process_pack(int n, std::size_t m_max, std::size_t record_every, std::uint64_t seed) {
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  if (m_max > total) throw std::invalid_argument("process_pack: horizon exceeds n^3");
  if (record_every == 0) record_every = default_record_every(n);
  if (record_every == 1 && n > 30) throw std::invalid_argument("process_pack: per-step recording requires n <= 30");
  PackingProcess proc(n, seed);
  Trajectory traj{n, {}};
  traj.samples.push_back(proc.sample());
  while (proc.steps_taken() < m_max) {
    proc.step();
    if (proc.steps_taken() % record_every == 0 || proc.steps_taken() == m_max) traj.samples.push_back(proc.sample());
  }
  return traj;
}

struct DeviationReport {
  double sup_deg_dev = 0;
  double sup_codeg_dev = 0;
};

/// Sup over samples of |deg_mean/n - (1 - y(m/n^2))| and |codeg_mean/n - z(m/n^2)|.
inline DeviationReport deviation_report(const Trajectory& traj, int n) {
  if (traj.samples.empty()) throw std::invalid_argument("deviation_report: empty trajectory");
  DeviationReport rep;
  const double nn = static_cast<double>(n) * n;
  for (const auto& s : traj.samples) {
    const Prediction p = predicted(static_cast<double>(s.step) / nn);
    rep.sup_deg_dev = std::max(rep.sup_deg_dev, std::abs(s.deg_mean / n - (1.0 - p.y)));
    if (!std::isnan(s.codeg_mean)) rep.sup_codeg_dev = std::max(rep.sup_codeg_dev, std::abs(s.codeg_mean / n - p.z));
  }
  return rep;
}

/// CSV columns: step, deg_min, deg_mean, deg_max, codeg_mean, y_pred, z_pred,
/// where y_pred and z_pred are y and z at x = step/n^2 (deg_mean/n tracks
/// 1 - y_pred, codeg_mean/n tracks z_pred).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "step,deg_min,deg_mean,deg_max,codeg_mean,y_pred,z_pred\r\n";
  const double nn = static_cast<double>(traj.n) * traj.n;
  char buf[256];
  for (const auto& s : traj.samples) {
    const Prediction p = predicted(static_cast<double>(s.step) / nn);
    std::snprintf(buf, sizeof buf, "%zu,%d,%.6f,%d,%.6f,%.9f,%.9f\r\n", s.step, s.deg_min, s.deg_mean, s.deg_max,
                  s.codeg_mean, p.y, p.z);
    os << buf;
  }
}

}  // namespace latinbox
