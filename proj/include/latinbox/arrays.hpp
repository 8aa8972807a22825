#pragma once

// Core 0-1 arrays, the random array models, shafts, and Latin-box validation.
//
// Index convention: every C++ API in this library is 0-based. The JSON and
// CLI surfaces are 1-based; the conversion happens only in to_json/from_json
// and in the CLI.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latinbox/rng.hpp"

namespace latinbox {

struct Dims {
  int m = 1;  // rows
  int n = 1;  // columns
  int k = 1;  // symbols (the shaft axis)

  friend bool operator==(const Dims&, const Dims&) = default;
  [[nodiscard]] std::size_t cells() const noexcept {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(n) * static_cast<std::size_t>(k);
  }
};

struct Cell {
  int r = 0;
  int c = 0;
  int v = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

using Position = std::pair<int, int>;

/// m x n x k 0-1 array in shaft-major packed bits: the k entries of shaft
/// (r,c) occupy ceil(k/64) consecutive words.
class Array3D {
 public:
  Array3D() : Array3D(Dims{1, 1, 1}) {}
  explicit Array3D(Dims dims) : dims_(dims) {
    if (dims.m < 1 || dims.n < 1 || dims.k < 1)
      throw std::invalid_argument("Array3D: all dimensions must be positive");
    words_ = (dims.k + 63) / 64;
    bits_.assign(static_cast<std::size_t>(dims.m) * dims.n * words_, 0);
  }
  Array3D(int m, int n, int k) : Array3D(Dims{m, n, k}) {}

  static Array3D full(Dims dims) {
    Array3D a(dims);
    for (int r = 0; r < dims.m; ++r)
      for (int c = 0; c < dims.n; ++c)
        for (int v = 0; v < dims.k; ++v) a.set(r, c, v);
    return a;
  }

  [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
  [[nodiscard]] int rows() const noexcept { return dims_.m; }
  [[nodiscard]] int cols() const noexcept { return dims_.n; }
  [[nodiscard]] int symbols() const noexcept { return dims_.k; }
  [[nodiscard]] std::size_t ones() const noexcept { return ones_; }
  [[nodiscard]] int shaft_words() const noexcept { return words_; }

  [[nodiscard]] bool get(int r, int c, int v) const {
    check(r, c, v);
    return (bits_[word_index(r, c, v)] >> (v & 63)) & 1U;
  }
  [[nodiscard]] bool operator()(int r, int c, int v) const { return get(r, c, v); }

  void set(int r, int c, int v, bool value = true) {
    check(r, c, v);
    std::uint64_t& w = bits_[word_index(r, c, v)];
    const std::uint64_t mask = std::uint64_t{1} << (v & 63);
    const bool was = (w & mask) != 0;
    if (was == value) return;
    if (value) {
      w |= mask;
      ++ones_;
    } else {
      w &= ~mask;
      --ones_;
    }
  }
  void reset(int r, int c, int v) { set(r, c, v, false); }

  /// Word `w` of shaft (r,c); bit b is symbol 64*w + b.
  [[nodiscard]] std::uint64_t shaft_word(int r, int c, int w = 0) const {
    check(r, c, 0);
    return bits_[(static_cast<std::size_t>(r) * dims_.n + c) * words_ + w];
  }

  [[nodiscard]] int shaft_count(int r, int c, int from_symbol = 0) const {
    check(r, c, 0);
    const std::size_t base = (static_cast<std::size_t>(r) * dims_.n + c) * words_;
    int total = 0;
    for (int w = 0; w < words_; ++w) {
      std::uint64_t word = bits_[base + w];
      const int lo = w * 64;
      if (from_symbol > lo) {
        const int skip = from_symbol - lo;
        word = skip >= 64 ? 0 : word & (~std::uint64_t{0} << skip);
      }
      total += std::popcount(word);
    }
    return total;
  }

  [[nodiscard]] bool shaft_empty(int r, int c) const { return shaft_count(r, c) == 0; }

  [[nodiscard]] std::vector<int> shaft_symbols(int r, int c) const {
    std::vector<int> out;
    for (int w = 0; w < words_; ++w) {
      std::uint64_t word = shaft_word(r, c, w);
      while (word) {
        out.push_back(w * 64 + std::countr_zero(word));
        word &= word - 1;
      }
    }
    return out;
  }

  /// Sets every 1 of `other` (same dims) in this array.
  Array3D& operator|=(const Array3D& other) {
    if (!(other.dims_ == dims_)) throw std::invalid_argument("Array3D::operator|=: dimension mismatch");
    ones_ = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      bits_[i] |= other.bits_[i];
      ones_ += static_cast<std::size_t>(std::popcount(bits_[i]));
    }
    return *this;
  }

  friend bool operator==(const Array3D& a, const Array3D& b) { return a.dims_ == b.dims_ && a.bits_ == b.bits_; }

  [[nodiscard]] std::size_t count_ones_slow() const {
    std::size_t total = 0;
    for (auto w : bits_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

 private:
  [[nodiscard]] std::size_t word_index(int r, int c, int v) const noexcept {
    return (static_cast<std::size_t>(r) * dims_.n + c) * words_ + (v >> 6);
  }
  void check(int r, int c, int v) const {
    if (r < 0 || r >= dims_.m || c < 0 || c >= dims_.n || v < 0 || v >= dims_.k)
      throw std::out_of_range("Array3D: index out of range");
  }

  Dims dims_;
  int words_ = 1;
  std::vector<std::uint64_t> bits_;
  std::size_t ones_ = 0;
};

/// Green/blue array: green is binomial, blue adds exactly one 1 to each shaft
/// that green leaves empty.
struct ColoredArray {
  Array3D green;
  Array3D blue;

  [[nodiscard]] Array3D combined() const {
    Array3D out = green;
    out |= blue;
    return out;
  }
  [[nodiscard]] const Dims& dims() const noexcept { return green.dims(); }
};

/// A partial map (r,c) -> symbol with no symbol repeated in a row or column.
class PartialLatinBox {
 public:
  static constexpr int kUncovered = -1;

  PartialLatinBox(int rows, int cols, int symbols) : rows_(rows), cols_(cols), symbols_(symbols) {
    if (rows < 0 || cols < 0 || symbols < 1) throw std::invalid_argument("PartialLatinBox: bad dimensions");
    grid_.assign(static_cast<std::size_t>(rows) * cols, kUncovered);
  }
  explicit PartialLatinBox(Dims d) : PartialLatinBox(d.m, d.n, d.k) {}

  [[nodiscard]] int rows() const noexcept { return rows_; }
  [[nodiscard]] int cols() const noexcept { return cols_; }
  [[nodiscard]] int symbols() const noexcept { return symbols_; }

  [[nodiscard]] int at(int r, int c) const { return grid_.at(index(r, c)); }
  [[nodiscard]] bool covered(int r, int c) const { return at(r, c) != kUncovered; }

  [[nodiscard]] bool can_assign(int r, int c, int v) const {
    if (v < 0 || v >= symbols_) return false;
    for (int cc = 0; cc < cols_; ++cc)
      if (cc != c && grid_[index(r, cc)] == v) return false;
    for (int rr = 0; rr < rows_; ++rr)
      if (rr != r && grid_[index(rr, c)] == v) return false;
    return true;
  }

  /// Assigns symbol v at (r,c); throws std::logic_error if it would repeat a
  /// symbol in row r or column c.
  void assign(int r, int c, int v) {
    if (!can_assign(r, c, v)) throw std::logic_error("PartialLatinBox::assign: symbol conflict");
    grid_[index(r, c)] = v;
  }

  /// Assigns without the distinctness check. Callers that track used
  /// symbols themselves use this; validate_latin_box still catches misuse.
  void assign_unchecked(int r, int c, int v) { grid_.at(index(r, c)) = v; }

  void erase(int r, int c) { grid_.at(index(r, c)) = kUncovered; }

  [[nodiscard]] std::size_t covered_count() const {
    std::size_t n = 0;
    for (int v : grid_) n += v != kUncovered ? 1 : 0;
    return n;
  }
  [[nodiscard]] bool full_domain() const { return covered_count() == grid_.size(); }

  [[nodiscard]] bool distinct_lines() const {
    std::vector<char> seen(static_cast<std::size_t>(symbols_));
    for (int r = 0; r < rows_; ++r) {
      std::fill(seen.begin(), seen.end(), 0);
      for (int c = 0; c < cols_; ++c) {
        int v = grid_[index(r, c)];
        if (v == kUncovered) continue;
        if (v < 0 || v >= symbols_ || seen[v]) return false;
        seen[v] = 1;
      }
    }
    for (int c = 0; c < cols_; ++c) {
      std::fill(seen.begin(), seen.end(), 0);
      for (int r = 0; r < rows_; ++r) {
        int v = grid_[index(r, c)];
        if (v == kUncovered) continue;
        if (seen[v]) return false;
        seen[v] = 1;
      }
    }
    return true;
  }

  [[nodiscard]] const std::vector<int>& grid() const noexcept { return grid_; }

  friend bool operator==(const PartialLatinBox&, const PartialLatinBox&) = default;

 private:
  [[nodiscard]] std::size_t index(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw std::out_of_range("PartialLatinBox: index out of range");
    return static_cast<std::size_t>(r) * cols_ + c;
  }

  int rows_;
  int cols_;
  int symbols_;
  std::vector<int> grid_;
};

/// A uniformly random order of all cells; M_t is the set of the first t cells.
struct ArrayProcess {
  Dims dims;
  std::vector<std::uint32_t> order;  // linear index (r*n + c)*k + v

  [[nodiscard]] std::size_t length() const noexcept { return order.size(); }

  [[nodiscard]] Cell cell(std::size_t t) const {
    const std::uint32_t idx = order.at(t);
    const auto k = static_cast<std::uint32_t>(dims.k);
    const auto n = static_cast<std::uint32_t>(dims.n);
    return Cell{static_cast<int>(idx / k / n), static_cast<int>((idx / k) % n), static_cast<int>(idx % k)};
  }

  [[nodiscard]] Array3D prefix(std::size_t t) const {
    if (t > order.size()) throw std::out_of_range("ArrayProcess::prefix: t exceeds process length");
    Array3D a(dims);
    for (std::size_t i = 0; i < t; ++i) {
      Cell x = cell(i);
      a.set(x.r, x.c, x.v);
    }
    return a;
  }

  /// First t at which M_t has no empty shaft.
  [[nodiscard]] std::size_t shaft_hitting_time() const {
    std::vector<char> hit(static_cast<std::size_t>(dims.m) * dims.n, 0);
    std::size_t remaining = hit.size();
    for (std::size_t t = 0; t < order.size(); ++t) {
      const std::size_t shaft = order[t] / static_cast<std::uint32_t>(dims.k);
      if (!hit[shaft]) {
        hit[shaft] = 1;
        if (--remaining == 0) return t + 1;
      }
    }
    return order.size();
  }
};

// ---------------------------------------------------------------------------
// Random models

inline Array3D sample_binomial(Dims dims, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_binomial: p must lie in [0,1]");
  Array3D a(dims);
  for (int r = 0; r < dims.m; ++r)
    for (int c = 0; c < dims.n; ++c)
      for (int v = 0; v < dims.k; ++v)
        if (rng.bernoulli(p)) a.set(r, c, v);
  return a;
}

inline Array3D sample_binomial(Dims dims, double p, std::uint64_t seed) {
  Rng rng(seed);
  return sample_binomial(dims, p, rng);
}

/// Uniform (n,n,m) array process.
inline ArrayProcess sample_process(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < n) throw std::invalid_argument("sample_process: requires 1 <= n <= m");
  ArrayProcess proc{Dims{n, n, m}, {}};
  proc.order.resize(proc.dims.cells());
  for (std::size_t i = 0; i < proc.order.size(); ++i) proc.order[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed);
  rng.shuffle(proc.order);
  return proc;
}

inline ColoredArray sample_green_blue(int n, int m, double p, std::uint64_t seed) {
  if (n < 1 || m < n) throw std::invalid_argument("sample_green_blue: requires 1 <= n <= m");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_green_blue: p must lie in [0,1]");
  Rng rng(seed);
  const Dims d{n, n, m};
  ColoredArray out{sample_binomial(d, p, rng), Array3D(d)};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (out.green.shaft_empty(r, c)) out.blue.set(r, c, static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
  return out;
}

// ---------------------------------------------------------------------------
// Shafts

/// Shafts (r,c) with no 1s, in lexicographic order.
inline std::vector<Position> empty_shafts(const Array3D& a) {
  std::vector<Position> out;
  const int words = a.shaft_words();
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) {
      std::uint64_t any = 0;
      for (int w = 0; w < words; ++w) any |= a.shaft_word(r, c, w);
      if (!any) out.emplace_back(r, c);
    }
  return out;
}

struct ShaftDegrees {
  int d = 0;    // ones over all symbols
  int d_m = 0;  // ones over the high symbols n..k-1 (0-based)
  friend bool operator==(const ShaftDegrees&, const ShaftDegrees&) = default;
};

/// Degrees of shaft (r,c) for an array viewed as n x n x m, where the high
/// symbols are those with index >= n.
inline ShaftDegrees shaft_degrees(const Array3D& a, int r, int c) {
  const int n = a.cols();
  if (a.symbols() < n) throw std::invalid_argument("shaft_degrees: requires n <= m");
  return ShaftDegrees{a.shaft_count(r, c), a.shaft_count(r, c, n)};
}

inline ShaftDegrees shaft_degrees(const ColoredArray& a, int r, int c) { return shaft_degrees(a.combined(), r, c); }

// ---------------------------------------------------------------------------
// Validation

struct BoxValidity {
  bool valid = false;   // distinct symbols per line and supported by M
  bool proper = false;  // valid and the domain is the whole grid
  explicit operator bool() const noexcept { return valid; }
};

inline BoxValidity validate_latin_box(const PartialLatinBox& box, const Array3D& a) {
  if (box.rows() != a.rows() || box.cols() != a.cols() || box.symbols() != a.symbols())
    throw std::invalid_argument("validate_latin_box: box and array dimensions differ");
  if (!box.distinct_lines()) return {};
  for (int r = 0; r < box.rows(); ++r)
    for (int c = 0; c < box.cols(); ++c) {
      const int v = box.at(r, c);
      if (v != PartialLatinBox::kUncovered && !a.get(r, c, v)) return {};
    }
  return BoxValidity{true, box.full_domain()};
}

/// Cyclic Latin square L(r,c) = (r + c) mod n.
inline PartialLatinBox cyclic_square(int n) {
  PartialLatinBox b(n, n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) b.assign_unchecked(r, c, (r + c) % n);
  return b;
}

/// Every Latin square of the given order (order <= 4), in lexicographic
/// order of their row-major symbol grids.
inline std::vector<PartialLatinBox> all_latin_squares(int order) {
  if (order < 1 || order > 4) throw std::invalid_argument("all_latin_squares: order must be in [1,4]");
  std::vector<PartialLatinBox> out;
  PartialLatinBox cur(order, order, order);
  std::vector<unsigned> row_used(order, 0), col_used(order, 0);
  auto rec = [&](auto&& self, int pos) -> void {
    if (pos == order * order) {
      out.push_back(cur);
      return;
    }
    const int r = pos / order, c = pos % order;
    for (int v = 0; v < order; ++v) {
      const unsigned bit = 1U << v;
      if ((row_used[r] | col_used[c]) & bit) continue;
      row_used[r] |= bit;
      col_used[c] |= bit;
      cur.assign_unchecked(r, c, v);
      self(self, pos + 1);
      row_used[r] &= ~bit;
      col_used[c] &= ~bit;
    }
    cur.erase(r, c);
  };
  rec(rec, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr char kArrayMagic[4] = {'L', 'B', 'X', '3'};
inline constexpr std::uint32_t kArrayFormatVersion = 1;

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                        static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("binary read: truncated header");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}
}  // namespace detail

/// Layout: magic "LBX3", u32 version, u32 m, u32 n, u32 k (little endian),
/// then ceil(mnk/8) bytes: bit i (LSB first) is entry i of the row-major
/// order i = (r*n + c)*k + v.
inline void write_binary(std::ostream& os, const Array3D& a) {
  os.write(kArrayMagic, 4);
  detail::put_u32(os, kArrayFormatVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(a.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(a.cols()));
  detail::put_u32(os, static_cast<std::uint32_t>(a.symbols()));
  std::vector<unsigned char> bytes((a.dims().cells() + 7) / 8, 0);
  std::size_t i = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      for (int v = 0; v < a.symbols(); ++v, ++i)
        if (a.get(r, c, v)) bytes[i >> 3] |= static_cast<unsigned char>(1U << (i & 7));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Array3D read_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kArrayMagic, 4) != 0)
    throw std::runtime_error("read_binary: bad magic");
  if (detail::get_u32(is) != kArrayFormatVersion) throw std::runtime_error("read_binary: unsupported version");
  const auto m = static_cast<int>(detail::get_u32(is));
  const auto n = static_cast<int>(detail::get_u32(is));
  const auto k = static_cast<int>(detail::get_u32(is));
  Array3D a(m, n, k);
  std::vector<unsigned char> bytes((a.dims().cells() + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("read_binary: truncated payload");
  std::size_t i = 0;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      for (int v = 0; v < k; ++v, ++i)
        if ((bytes[i >> 3] >> (i & 7)) & 1U) a.set(r, c, v);
  return a;
}

/// JSON debug form: {"m","n","k","ones":[[r,c,v],...]} with 1-based triples.
inline nlohmann::json to_json(const Array3D& a) {
  nlohmann::json ones = nlohmann::json::array();
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      for (int v : a.shaft_symbols(r, c)) ones.push_back({r + 1, c + 1, v + 1});
  return {{"m", a.rows()}, {"n", a.cols()}, {"k", a.symbols()}, {"ones", std::move(ones)}};
}

inline Array3D array_from_json(const nlohmann::json& j) {
  Array3D a(j.at("m").get<int>(), j.at("n").get<int>(), j.at("k").get<int>());
  for (const auto& t : j.at("ones")) a.set(t.at(0).get<int>() - 1, t.at(1).get<int>() - 1, t.at(2).get<int>() - 1);
  return a;
}

/// Symbol grid with 1-based symbols and 0 for uncovered positions.
inline nlohmann::json to_json(const PartialLatinBox& b) {
  nlohmann::json grid = nlohmann::json::array();
  for (int r = 0; r < b.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < b.cols(); ++c) row.push_back(b.at(r, c) + 1);
    grid.push_back(std::move(row));
  }
  return grid;
}

}  // namespace latinbox
