#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/errors.hpp"

#include <bit>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace z2lgt {

/// Dense packed bit-vector over GF(2).
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t n) : size_(n), words_((n + 63) / 64, 0) {}

  static BitVector from_indices(std::size_t n, std::span<const std::size_t> indices) {
    BitVector v(n);
    for (auto i : indices) v.set(i);
    return v;
  }

  /// Low `n` bits of `bits` (n <= 64).
  static BitVector from_word(std::size_t n, std::uint64_t bits) {
    BitVector v(n);
    if (n > 0) v.words_[0] = (n >= 64) ? bits : (bits & ((std::uint64_t{1} << n) - 1));
    return v;
  }

  std::size_t size() const { return size_; }
  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> words() { return words_; }

  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool value = true) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }
  void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }
  void reset() { std::fill(words_.begin(), words_.end(), 0); }

  BitVector& operator^=(const BitVector& o) {
    check_same(o);
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] ^= o.words_[w];
    return *this;
  }
  BitVector& operator&=(const BitVector& o) {
    check_same(o);
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= o.words_[w];
    return *this;
  }
  BitVector& operator|=(const BitVector& o) {
    check_same(o);
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
    return *this;
  }
  friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
  friend BitVector operator&(BitVector a, const BitVector& b) { return a &= b; }
  friend BitVector operator|(BitVector a, const BitVector& b) { return a |= b; }

  std::size_t popcount() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool any() const {
    for (auto w : words_)
      if (w) return true;
    return false;
  }
  bool none() const { return !any(); }

  /// Parity of the AND with `o` (GF(2) inner product).
  bool dot(const BitVector& o) const {
    check_same(o);
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) acc ^= words_[w] & o.words_[w];
    return std::popcount(acc) & 1;
  }

  bool is_subset_of(const BitVector& o) const {
    check_same(o);
    for (std::size_t w = 0; w < words_.size(); ++w)
      if (words_[w] & ~o.words_[w]) return false;
    return true;
  }

  /// Index of the first set bit at or after `from`, or size() if none.
  std::size_t find_next(std::size_t from) const {
    if (from >= size_) return size_;
    std::size_t w = from >> 6;
    std::uint64_t cur = words_[w] & (~std::uint64_t{0} << (from & 63));
    while (true) {
      if (cur) return std::min(size_, (w << 6) + static_cast<std::size_t>(std::countr_zero(cur)));
      if (++w >= words_.size()) return size_;
      cur = words_[w];
    }
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = find_next(0); i < size_; i = find_next(i + 1)) out.push_back(i);
    return out;
  }

  /// Configuration id for small vectors (size <= 64).
  std::uint64_t to_word() const {
    if (size_ > 64) throw InvalidArgument("bit-vector too long for a single word");
    return words_.empty() ? 0 : words_[0];
  }

  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
      if (test(i)) s[i] = '1';
    return s;
  }

  friend bool operator==(const BitVector&, const BitVector&) = default;
  /// Total order (length, then words) so bit-vectors can key ordered containers.
  friend bool operator<(const BitVector& a, const BitVector& b) {
    if (a.size_ != b.size_) return a.size_ < b.size_;
    return a.words_ < b.words_;
  }

 private:
  void check_same(const BitVector& o) const {
    if (o.size_ != size_) throw InvalidArgument("bit-vector length mismatch");
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Dense row-major bit matrix over GF(2).
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows, BitVector(cols)) {}

  static BitMatrix identity(std::size_t n) {
    BitMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i);
    return m;
  }

  static BitMatrix from_rows(std::size_t cols, std::vector<BitVector> rows) {
    for (const auto& r : rows)
      if (r.size() != cols) throw InvalidArgument("row length does not match column count");
    BitMatrix m;
    m.cols_ = cols;
    m.rows_ = std::move(rows);
    return m;
  }

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return cols_; }
  bool get(std::size_t r, std::size_t c) const { return rows_[r].test(c); }
  void set(std::size_t r, std::size_t c, bool v = true) { rows_[r].set(c, v); }
  void flip(std::size_t r, std::size_t c) { rows_[r].flip(c); }
  const BitVector& row(std::size_t r) const { return rows_[r]; }
  BitVector& row(std::size_t r) { return rows_[r]; }

  BitVector multiply(const BitVector& x) const {
    if (x.size() != cols_) throw InvalidArgument("matrix-vector dimension mismatch");
    BitVector y(rows());
    for (std::size_t r = 0; r < rows(); ++r)
      if (rows_[r].dot(x)) y.set(r);
    return y;
  }

  /// Column-restricted copy: keeps columns `keep` in the given order.
  BitMatrix select_columns(std::span<const std::size_t> keep) const {
    BitMatrix out(rows(), keep.size());
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t j = 0; j < keep.size(); ++j)
        if (rows_[r].test(keep[j])) out.set(r, j);
    return out;
  }

  BitMatrix transpose() const {
    BitMatrix t(cols_, rows());
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = rows_[r].find_next(0); c < cols_; c = rows_[r].find_next(c + 1)) t.set(c, r);
    return t;
  }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  std::size_t cols_ = 0;
  std::vector<BitVector> rows_;
};

/// In-place Gauss-Jordan reduction to reduced row echelon form.
///
/// Columns are scanned left to right; the pivot for a column is the first
/// remaining row with that bit set.  When `rhs` is given it is reduced
/// alongside.  Returns the pivot column of each of the first rank rows.
inline std::vector<std::size_t> reduce_to_rref(BitMatrix& a, BitVector* rhs = nullptr) {
  if (rhs && rhs->size() != a.rows()) throw InvalidArgument("right-hand side length does not match row count");
  std::vector<std::size_t> pivots;
  std::size_t r = 0;
  for (std::size_t c = 0; c < a.cols() && r < a.rows(); ++c) {
    std::size_t piv = r;
    while (piv < a.rows() && !a.get(piv, c)) ++piv;
    if (piv == a.rows()) continue;
    if (piv != r) {
      std::swap(a.row(piv), a.row(r));
      if (rhs) {
        const bool t = rhs->test(piv);
        rhs->set(piv, rhs->test(r));
        rhs->set(r, t);
      }
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (i != r && a.get(i, c)) {
        a.row(i) ^= a.row(r);
        if (rhs && rhs->test(r)) rhs->flip(i);
      }
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

inline std::size_t rank(BitMatrix a) { return reduce_to_rref(a).size(); }

/// Solution set {x : A x = b} of an affine GF(2) system.
struct AffineSolutionSet {
  bool feasible = false;
  std::size_t ambient = 0;
  BitVector particular;
  std::vector<BitVector> kernel;

  std::size_t kernel_dim() const { return kernel.size(); }

  /// Calls `visit` on every solution, in Gray-code order over the kernel basis.
  void for_each(const std::function<void(const BitVector&)>& visit) const {
    if (!feasible) return;
    if (kernel.size() >= 63) throw SizeRefusal("solution coset too large to enumerate");
    BitVector x = particular;
    visit(x);
    const std::uint64_t total = std::uint64_t{1} << kernel.size();
    for (std::uint64_t i = 1; i < total; ++i) {
      x ^= kernel[static_cast<std::size_t>(std::countr_zero(i))];
      visit(x);
    }
  }
};

inline AffineSolutionSet solve_affine(const BitMatrix& a, const BitVector& b) {
  if (b.size() != a.rows())
    throw InvalidArgument("system has " + std::to_string(a.rows()) + " rows but right-hand side has length " +
                          std::to_string(b.size()));
  BitMatrix m = a;
  BitVector rhs = b;
  const auto pivots = reduce_to_rref(m, &rhs);
  AffineSolutionSet s;
  s.ambient = a.cols();
  for (std::size_t r = pivots.size(); r < m.rows(); ++r)
    if (rhs.test(r)) return s;
  s.feasible = true;
  s.particular = BitVector(a.cols());
  for (std::size_t r = 0; r < pivots.size(); ++r)
    if (rhs.test(r)) s.particular.set(pivots[r]);
  std::vector<char> is_pivot(a.cols(), 0);
  for (auto c : pivots) is_pivot[c] = 1;
  for (std::size_t f = 0; f < a.cols(); ++f) {
    if (is_pivot[f]) continue;
    BitVector k(a.cols());
    k.set(f);
    for (std::size_t r = 0; r < pivots.size(); ++r)
      if (m.get(r, f)) k.set(pivots[r]);
    s.kernel.push_back(std::move(k));
  }
  return s;
}

/// Uniform element of a feasible solution set: particular + random combination of the kernel basis.
template <class Urbg>
BitVector uniform_solution(const AffineSolutionSet& s, Urbg& rng) {
  static_assert(Urbg::min() == 0 && Urbg::max() == ~std::uint64_t{0}, "needs a full 64-bit generator");
  if (!s.feasible) throw Infeasible("cannot sample from an infeasible system");
  BitVector x = s.particular;
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < s.kernel.size(); ++i) {
    if (i % 64 == 0) bits = static_cast<std::uint64_t>(rng());
    if ((bits >> (i % 64)) & 1u) x ^= s.kernel[i];
  }
  return x;
}

/// Mod-2 plaquette-to-edge boundary map: rows are edges, columns plaquettes.
inline BitMatrix boundary_matrix(const CellComplex& cx) {
  BitMatrix a(cx.num_edges(), cx.num_plaquettes());
  for (std::size_t p = 0; p < cx.num_plaquettes(); ++p)
    for (const auto& inc : cx.plaquette_boundary(p)) a.flip(inc.index, p);
  return a;
}

/// Rows of the mod-2 differential d restricted to the plaquettes in `plaquettes` (columns are edges).
inline BitMatrix flatness_matrix(const CellComplex& cx, std::span<const std::size_t> plaquettes) {
  BitMatrix a(plaquettes.size(), cx.num_edges());
  for (std::size_t r = 0; r < plaquettes.size(); ++r)
    for (const auto& inc : cx.plaquette_boundary(plaquettes[r])) a.flip(r, inc.index);
  return a;
}

/// First Betti number of the plaquette set P: log2 #{sigma : d sigma(p) = 0 for all p in P}.
inline std::size_t betti_b1(const CellComplex& cx, const BitVector& plaquettes) {
  if (plaquettes.size() != cx.num_plaquettes())
    throw InvalidArgument("plaquette set has wrong length for this complex");
  const auto idx = plaquettes.indices();
  return cx.num_edges() - rank(flatness_matrix(cx, idx));
}

}  // namespace z2lgt
