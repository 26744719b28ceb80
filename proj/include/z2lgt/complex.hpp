#pragma once

#include "z2lgt/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace z2lgt {

/// Signed incidence between a cell and a face or coface.
struct Incidence {
  std::size_t index;
  int sign;

  friend bool operator==(const Incidence&, const Incidence&) = default;
};

/// A positively oriented k-cell: base vertex plus a bitmask of the axes it spans.
struct Cell {
  std::size_t vertex;
  unsigned axes;
};

/**
 * Cubical cell complex of a rectangular box in Z^m with free boundary.
 *
 * Vertices have coordinates 0 <= x_i < extents[i].  Positive k-cells for
 * k = 0..3 are indexed lexicographically by (base vertex, sorted axis set),
 * with coordinate 0 the most significant digit of the vertex order.  Only
 * positive orientations are stored; orientation signs live in the incidence
 * lists.  The boundary of (v; s_0 < ... < s_{k-1}) is
 *
 *     sum_i (-1)^i [ (v + e_{s_i}; S \ s_i) - (v; S \ s_i) ],
 *
 * so a plaquette (v; a < b) has oriented boundary
 * +(v,a) +(v+e_a,b) -(v+e_b,a) -(v,b).
 *
 * Immutable after construction.
 */
class CellComplex {
 public:
  static constexpr int kMaxDimension = 12;
  static constexpr std::size_t kMaxCells = std::size_t{1} << 26;

  CellComplex(int m, std::vector<int> extents) : m_(m), extents_(std::move(extents)) {
    if (m_ < 2 || m_ > kMaxDimension)
      throw InvalidArgument("lattice dimension must lie in [2, " + std::to_string(kMaxDimension) +
                            "], got " + std::to_string(m_));
    if (static_cast<int>(extents_.size()) != m_)
      throw InvalidArgument("expected " + std::to_string(m_) + " extents, got " +
                            std::to_string(extents_.size()));
    for (int e : extents_)
      if (e < 1) throw InvalidArgument("every extent must be >= 1, got " + std::to_string(e));
    build();
  }

  int dimension() const { return m_; }
  std::span<const int> extents() const { return extents_; }

  std::size_t count(int k) const {
    check_degree(k);
    return cells_[k].size();
  }
  std::size_t num_vertices() const { return cells_[0].size(); }
  std::size_t num_edges() const { return cells_[1].size(); }
  std::size_t num_plaquettes() const { return cells_[2].size(); }
  std::size_t num_cubes() const { return cells_[3].size(); }

  const Cell& cell(int k, std::size_t index) const {
    check_degree(k);
    check_index(k, index);
    return cells_[k][index];
  }

  std::vector<int> vertex_coords(std::size_t v) const {
    if (v >= num_vertices()) throw InvalidArgument("vertex index out of range");
    std::vector<int> x(m_);
    for (int i = m_ - 1; i >= 0; --i) {
      x[i] = static_cast<int>(v % extents_[i]);
      v /= extents_[i];
    }
    return x;
  }

  std::size_t vertex_index(std::span<const int> x) const {
    if (static_cast<int>(x.size()) != m_) throw InvalidArgument("coordinate dimension mismatch");
    std::size_t v = 0;
    for (int i = 0; i < m_; ++i) {
      if (x[i] < 0 || x[i] >= extents_[i]) throw InvalidArgument("vertex outside the box");
      v = v * extents_[i] + x[i];
    }
    return v;
  }

  /// Index of the positive k-cell at base vertex `v` spanning `axes`, or -1 if it leaves the box.
  std::ptrdiff_t find_cell(int k, std::size_t v, unsigned axes) const {
    check_degree(k);
    if (std::popcount(axes) != k) throw InvalidArgument("axis set size does not match cell degree");
    if (v >= num_vertices()) return -1;
    for (int a = 0; a < m_; ++a)
      if ((axes >> a) & 1u)
        if ((v / strides_[a]) % extents_[a] + 1 >= static_cast<std::size_t>(extents_[a])) return -1;
    return lookup_[k][v * axis_sets_[k].size() + set_rank(k, axes)];
  }

  std::span<const Incidence> plaquette_boundary(std::size_t p) const {
    check_index(2, p);
    return {boundary2_.data() + 4 * p, 4};
  }

  std::span<const Incidence> edge_coboundary(std::size_t e) const {
    check_index(1, e);
    return {coboundary1_.data() + cob_offsets_[e], cob_offsets_[e + 1] - cob_offsets_[e]};
  }

  std::span<const Incidence> cube_boundary(std::size_t c) const {
    check_index(3, c);
    return {boundary3_.data() + 6 * c, 6};
  }

  /// Tail and head vertex of a positive edge.
  std::array<std::size_t, 2> edge_endpoints(std::size_t e) const {
    check_index(1, e);
    const Cell& c = cells_[1][e];
    const int a = std::countr_zero(c.axes);
    return {c.vertex, c.vertex + strides_[a]};
  }

  /// Axis of a positive edge.
  int edge_axis(std::size_t e) const { return std::countr_zero(cell(1, e).axes); }

  /// Edges incident to vertex `v`, ascending.
  std::span<const std::size_t> vertex_edges(std::size_t v) const {
    if (v >= num_vertices()) throw InvalidArgument("vertex index out of range");
    return {vertex_edges_.data() + vedge_offsets_[v], vedge_offsets_[v + 1] - vedge_offsets_[v]};
  }

  /// Twice the midpoint of an edge, so coordinates stay integral.
  std::vector<int> edge_midpoint2(std::size_t e) const {
    auto x = vertex_coords(cell(1, e).vertex);
    for (auto& xi : x) xi *= 2;
    x[edge_axis(e)] += 1;
    return x;
  }

  /// Breadth-first spanning tree rooted at vertex 0, neighbours visited by ascending edge index.
  std::vector<std::size_t> spanning_tree_edges() const {
    std::vector<std::size_t> tree;
    std::vector<char> seen(num_vertices(), 0);
    std::queue<std::size_t> frontier;
    seen[0] = 1;
    frontier.push(0);
    while (!frontier.empty()) {
      const std::size_t v = frontier.front();
      frontier.pop();
      for (std::size_t e : vertex_edges(v)) {
        const auto [t, h] = edge_endpoints(e);
        const std::size_t w = (t == v) ? h : t;
        if (!seen[w]) {
          seen[w] = 1;
          tree.push_back(e);
          frontier.push(w);
        }
      }
    }
    std::sort(tree.begin(), tree.end());
    return tree;
  }

  /// Closed-form count of positive k-cells: sum over axis sets of per-axis run counts.
  static std::size_t expected_count(std::span<const int> extents, int k) {
    const int m = static_cast<int>(extents.size());
    std::size_t total = 0;
    for (unsigned s = 0; s < (1u << m); ++s) {
      if (std::popcount(s) != k) continue;
      std::size_t prod = 1;
      for (int a = 0; a < m; ++a) prod *= ((s >> a) & 1u) ? extents[a] - 1 : extents[a];
      total += prod;
    }
    return total;
  }

 private:
  void check_degree(int k) const {
    if (k < 0 || k > 3) throw InvalidArgument("cell degree must lie in [0, 3]");
  }
  void check_index(int k, std::size_t i) const {
    if (i >= cells_[k].size())
      throw InvalidArgument("index " + std::to_string(i) + " out of range for " + std::to_string(k) +
                            "-cells (count " + std::to_string(cells_[k].size()) + ")");
  }

  std::size_t set_rank(int k, unsigned axes) const {
    const auto& sets = axis_sets_[k];
    return static_cast<std::size_t>(std::lower_bound(sets.begin(), sets.end(), axes, lex_less) - sets.begin());
  }

  // Lexicographic order on sorted axis tuples, for bitmasks of equal popcount.
  static bool lex_less(unsigned a, unsigned b) {
    while (a != b) {
      const int la = std::countr_zero(a), lb = std::countr_zero(b);
      if (la != lb) return la < lb;
      a &= a - 1;
      b &= b - 1;
    }
    return false;
  }

  void build() {
    std::size_t nverts = 1;
    for (int e : extents_) {
      nverts *= static_cast<std::size_t>(e);
      if (nverts > kMaxCells) throw InvalidArgument("box too large");
    }
    strides_.assign(m_, 1);
    for (int i = m_ - 2; i >= 0; --i) strides_[i] = strides_[i + 1] * extents_[i + 1];

    for (int k = 0; k <= 3; ++k) {
      auto& sets = axis_sets_[k];
      for (unsigned s = 0; s < (1u << m_); ++s)
        if (std::popcount(s) == k) sets.push_back(s);
      std::sort(sets.begin(), sets.end(), lex_less);
      if (expected_count(extents_, k) > kMaxCells) throw InvalidArgument("box too large");
      lookup_[k].assign(nverts * sets.size(), -1);
    }

    std::vector<int> x(m_, 0);
    for (std::size_t v = 0; v < nverts; ++v) {
      for (int k = 0; k <= 3; ++k) {
        const auto& sets = axis_sets_[k];
        for (std::size_t si = 0; si < sets.size(); ++si) {
          bool fits = true;
          for (int a = 0; a < m_ && fits; ++a)
            if (((sets[si] >> a) & 1u) && x[a] + 1 >= extents_[a]) fits = false;
          if (!fits) continue;
          lookup_[k][v * sets.size() + si] = static_cast<std::ptrdiff_t>(cells_[k].size());
          cells_[k].push_back(Cell{v, sets[si]});
        }
      }
      for (int i = m_ - 1; i >= 0; --i) {
        if (++x[i] < extents_[i]) break;
        x[i] = 0;
      }
    }

    boundary2_.reserve(4 * num_plaquettes());
    for (const Cell& c : cells_[2]) append_boundary(2, c, boundary2_);
    boundary3_.reserve(6 * num_cubes());
    for (const Cell& c : cells_[3]) append_boundary(3, c, boundary3_);

    // Coboundary as the transpose of boundary2, plaquettes ascending per edge.
    std::vector<std::size_t> degree(num_edges(), 0);
    for (const auto& inc : boundary2_) ++degree[inc.index];
    cob_offsets_.assign(num_edges() + 1, 0);
    for (std::size_t e = 0; e < num_edges(); ++e) cob_offsets_[e + 1] = cob_offsets_[e] + degree[e];
    coboundary1_.resize(boundary2_.size());
    std::vector<std::size_t> fill(cob_offsets_.begin(), cob_offsets_.end() - 1);
    for (std::size_t p = 0; p < num_plaquettes(); ++p)
      for (int j = 0; j < 4; ++j) {
        const auto& inc = boundary2_[4 * p + j];
        coboundary1_[fill[inc.index]++] = Incidence{p, inc.sign};
      }

    std::vector<std::size_t> vdeg(nverts, 0);
    for (std::size_t e = 0; e < num_edges(); ++e) {
      const auto [t, h] = edge_endpoints(e);
      ++vdeg[t];
      ++vdeg[h];
    }
    vedge_offsets_.assign(nverts + 1, 0);
    for (std::size_t v = 0; v < nverts; ++v) vedge_offsets_[v + 1] = vedge_offsets_[v] + vdeg[v];
    vertex_edges_.resize(vedge_offsets_.back());
    std::vector<std::size_t> vfill(vedge_offsets_.begin(), vedge_offsets_.end() - 1);
    for (std::size_t e = 0; e < num_edges(); ++e) {
      const auto [t, h] = edge_endpoints(e);
      vertex_edges_[vfill[t]++] = e;
      vertex_edges_[vfill[h]++] = e;
    }
  }

  void append_boundary(int k, const Cell& c, std::vector<Incidence>& out) const {
    int i = 0;
    for (unsigned rest = c.axes; rest; rest &= rest - 1, ++i) {
      const int a = std::countr_zero(rest);
      const unsigned face = c.axes & ~(1u << a);
      const int sign = (i % 2 == 0) ? 1 : -1;
      const auto far = lookup_[k - 1][(c.vertex + strides_[a]) * axis_sets_[k - 1].size() + set_rank(k - 1, face)];
      const auto near = lookup_[k - 1][c.vertex * axis_sets_[k - 1].size() + set_rank(k - 1, face)];
      out.push_back(Incidence{static_cast<std::size_t>(far), sign});
      out.push_back(Incidence{static_cast<std::size_t>(near), -sign});
    }
  }

  int m_;
  std::vector<int> extents_;
  std::vector<std::size_t> strides_;
  std::array<std::vector<Cell>, 4> cells_;
  std::array<std::vector<unsigned>, 4> axis_sets_;
  std::array<std::vector<std::ptrdiff_t>, 4> lookup_;
  std::vector<Incidence> boundary2_;
  std::vector<Incidence> boundary3_;
  std::vector<Incidence> coboundary1_;
  std::vector<std::size_t> cob_offsets_;
  std::vector<std::size_t> vertex_edges_;
  std::vector<std::size_t> vedge_offsets_;
};

inline CellComplex build_complex(int m, std::vector<int> extents) { return CellComplex(m, std::move(extents)); }

inline std::span<const Incidence> plaquette_boundary(const CellComplex& cx, std::size_t p) {
  return cx.plaquette_boundary(p);
}

inline std::span<const Incidence> edge_coboundary(const CellComplex& cx, std::size_t e) {
  return cx.edge_coboundary(e);
}

}  // namespace z2lgt
