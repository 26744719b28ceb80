#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/errors.hpp"
#include "z2lgt/gf2.hpp"
#include "z2lgt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace z2lgt {

/**
 * Inverse temperature, either global or per positive plaquette, together with
 * the derived Bernoulli parameters used by the couplings:
 *
 *   prob_hat      = 1 - 1/cosh(2 beta)   occupation of an even-parity current entry
 *   prob_ht       = tanh(2 beta)         high-temperature to cluster
 *   prob_boost    = 1 - exp(-2 beta)     current support to cluster
 *   prob_cluster  = 1 - exp(-4 beta)     random cluster edge weight
 */
class CouplingParams {
 public:
  CouplingParams() = default;

  static CouplingParams uniform(double beta, std::size_t num_plaquettes) {
    return CouplingParams(std::vector<double>(num_plaquettes, beta), true);
  }

  static CouplingParams per_plaquette(std::vector<double> betas) {
    return CouplingParams(std::move(betas), false);
  }

  std::size_t size() const { return beta_.size(); }
  bool is_uniform() const { return uniform_; }
  double beta(std::size_t p) const { return beta_.at(p); }
  std::span<const double> betas() const { return beta_; }

  /// The global value; only defined for uniform couplings.
  double beta() const {
    if (!uniform_) throw InvalidArgument("couplings are per-plaquette, no single beta");
    return beta_.empty() ? 0.0 : beta_.front();
  }

  double max_beta() const { return beta_.empty() ? 0.0 : *std::max_element(beta_.begin(), beta_.end()); }

  double prob_hat(std::size_t p) const { return 1.0 - 1.0 / std::cosh(2.0 * beta(p)); }
  double prob_ht(std::size_t p) const { return std::tanh(2.0 * beta(p)); }
  double prob_boost(std::size_t p) const { return -std::expm1(-2.0 * beta(p)); }
  double prob_cluster(std::size_t p) const { return -std::expm1(-4.0 * beta(p)); }

  Real beta_real(std::size_t p) const { return Real(beta(p)); }
  Real prob_hat_real(std::size_t p) const { return 1 - 1 / cosh(2 * beta_real(p)); }
  Real prob_ht_real(std::size_t p) const { return tanh(2 * beta_real(p)); }
  Real prob_boost_real(std::size_t p) const { return 1 - exp(-2 * beta_real(p)); }
  Real prob_cluster_real(std::size_t p) const { return 1 - exp(-4 * beta_real(p)); }

  void check_size(std::size_t num_plaquettes) const {
    if (beta_.size() != num_plaquettes)
      throw InvalidArgument("coupling list has " + std::to_string(beta_.size()) + " entries, complex has " +
                            std::to_string(num_plaquettes) + " plaquettes");
  }

  friend bool operator==(const CouplingParams&, const CouplingParams&) = default;

 private:
  CouplingParams(std::vector<double> betas, bool uniform) : beta_(std::move(betas)), uniform_(uniform) {
    for (std::size_t p = 0; p < beta_.size(); ++p) {
      const double b = beta_[p];
      if (!std::isfinite(b) || b < 0) throw InvalidArgument("beta must be finite and >= 0");
      if (b == 0) continue;
      const Real p1 = prob_hat_real(p), p2 = prob_ht_real(p), p3 = prob_boost_real(p), prc = prob_cluster_real(p);
      if (!(0 < p1 && p1 < p2 && p2 < prc && prc < 1 && 0 < p3 && p3 < 1))
        throw InvalidArgument("beta = " + std::to_string(b) + " is numerically degenerate");
      // Same ordering must survive in double precision for the samplers.
      if (!(prob_hat(p) < prob_ht(p) && prob_ht(p) < prob_cluster(p) && prob_cluster(p) < 1.0))
        throw InvalidArgument("beta = " + std::to_string(b) + " is numerically degenerate in double precision");
    }
  }

  std::vector<double> beta_;
  bool uniform_ = true;
};

/// Z2-valued 1-form on positive edges; sigma(-e) = -sigma(e) is implied.
struct GaugeField {
  BitVector bits;

  GaugeField() = default;
  explicit GaugeField(std::size_t num_edges) : bits(num_edges) {}
  explicit GaugeField(BitVector b) : bits(std::move(b)) {}
  static GaugeField zero(const CellComplex& cx) { return GaugeField(cx.num_edges()); }

  friend bool operator==(const GaugeField&, const GaugeField&) = default;
};

/// Z2 2-form on positive plaquettes; also the indicator of a plaquette set.
struct TwoFormZ2 {
  BitVector bits;

  TwoFormZ2() = default;
  explicit TwoFormZ2(std::size_t num_plaquettes) : bits(num_plaquettes) {}
  explicit TwoFormZ2(BitVector b) : bits(std::move(b)) {}
  static TwoFormZ2 empty(const CellComplex& cx) { return TwoFormZ2(cx.num_plaquettes()); }

  std::size_t size() const { return bits.size(); }

  friend bool operator==(const TwoFormZ2&, const TwoFormZ2&) = default;
};

/// Nonnegative integer 2-form on positive plaquettes.
struct Current {
  std::vector<std::uint32_t> values;

  Current() = default;
  explicit Current(std::size_t num_plaquettes) : values(num_plaquettes, 0) {}
  explicit Current(std::vector<std::uint32_t> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  std::uint64_t total_mass() const {
    std::uint64_t s = 0;
    for (auto v : values) s += v;
    return s;
  }
  TwoFormZ2 parity() const {
    TwoFormZ2 out(values.size());
    for (std::size_t p = 0; p < values.size(); ++p)
      if (values[p] & 1u) out.bits.set(p);
    return out;
  }
  TwoFormZ2 support() const {
    TwoFormZ2 out(values.size());
    for (std::size_t p = 0; p < values.size(); ++p)
      if (values[p]) out.bits.set(p);
    return out;
  }

  friend Current operator+(const Current& a, const Current& b) {
    if (a.size() != b.size()) throw InvalidArgument("current length mismatch");
    Current c(a.size());
    for (std::size_t p = 0; p < a.size(); ++p) c.values[p] = a.values[p] + b.values[p];
    return c;
  }
  bool operator<=(const Current& o) const {
    if (size() != o.size()) throw InvalidArgument("current length mismatch");
    for (std::size_t p = 0; p < size(); ++p)
      if (values[p] > o.values[p]) return false;
    return true;
  }
  friend bool operator==(const Current&, const Current&) = default;
};

/**
 * A 1-chain with coefficients in {-1, 0, 1} on positive edges.
 *
 * Loops built from user input satisfy the signed condition boundary = 0.
 * Every loop has even mod-2 incidence at each vertex, and that parity is all
 * the Z2 model consumes.  Concatenation adds coefficients and drops entries
 * that reach +-2.
 */
class Loop {
 public:
  Loop() = default;

  static Loop empty(const CellComplex& cx) { return Loop(std::vector<std::int8_t>(cx.num_edges(), 0)); }

  static Loop from_coefficients(const CellComplex& cx, std::vector<std::int8_t> coeffs) {
    if (coeffs.size() != cx.num_edges())
      throw InvalidArgument("loop has " + std::to_string(coeffs.size()) + " coefficients, complex has " +
                            std::to_string(cx.num_edges()) + " edges");
    for (auto c : coeffs)
      if (c < -1 || c > 1) throw InvalidArgument("loop coefficients must lie in {-1, 0, 1}");
    std::vector<long> vertex_sum(cx.num_vertices(), 0);
    for (std::size_t e = 0; e < coeffs.size(); ++e) {
      if (!coeffs[e]) continue;
      const auto [t, h] = cx.edge_endpoints(e);
      vertex_sum[h] += coeffs[e];
      vertex_sum[t] -= coeffs[e];
    }
    for (std::size_t v = 0; v < vertex_sum.size(); ++v)
      if (vertex_sum[v] != 0)
        throw InvalidArgument("loop boundary is nonzero at vertex " + std::to_string(v));
    return Loop(std::move(coeffs));
  }

  /// Mod-2 representative with coefficients in {0, 1}; requires even degree at every vertex.
  static Loop from_support(const CellComplex& cx, const BitVector& support) {
    if (support.size() != cx.num_edges()) throw InvalidArgument("loop support has wrong length");
    std::vector<std::uint8_t> degree(cx.num_vertices(), 0);
    std::vector<std::int8_t> coeffs(cx.num_edges(), 0);
    for (auto e : support.indices()) {
      coeffs[e] = 1;
      const auto [t, h] = cx.edge_endpoints(e);
      degree[t] ^= 1u;
      degree[h] ^= 1u;
    }
    for (std::size_t v = 0; v < degree.size(); ++v)
      if (degree[v]) throw InvalidArgument("edge set has odd degree at vertex " + std::to_string(v));
    return Loop(std::move(coeffs));
  }

  /// Oriented boundary of a single plaquette.
  static Loop plaquette_boundary(const CellComplex& cx, std::size_t p) {
    std::vector<std::int8_t> coeffs(cx.num_edges(), 0);
    for (const auto& inc : cx.plaquette_boundary(p)) coeffs[inc.index] = static_cast<std::int8_t>(inc.sign);
    return Loop(std::move(coeffs));
  }

  /// Boundary of the width x height rectangle spanned by axes (a, b) at `corner`.
  static Loop rectangle(const CellComplex& cx, std::span<const int> corner, int a, int b, int width, int height) {
    const int m = cx.dimension();
    if (static_cast<int>(corner.size()) != m) throw InvalidArgument("rectangle corner has wrong dimension");
    if (a < 0 || b < 0 || a >= m || b >= m || a == b) throw InvalidArgument("rectangle axes must be two distinct axes");
    if (width < 1 || height < 1) throw InvalidArgument("rectangle sides must be >= 1");
    const unsigned axes = (1u << a) | (1u << b);
    const int orient = a < b ? 1 : -1;
    std::vector<int> acc(cx.num_edges(), 0);
    std::vector<int> x(corner.begin(), corner.end());
    for (int i = 0; i < width; ++i)
      for (int j = 0; j < height; ++j) {
        x[a] = corner[a] + i;
        x[b] = corner[b] + j;
        for (int d = 0; d < m; ++d)
          if (x[d] < 0 || x[d] >= cx.extents()[d]) throw InvalidArgument("rectangle leaves the box");
        const auto p = cx.find_cell(2, cx.vertex_index(x), axes);
        if (p < 0) throw InvalidArgument("rectangle leaves the box");
        for (const auto& inc : cx.plaquette_boundary(static_cast<std::size_t>(p))) acc[inc.index] += orient * inc.sign;
      }
    std::vector<std::int8_t> coeffs(cx.num_edges(), 0);
    for (std::size_t e = 0; e < acc.size(); ++e) coeffs[e] = static_cast<std::int8_t>(acc[e]);
    return from_coefficients(cx, std::move(coeffs));
  }

  std::span<const std::int8_t> coefficients() const { return coeffs_; }
  const BitVector& support() const { return support_; }
  std::size_t num_edges() const { return coeffs_.size(); }
  /// |gamma|, the size of the support.
  std::size_t length() const { return support_.popcount(); }
  bool is_empty() const { return support_.none(); }

  void check_inside(const CellComplex& cx) const {
    if (coeffs_.size() != cx.num_edges()) throw InvalidArgument("loop is not supported inside this complex");
  }

  friend Loop operator+(const Loop& x, const Loop& y) {
    if (x.num_edges() != y.num_edges()) throw InvalidArgument("loops live on different complexes");
    std::vector<std::int8_t> c(x.num_edges(), 0);
    for (std::size_t e = 0; e < c.size(); ++e) {
      const int s = x.coeffs_[e] + y.coeffs_[e];
      c[e] = static_cast<std::int8_t>((s == 2 || s == -2) ? 0 : s);
    }
    return Loop(std::move(c));
  }
  Loop operator-() const {
    std::vector<std::int8_t> c(coeffs_);
    for (auto& v : c) v = static_cast<std::int8_t>(-v);
    return Loop(std::move(c));
  }

  friend bool operator==(const Loop&, const Loop&) = default;

 private:
  explicit Loop(std::vector<std::int8_t> coeffs) : coeffs_(std::move(coeffs)), support_(coeffs_.size()) {
    for (std::size_t e = 0; e < coeffs_.size(); ++e)
      if (coeffs_[e]) support_.set(e);
  }

  std::vector<std::int8_t> coeffs_;
  BitVector support_;
};

/// rho(d sigma(p)) as +1 or -1.
inline int holonomy(const CellComplex& cx, const GaugeField& sigma, std::size_t p) {
  if (sigma.bits.size() != cx.num_edges()) throw InvalidArgument("gauge field has wrong length");
  bool odd = false;
  for (const auto& inc : cx.plaquette_boundary(p)) odd ^= sigma.bits.test(inc.index);
  return odd ? -1 : 1;
}

/// Wilson action summed over both orientations of every plaquette: -2 sum_{p positive} rho(d sigma(p)).
inline double action(const CellComplex& cx, const GaugeField& sigma) {
  long sum = 0;
  for (std::size_t p = 0; p < cx.num_plaquettes(); ++p) sum += holonomy(cx, sigma, p);
  return -2.0 * static_cast<double>(sum);
}

inline int wilson(const CellComplex& cx, const GaugeField& sigma, const Loop& gamma) {
  gamma.check_inside(cx);
  if (sigma.bits.size() != cx.num_edges()) throw InvalidArgument("gauge field has wrong length");
  return sigma.bits.dot(gamma.support()) ? -1 : 1;
}

/// log w(n) = sum_p n(p) log(2 beta_p) - log n(p)!.
inline double log_current_weight(const Current& n, const CouplingParams& params) {
  params.check_size(n.size());
  double acc = 0;
  for (std::size_t p = 0; p < n.size(); ++p) {
    const auto k = n.values[p];
    if (k == 0) continue;
    if (params.beta(p) == 0) return -std::numeric_limits<double>::infinity();
    acc += k * std::log(2.0 * params.beta(p)) - std::lgamma(static_cast<double>(k) + 1.0);
  }
  return acc;
}

inline double current_weight(const Current& n, const CouplingParams& params) {
  return std::exp(log_current_weight(n, params));
}

/// Exact w(n) for rational per-plaquette couplings.
inline Rational current_weight_exact(const Current& n, std::span<const Rational> betas) {
  if (betas.size() != n.size()) throw InvalidArgument("coupling list length does not match current");
  Rational w = 1;
  for (std::size_t p = 0; p < n.size(); ++p) {
    const auto k = n.values[p];
    if (k == 0) continue;
    const Rational twob = 2 * betas[p];
    BigInt fact = 1;
    for (std::uint32_t i = 2; i <= k; ++i) fact *= i;
    Rational pw = 1;
    for (std::uint32_t i = 0; i < k; ++i) pw *= twob;
    w *= pw / Rational(fact);
  }
  return w;
}

inline Rational current_weight_exact(const Current& n, const Rational& beta) {
  std::vector<Rational> betas(n.size(), beta);
  return current_weight_exact(n, betas);
}

/// Edge parity of sum_{p in coboundary(e)} n(p).
inline BitVector edge_parity(const CellComplex& cx, const TwoFormZ2& parity) {
  if (parity.size() != cx.num_plaquettes()) throw InvalidArgument("2-form has wrong length");
  BitVector out(cx.num_edges());
  for (auto p : parity.bits.indices())
    for (const auto& inc : cx.plaquette_boundary(p)) out.flip(inc.index);
  return out;
}

/// n is in C_gamma: gamma(e) + sum_{p in coboundary(e)} n(p) is even for every edge.
inline bool is_source(const CellComplex& cx, const Current& n, const Loop& gamma) {
  gamma.check_inside(cx);
  return edge_parity(cx, n.parity()) == gamma.support();
}

/// Mod-2 boundary map restricted to the plaquettes in `columns`.
inline BitMatrix restricted_boundary_matrix(const CellComplex& cx, std::span<const std::size_t> columns) {
  BitMatrix a(cx.num_edges(), columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (const auto& inc : cx.plaquette_boundary(columns[j])) a.flip(inc.index, j);
  return a;
}

/// Solutions P' of boundary(P') = gamma with P' inside `allowed`, in coordinates of allowed.indices().
inline AffineSolutionSet bounding_surfaces(const CellComplex& cx, const TwoFormZ2& allowed, const Loop& gamma) {
  gamma.check_inside(cx);
  const auto cols = allowed.bits.indices();
  return solve_affine(restricted_boundary_matrix(cx, cols), gamma.support());
}

/// Lifts a solution in restricted coordinates back to a plaquette set.
inline TwoFormZ2 expand_columns(const CellComplex& cx, std::span<const std::size_t> cols, const BitVector& x) {
  TwoFormZ2 out(cx.num_plaquettes());
  for (auto j : x.indices()) out.bits.set(cols[j]);
  return out;
}

/// P is in the event P_gamma: some P' inside P has mod-2 boundary gamma.
inline bool contains_bounding_surface(const CellComplex& cx, const TwoFormZ2& P, const Loop& gamma) {
  if (P.size() != cx.num_plaquettes()) throw InvalidArgument("plaquette set has wrong length");
  return bounding_surfaces(cx, P, gamma).feasible;
}

/// Some q in C_gamma with q <= n exists.  Any parity pattern on supp(n) is realised by a 0/1 current
/// below n, so this is feasibility of the boundary system restricted to supp(n).
inline bool has_subcurrent(const CellComplex& cx, const Current& n, const Loop& gamma) {
  return contains_bounding_surface(cx, n.support(), gamma);
}

/// Mod-2 boundary of a plaquette set, as a loop with coefficients in {0, 1}.
inline Loop set_boundary(const CellComplex& cx, const TwoFormZ2& P) {
  return Loop::from_support(cx, edge_parity(cx, P));
}

/// Area of an axis-parallel R x T rectangle.  Any bounding surface, projected onto the rectangle's plane, covers
/// each enclosed unit square an odd number of times, so none is smaller than the flat one.
constexpr std::size_t rectangle_area(std::size_t width, std::size_t height) { return width * height; }

/// min over currents with source gamma of the total mass, by exhaustive search of the solution coset.
inline std::size_t area(const CellComplex& cx, const Loop& gamma, std::size_t budget = 24) {
  gamma.check_inside(cx);
  const auto sol = solve_affine(boundary_matrix(cx), gamma.support());
  if (!sol.feasible) throw Infeasible("loop bounds no surface inside the complex");
  if (sol.kernel_dim() > budget)
    throw SizeRefusal("area search too large: coset dimension " + std::to_string(sol.kernel_dim()) +
                      " exceeds budget " + std::to_string(budget));
  std::size_t best = std::numeric_limits<std::size_t>::max();
  sol.for_each([&](const BitVector& x) { best = std::min(best, x.popcount()); });
  return best;
}

/// Coupling transforms between the graphical representations.
enum class CouplingStep {
  parity,            // current -> n mod 2
  lift,              // parity 2-form -> current, conditioned Poisson per plaquette
  hat_from_ht,       // max(eta, X1)
  cluster_from_ht,   // supp max(eta, X2)
  cluster_from_hat,  // supp max(hat n, X3)
  subsurface,        // uniform P' inside P with boundary gamma
  gauge_to_cluster,  // keep flat plaquettes independently
  cluster_to_gauge,  // uniform flat gauge field
};

inline std::string to_string(CouplingStep s) {
  switch (s) {
    case CouplingStep::parity: return "parity";
    case CouplingStep::lift: return "lift";
    case CouplingStep::hat_from_ht: return "hat-from-ht";
    case CouplingStep::cluster_from_ht: return "cluster-from-ht";
    case CouplingStep::cluster_from_hat: return "cluster-from-hat";
    case CouplingStep::subsurface: return "subsurface";
    case CouplingStep::gauge_to_cluster: return "gauge-to-cluster";
    case CouplingStep::cluster_to_gauge: return "cluster-to-gauge";
  }
  return "?";
}

inline CouplingStep parse_coupling_step(const std::string& s) {
  for (auto step : {CouplingStep::parity, CouplingStep::lift, CouplingStep::hat_from_ht, CouplingStep::cluster_from_ht,
                    CouplingStep::cluster_from_hat, CouplingStep::subsurface, CouplingStep::gauge_to_cluster,
                    CouplingStep::cluster_to_gauge})
    if (to_string(step) == s) return step;
  if (s == "a") return CouplingStep::parity;
  if (s == "b") return CouplingStep::hat_from_ht;
  if (s == "c") return CouplingStep::cluster_from_ht;
  if (s == "d") return CouplingStep::subsurface;
  throw InvalidArgument("unknown coupling step '" + s + "'");
}

}  // namespace z2lgt
