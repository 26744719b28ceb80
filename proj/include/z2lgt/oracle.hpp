#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/errors.hpp"
#include "z2lgt/forms.hpp"
#include "z2lgt/gf2.hpp"
#include "z2lgt/laurent.hpp"
#include "z2lgt/numeric.hpp"
#include "z2lgt/report.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace z2lgt {

/// Enumeration caps shared by the exact computations.
struct OracleBudget {
  std::size_t max_free_edges = 28;
  std::size_t max_coset_dim = 24;
  std::size_t max_state_bits = 20;
  std::size_t max_currents = 5'000'000;
};

/// Edges summed over by the gauge enumeration; with gauge fixing, the complement of the BFS spanning tree.
inline std::vector<std::size_t> enumerated_edges(const CellComplex& cx, bool gauge_fix) {
  std::vector<std::size_t> out;
  if (!gauge_fix) {
    out.resize(cx.num_edges());
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = e;
    return out;
  }
  const auto tree = cx.spanning_tree_edges();
  std::vector<char> in_tree(cx.num_edges(), 0);
  for (auto e : tree) in_tree[e] = 1;
  for (std::size_t e = 0; e < cx.num_edges(); ++e)
    if (!in_tree[e]) out.push_back(e);
  return out;
}

/// Number of gauge transformations identified by gauge fixing: 2^(|C0| - 1).
inline BigInt gauge_orbit_size(const CellComplex& cx) { return pow2(cx.num_vertices() - 1); }

namespace detail {

struct GaugeHistogram {
  std::vector<std::uint64_t> plus, minus;  // indexed by (sum of holonomies + |C2|) / 2
};

inline void enumerate_gauge_block(const CellComplex& cx, const BitVector& loop, std::span<const std::size_t> free,
                                  std::size_t low_bits, std::uint64_t block, GaugeHistogram& h) {
  const std::size_t np = cx.num_plaquettes();
  std::vector<std::uint8_t> frustrated(np, 0);
  bool wodd = false;
  for (std::size_t b = low_bits; b < free.size(); ++b) {
    if (!((block >> (b - low_bits)) & 1u)) continue;
    const auto e = free[b];
    for (const auto& inc : cx.edge_coboundary(e)) frustrated[inc.index] ^= 1u;
    wodd ^= loop.test(e);
  }
  long sum = 0;
  for (auto f : frustrated) sum += f ? -1 : 1;
  auto record = [&] {
    auto& bucket = wodd ? h.minus : h.plus;
    ++bucket[static_cast<std::size_t>((sum + static_cast<long>(np)) / 2)];
  };
  record();
  const std::uint64_t total = std::uint64_t{1} << low_bits;
  for (std::uint64_t i = 1; i < total; ++i) {
    const auto e = free[static_cast<std::size_t>(std::countr_zero(i))];
    for (const auto& inc : cx.edge_coboundary(e)) {
      frustrated[inc.index] ^= 1u;
      sum += frustrated[inc.index] ? -2 : 2;
    }
    wodd ^= loop.test(e);
    record();
  }
}

}  // namespace detail

/**
 * Z[gamma] = sum_sigma W_gamma(sigma) y^(sum_p rho(d sigma(p))) with y = e^(2 beta), summed over all gauge fields,
 * or over those vanishing on the BFS spanning tree when `gauge_fix` is set (the full sum divided by 2^(|C0|-1)).
 * Integer histograms are combined exactly, so the result is independent of `threads`.
 */
inline LaurentPoly exact_Z(const CellComplex& cx, const Loop& gamma, bool gauge_fix, unsigned threads = 1,
                           const OracleBudget& budget = {}) {
  gamma.check_inside(cx);
  const auto free = enumerated_edges(cx, gauge_fix);
  if (free.size() > budget.max_free_edges)
    throw SizeRefusal("gauge enumeration over " + std::to_string(free.size()) + " edges exceeds the cap of " +
                      std::to_string(budget.max_free_edges));
  const std::size_t np = cx.num_plaquettes();
  const std::size_t high_bits = std::min<std::size_t>(free.size() > 12 ? 6 : 0, free.size());
  const std::size_t low_bits = free.size() - high_bits;
  const std::uint64_t blocks = std::uint64_t{1} << high_bits;
  std::vector<detail::GaugeHistogram> hist(blocks);
  for (auto& h : hist) h.plus.assign(np + 1, 0), h.minus.assign(np + 1, 0);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  auto work = [&](unsigned w) {
    for (std::uint64_t b = w; b < blocks; b += workers)
      detail::enumerate_gauge_block(cx, gamma.support(), free, low_bits, b, hist[b]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  LaurentPoly z;
  for (std::size_t i = 0; i <= np; ++i) {
    BigInt c = 0;
    for (const auto& h : hist) c += BigInt(h.plus[i]) - BigInt(h.minus[i]);
    z.add_term(static_cast<int>(2 * i) - static_cast<int>(np), c);
  }
  return z;
}

/// Z[gamma] for per-plaquette couplings, by the same enumeration with high-precision weights.
inline Real exact_Z_weighted(const CellComplex& cx, const Loop& gamma, const CouplingParams& params, bool gauge_fix,
                             const OracleBudget& budget = {}) {
  gamma.check_inside(cx);
  params.check_size(cx.num_plaquettes());
  const auto free = enumerated_edges(cx, gauge_fix);
  if (free.size() > budget.max_free_edges)
    throw SizeRefusal("gauge enumeration over " + std::to_string(free.size()) + " edges exceeds the cap of " +
                      std::to_string(budget.max_free_edges));
  const std::size_t np = cx.num_plaquettes();
  std::vector<Real> up(np), down(np);
  Real weight = 1;
  for (std::size_t p = 0; p < np; ++p) {
    up[p] = exp(4 * params.beta_real(p));
    down[p] = 1 / up[p];
    weight *= exp(2 * params.beta_real(p));
  }
  std::vector<std::uint8_t> frustrated(np, 0);
  bool wodd = false;
  Real z = weight;
  const std::uint64_t total = std::uint64_t{1} << free.size();
  for (std::uint64_t i = 1; i < total; ++i) {
    const auto e = free[static_cast<std::size_t>(std::countr_zero(i))];
    for (const auto& inc : cx.edge_coboundary(e)) {
      frustrated[inc.index] ^= 1u;
      weight *= frustrated[inc.index] ? down[inc.index] : up[inc.index];
    }
    wodd ^= gamma.support().test(e);
    if (wodd) z -= weight; else z += weight;
  }
  return z;
}

/// Solution coset of delta omega = gamma over all positive plaquettes, refusing beyond the budget.
inline AffineSolutionSet ht_coset(const CellComplex& cx, const Loop& gamma, const OracleBudget& budget = {}) {
  gamma.check_inside(cx);
  auto sol = solve_affine(boundary_matrix(cx), gamma.support());
  if (sol.feasible && sol.kernel_dim() > budget.max_coset_dim)
    throw SizeRefusal("high-temperature coset of dimension " + std::to_string(sol.kernel_dim()) +
                      " exceeds the cap of " + std::to_string(budget.max_coset_dim));
  return sol;
}

/// sum over omega with delta omega = gamma of t^|supp omega|, as a polynomial in t = tanh(2 beta).
inline LaurentPoly ht_sum(const CellComplex& cx, const Loop& gamma, const OracleBudget& budget = {}) {
  const auto sol = ht_coset(cx, gamma, budget);
  std::vector<std::uint64_t> hist(cx.num_plaquettes() + 1, 0);
  sol.for_each([&](const BitVector& w) { ++hist[w.popcount()]; });
  LaurentPoly out;
  for (std::size_t k = 0; k < hist.size(); ++k) out.add_term(static_cast<int>(k), BigInt(hist[k]));
  return out;
}

/// sum_{n in C_gamma} w(n) via the parity split: each parity class omega contributes prod cosh or sinh(2 beta_p).
inline Real current_sum_factorized(const CellComplex& cx, const Loop& gamma, const CouplingParams& params,
                                   const OracleBudget& budget = {}) {
  params.check_size(cx.num_plaquettes());
  const auto sol = ht_coset(cx, gamma, budget);
  if (!sol.feasible) return 0;
  const std::size_t np = cx.num_plaquettes();
  Real base = 1;
  std::vector<Real> ratio(np);
  for (std::size_t p = 0; p < np; ++p) {
    const Real x = 2 * params.beta_real(p);
    base *= cosh(x);
    ratio[p] = tanh(x);
  }
  Real acc = 0;
  if (params.is_uniform()) {
    std::vector<std::uint64_t> hist(np + 1, 0);
    sol.for_each([&](const BitVector& w) { ++hist[w.popcount()]; });
    const Real t = np ? ratio[0] : Real(0);
    for (std::size_t k = 0; k <= np; ++k)
      if (hist[k]) acc += Real(hist[k]) * pow(t, static_cast<int>(k));
  } else {
    sol.for_each([&](const BitVector& w) {
      Real term = 1;
      for (auto p : w.indices()) term *= ratio[p];
      acc += term;
    });
  }
  return base * acc;
}

struct TruncatedSum {
  Real partial = 0;
  Real tail_bound = 0;
  std::size_t currents = 0;
};

/// Calls `visit(n, mass)` for every current with total mass <= K, in lexicographic order.
inline void for_each_current(std::size_t num_plaquettes, std::uint32_t K,
                             const std::function<void(const Current&, std::uint32_t)>& visit) {
  Current n(num_plaquettes);
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t p, std::uint32_t left) {
    if (p == num_plaquettes) {
      visit(n, K - left);
      return;
    }
    for (std::uint32_t k = 0; k <= left; ++k) {
      n.values[p] = k;
      rec(p + 1, left - k);
    }
    n.values[p] = 0;
  };
  rec(0, K);
}

/// Number of currents on `num_plaquettes` plaquettes with total mass <= K, i.e. C(K + P, P), saturating.
inline std::uint64_t count_currents(std::size_t num_plaquettes, std::uint32_t K) {
  long double c = 1;
  for (std::uint32_t i = 1; i <= K; ++i) c = c * static_cast<long double>(num_plaquettes + i) / i;
  return c > 1e18L ? ~std::uint64_t{0} : static_cast<std::uint64_t>(c + 0.5L);
}

/**
 * Direct sum of w(n) over n in C_gamma with total mass <= K.  The tail bound is
 * sum_{j > K} x^j / j! with x = sum_p 2 beta_p, the total weight of all currents of mass j.
 */
inline TruncatedSum current_sum_truncated(const CellComplex& cx, const Loop& gamma, const CouplingParams& params,
                                          std::uint32_t K, const OracleBudget& budget = {}) {
  gamma.check_inside(cx);
  params.check_size(cx.num_plaquettes());
  const std::size_t np = cx.num_plaquettes();
  if (count_currents(np, K) > budget.max_currents)
    throw SizeRefusal("truncated current enumeration with K = " + std::to_string(K) + " on " + std::to_string(np) +
                      " plaquettes exceeds the cap");
  std::vector<Real> two_beta(np);
  Real x = 0;
  for (std::size_t p = 0; p < np; ++p) x += two_beta[p] = 2 * params.beta_real(p);
  TruncatedSum out;
  for_each_current(np, K, [&](const Current& n, std::uint32_t) {
    if (!is_source(cx, n, gamma)) return;
    ++out.currents;
    Real w = 1;
    for (std::size_t p = 0; p < np; ++p)
      for (std::uint32_t i = 1; i <= n.values[p]; ++i) w *= two_beta[p] / i;
    out.partial += w;
  });
  Real head = 0, term = 1;
  for (std::uint32_t j = 0; j <= K; ++j) {
    head += term;
    term *= x / (j + 1);
  }
  out.tail_bound = exp(x) - head;
  if (out.tail_bound < 0) out.tail_bound = 0;
  return out;
}

inline nlohmann::ordered_json params_json(const CouplingParams& params) {
  if (params.is_uniform()) return {{"beta", params.beta()}};
  return {{"betas", std::vector<double>(params.betas().begin(), params.betas().end())}};
}

/// Checks Z[gamma] = 2^|C1| sum_{n in C_gamma} w(n) at one coupling.  `z_fixed`, when given, is the gauge-fixed
/// polynomial for gamma and saves re-enumeration across a beta grid.
inline CheckRecord verify_current_expansion(const CellComplex& cx, const Loop& gamma, const CouplingParams& params,
                                            const LaurentPoly* z_fixed = nullptr, const OracleBudget& budget = {}) {
  params.check_size(cx.num_plaquettes());
  Real lhs;
  if (params.is_uniform()) {
    const LaurentPoly z = z_fixed ? *z_fixed : exact_Z(cx, gamma, true, 1, budget);
    lhs = z.evaluate(exp(2 * params.beta_real(0))) * Real(gauge_orbit_size(cx));
  } else {
    lhs = exact_Z_weighted(cx, gamma, params, true, budget) * Real(gauge_orbit_size(cx));
  }
  const Real rhs = Real(pow2(cx.num_edges())) * current_sum_factorized(cx, gamma, params, budget);
  const Real diff = abs(lhs - rhs);
  const Real scale = std::max(Real(1), abs(lhs));
  CheckRecord r;
  r.check = "current-expansion";
  r.complex = describe(cx);
  r.gamma = describe(gamma);
  r.params = params_json(params);
  r.lhs = format_real(lhs, 25);
  r.rhs = format_real(rhs, 25);
  r.metric = to_double(diff / scale);
  r.pass = diff <= Real("1e-10") * scale;
  return r;
}

/// Menu of functionals F(n1 + n2) for the switching identity.
enum class SwitchFunctional { one, total_mass, occupied };

inline std::string to_string(SwitchFunctional f) {
  switch (f) {
    case SwitchFunctional::one: return "one";
    case SwitchFunctional::total_mass: return "total-mass";
    case SwitchFunctional::occupied: return "occupied";
  }
  return "?";
}

inline SwitchFunctional parse_switch_functional(const std::string& s) {
  for (auto f : {SwitchFunctional::one, SwitchFunctional::total_mass, SwitchFunctional::occupied})
    if (to_string(f) == s) return f;
  throw InvalidArgument("unknown functional '" + s + "' (expected one, total-mass or occupied)");
}

/**
 * Both sides of the switching identity restricted to pairs with |n1 + n2| <= K, in exact rationals:
 *
 *   sum_{n1 in C_g1, n2 in C_g2} F(n1+n2) w(n1) w(n2)
 *     = sum_{n1 in C_0, n2 in C_{g1+g2}} F(n1+n2) w(n1) w(n2) 1(exists q in C_g2, q <= n1+n2).
 *
 * The identity holds separately for each value of n1 + n2, so the truncation is exact, not an approximation.
 */
inline CheckRecord verify_switching(const CellComplex& cx, const Loop& g1, const Loop& g2, SwitchFunctional F,
                                    std::size_t p0, std::uint32_t K, const Rational& beta,
                                    const OracleBudget& budget = {}) {
  g1.check_inside(cx);
  g2.check_inside(cx);
  if (beta < 0) throw InvalidArgument("beta must be >= 0");
  const std::size_t np = cx.num_plaquettes();
  if (F == SwitchFunctional::occupied && p0 >= np) throw InvalidArgument("plaquette index out of range");
  if (count_currents(np, K) > budget.max_currents) throw SizeRefusal("switching enumeration exceeds the cap");

  struct Entry {
    Current n;
    std::uint32_t mass;
    BitVector parity;
    Rational w;
  };
  std::vector<Entry> all;
  for_each_current(np, K, [&](const Current& n, std::uint32_t mass) {
    all.push_back({n, mass, edge_parity(cx, n.parity()), current_weight_exact(n, beta)});
  });
  const BitVector zero(cx.num_edges());
  const BitVector s1 = g1.support(), s2 = g2.support(), s12 = g1.support() ^ g2.support();
  auto select = [&](const BitVector& src) {
    std::vector<const Entry*> out;
    for (const auto& e : all)
      if (e.parity == src) out.push_back(&e);
    return out;
  };
  auto functional = [&](const Current& n) -> Rational {
    switch (F) {
      case SwitchFunctional::one: return 1;
      case SwitchFunctional::total_mass: return Rational(static_cast<long long>(n.total_mass()));
      case SwitchFunctional::occupied: return n.values[p0] > 0 ? 1 : 0;
    }
    return 0;
  };
  Rational lhs = 0, rhs = 0;
  const auto a1 = select(s1), a2 = select(s2);
  for (const auto* x : a1)
    for (const auto* y : a2)
      if (x->mass + y->mass <= K) lhs += functional(x->n + y->n) * x->w * y->w;
  const auto b1 = select(zero), b2 = select(s12);
  for (const auto* x : b1)
    for (const auto* y : b2) {
      if (x->mass + y->mass > K) continue;
      const Current sum = x->n + y->n;
      if (has_subcurrent(cx, sum, g2)) rhs += functional(sum) * x->w * y->w;
    }
  CheckRecord r;
  r.check = "switching";
  r.complex = describe(cx);
  r.gamma = describe(g1) + "+" + describe(g2);
  r.params = {{"beta", to_string(beta)}, {"K", K}, {"F", to_string(F)}};
  if (F == SwitchFunctional::occupied) r.params["p0"] = p0;
  r.lhs = to_string(lhs);
  r.rhs = to_string(rhs);
  r.metric = static_cast<double>(abs(lhs - rhs));
  r.pass = lhs == rhs;
  r.note = "truncated at total mass K of n1 + n2; the identity holds termwise";
  return r;
}

/// Probability tables over configurations keyed by their bit-vector.
enum class MeasureKind { gauge, ht, cluster, current_parity, current_support };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::gauge: return "gauge";
    case MeasureKind::ht: return "ht";
    case MeasureKind::cluster: return "cluster";
    case MeasureKind::current_parity: return "current-parity";
    case MeasureKind::current_support: return "current-support";
  }
  return "?";
}

inline MeasureKind parse_measure_kind(const std::string& s) {
  for (auto k : {MeasureKind::gauge, MeasureKind::ht, MeasureKind::cluster, MeasureKind::current_parity,
                 MeasureKind::current_support})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown measure kind '" + s + "'");
}

struct MeasureTable {
  MeasureKind kind = MeasureKind::gauge;
  std::string gamma;
  std::map<BitVector, Real> prob;

  Real total() const {
    Real s = 0;
    for (const auto& [k, v] : prob) s += v;
    return s;
  }
  Real at(const BitVector& x) const {
    auto it = prob.find(x);
    return it == prob.end() ? Real(0) : it->second;
  }
  void add(const BitVector& x, const Real& w) {
    if (w == 0) return;
    prob[x] += w;
  }
  void normalize() {
    const Real z = total();
    if (z <= 0) throw Infeasible("measure has zero total mass");
    for (auto& [k, v] : prob) v /= z;
  }
  /// Probability of an event given as a predicate on configurations.
  Real probability(const std::function<bool(const BitVector&)>& event) const {
    Real s = 0;
    for (const auto& [k, v] : prob)
      if (event(k)) s += v;
    return s;
  }
};

inline Real total_variation(const MeasureTable& a, const MeasureTable& b) {
  Real s = 0;
  for (const auto& [k, v] : a.prob) s += abs(v - b.at(k));
  for (const auto& [k, v] : b.prob)
    if (!a.prob.count(k)) s += abs(v);
  return s / 2;
}

namespace detail {

inline void check_state_bits(std::size_t bits, const OracleBudget& budget, const char* what) {
  if (bits > budget.max_state_bits)
    throw SizeRefusal(std::string(what) + " state space of 2^" + std::to_string(bits) + " exceeds the cap of 2^" +
                      std::to_string(budget.max_state_bits));
}

inline std::vector<std::size_t> frustrated_plaquettes(const CellComplex& cx, const BitVector& sigma) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < cx.num_plaquettes(); ++p) {
    bool odd = false;
    for (const auto& inc : cx.plaquette_boundary(p)) odd ^= sigma.test(inc.index);
    if (odd) out.push_back(p);
  }
  return out;
}

/// Bitmask over plaquettes with rho(d sigma(p)) = +1.
inline std::uint64_t flat_mask(const CellComplex& cx, const BitVector& sigma) {
  std::uint64_t mask = (cx.num_plaquettes() == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << cx.num_plaquettes()) - 1);
  for (auto p : frustrated_plaquettes(cx, sigma)) mask &= ~(std::uint64_t{1} << p);
  return mask;
}

/// Visits every subset of `mask` (including the empty set and `mask` itself).
inline void for_each_subset(std::uint64_t mask, const std::function<void(std::uint64_t)>& visit) {
  std::uint64_t s = mask;
  while (true) {
    visit(s);
    if (s == 0) break;
    s = (s - 1) & mask;
  }
}

/// Membership of every plaquette subset (as a mask) in the event P_gamma.
inline std::vector<char> bounding_event_table(const CellComplex& cx, const Loop& gamma) {
  const std::size_t np = cx.num_plaquettes();
  std::vector<char> in(std::size_t{1} << np, 0);
  for (std::uint64_t s = 0; s < in.size(); ++s)
    in[s] = contains_bounding_surface(cx, TwoFormZ2(BitVector::from_word(np, s)), gamma);
  return in;
}

}  // namespace detail

/**
 * Exact normalized table of one of the measures:
 *   gauge            mu, weight exp(2 sum_p beta_p rho(d sigma(p))); takes no boundary loop
 *   ht               P^gamma on {omega : delta omega = gamma}, weight prod_{p in omega} tanh(2 beta_p)
 *   cluster          phi^gamma, weight 2^b1(P) prod p^|P| (1-p)^|P^c| on P_gamma, p = 1 - e^(-4 beta)
 *   current-parity   law of n mod 2 under the current measure, weight prod cosh or sinh(2 beta_p)
 *   current-support  law of supp n under the current measure
 */
inline MeasureTable exact_measure(const CellComplex& cx, MeasureKind kind, const Loop& gamma,
                                  const CouplingParams& params, const OracleBudget& budget = {}) {
  gamma.check_inside(cx);
  params.check_size(cx.num_plaquettes());
  const std::size_t np = cx.num_plaquettes();
  MeasureTable t;
  t.kind = kind;
  t.gamma = describe(gamma);
  switch (kind) {
    case MeasureKind::gauge: {
      if (!gamma.is_empty()) throw InvalidArgument("the gauge measure takes no boundary loop");
      detail::check_state_bits(cx.num_edges(), budget, "gauge");
      std::vector<Real> up(np), down(np);
      for (std::size_t p = 0; p < np; ++p) {
        up[p] = exp(2 * params.beta_real(p));
        down[p] = 1 / up[p];
      }
      const std::uint64_t total = std::uint64_t{1} << cx.num_edges();
      for (std::uint64_t s = 0; s < total; ++s) {
        const auto sigma = BitVector::from_word(cx.num_edges(), s);
        const auto fr = detail::frustrated_plaquettes(cx, sigma);
        Real w = 1;
        std::size_t j = 0;
        for (std::size_t p = 0; p < np; ++p) {
          if (j < fr.size() && fr[j] == p) {
            w *= down[p];
            ++j;
          } else {
            w *= up[p];
          }
        }
        t.add(sigma, w);
      }
      break;
    }
    case MeasureKind::ht:
    case MeasureKind::current_parity: {
      const auto sol = ht_coset(cx, gamma, budget);
      if (!sol.feasible) throw Infeasible("loop bounds no surface inside the complex");
      std::vector<Real> on(np), off(np);
      for (std::size_t p = 0; p < np; ++p) {
        const Real x = 2 * params.beta_real(p);
        if (kind == MeasureKind::ht) {
          on[p] = tanh(x);
          off[p] = 1;
        } else {
          on[p] = sinh(x);
          off[p] = cosh(x);
        }
      }
      sol.for_each([&](const BitVector& w) {
        Real weight = 1;
        for (std::size_t p = 0; p < np; ++p) weight *= w.test(p) ? on[p] : off[p];
        t.add(w, weight);
      });
      break;
    }
    case MeasureKind::cluster: {
      detail::check_state_bits(np, budget, "cluster");
      std::vector<Real> pin(np), pout(np);
      for (std::size_t p = 0; p < np; ++p) {
        pin[p] = params.prob_cluster_real(p);
        pout[p] = 1 - pin[p];
      }
      const auto in_event = detail::bounding_event_table(cx, gamma);
      for (std::uint64_t s = 0; s < in_event.size(); ++s) {
        if (!in_event[s]) continue;
        const auto P = BitVector::from_word(np, s);
        Real w = Real(pow2(betti_b1(cx, P)));
        for (std::size_t p = 0; p < np; ++p) w *= P.test(p) ? pin[p] : pout[p];
        t.add(P, w);
      }
      if (t.prob.empty()) throw Infeasible("loop bounds no surface inside the complex");
      break;
    }
    case MeasureKind::current_support: {
      detail::check_state_bits(np, budget, "current-support");
      const auto sol = ht_coset(cx, gamma, budget);
      if (!sol.feasible) throw Infeasible("loop bounds no surface inside the complex");
      std::vector<Real> odd(np), even_pos(np);
      for (std::size_t p = 0; p < np; ++p) {
        const Real x = 2 * params.beta_real(p);
        odd[p] = sinh(x);
        even_pos[p] = cosh(x) - 1;
      }
      const std::uint64_t all = (std::uint64_t{1} << np) - 1;
      sol.for_each([&](const BitVector& w) {
        const std::uint64_t wm = w.to_word();
        Real base = 1;
        for (auto p : w.indices()) base *= odd[p];
        detail::for_each_subset(all & ~wm, [&](std::uint64_t extra) {
          Real v = base;
          for (std::uint64_t r = extra; r; r &= r - 1) v *= even_pos[static_cast<std::size_t>(std::countr_zero(r))];
          t.add(BitVector::from_word(np, wm | extra), v);
        });
      });
      break;
    }
  }
  t.normalize();
  return t;
}

/// Pushforward of a plaquette-set table under P -> P u X with X ~ independent Bernoulli(q_p).
inline MeasureTable bernoulli_raise(const MeasureTable& src, std::span<const Real> q, MeasureKind out_kind) {
  const std::size_t np = q.size();
  if (np > 63) throw SizeRefusal("bernoulli pushforward needs at most 63 plaquettes");
  MeasureTable out;
  out.kind = out_kind;
  out.gamma = src.gamma;
  const std::uint64_t all = (std::uint64_t{1} << np) - 1;
  for (const auto& [x, px] : src.prob) {
    const std::uint64_t base = x.to_word();
    const std::uint64_t free = all & ~base;
    detail::for_each_subset(free, [&](std::uint64_t add) {
      Real v = px;
      for (std::uint64_t r = free; r; r &= r - 1) {
        const auto p = static_cast<std::size_t>(std::countr_zero(r));
        v *= ((add >> p) & 1u) ? q[p] : 1 - q[p];
      }
      out.add(BitVector::from_word(np, base | add), v);
    });
  }
  return out;
}

/// Exact pushforward of the current measure's parity, summing the weight series (2 beta)^k / k! per plaquette
/// separately over even and odd k until the terms vanish at working precision.
inline MeasureTable parity_pushforward(const CellComplex& cx, const Loop& gamma, const CouplingParams& params,
                                       const OracleBudget& budget = {}) {
  const std::size_t np = cx.num_plaquettes();
  std::vector<Real> even(np), odd(np);
  for (std::size_t p = 0; p < np; ++p) {
    const Real x = 2 * params.beta_real(p);
    Real term = 1, se = 0, so = 0;
    for (std::uint32_t k = 0; k < 100000; ++k) {
      (k % 2 ? so : se) += term;
      term *= x / (k + 1);
      if (k > x && term < Real("1e-55") * (se + so)) break;
    }
    even[p] = se;
    odd[p] = so;
  }
  const auto sol = ht_coset(cx, gamma, budget);
  if (!sol.feasible) throw Infeasible("loop bounds no surface inside the complex");
  MeasureTable out;
  out.kind = MeasureKind::ht;
  out.gamma = describe(gamma);
  sol.for_each([&](const BitVector& w) {
    Real v = 1;
    for (std::size_t p = 0; p < np; ++p) v *= w.test(p) ? odd[p] : even[p];
    out.add(w, v);
  });
  out.normalize();
  return out;
}

/// Pushforward of a plaquette-set table under P -> uniform P' inside P with boundary gamma.
inline MeasureTable subsurface_pushforward(const CellComplex& cx, const MeasureTable& src, const Loop& gamma) {
  MeasureTable out;
  out.kind = MeasureKind::ht;
  out.gamma = describe(gamma);
  for (const auto& [P, pP] : src.prob) {
    const TwoFormZ2 allowed(P);
    const auto sol = bounding_surfaces(cx, allowed, gamma);
    if (!sol.feasible) throw Infeasible("no bounding subsurface");
    const auto cols = allowed.bits.indices();
    const Real share = pP / Real(pow2(sol.kernel_dim()));
    sol.for_each([&](const BitVector& x) { out.add(expand_columns(cx, cols, x).bits, share); });
  }
  return out;
}

/// Pushforward of a gauge table under the gauge-to-cluster arrow: keep each flat plaquette with probability q_p.
inline MeasureTable gauge_to_cluster_pushforward(const CellComplex& cx, const MeasureTable& gauge,
                                                 const CouplingParams& params) {
  const std::size_t np = cx.num_plaquettes();
  if (np > 63) throw SizeRefusal("gauge-to-cluster pushforward needs at most 63 plaquettes");
  std::vector<Real> q(np);
  for (std::size_t p = 0; p < np; ++p) q[p] = params.prob_cluster_real(p);
  MeasureTable out;
  out.kind = MeasureKind::cluster;
  out.gamma = "{}";
  for (const auto& [sigma, ps] : gauge.prob) {
    const std::uint64_t flat = detail::flat_mask(cx, sigma);
    detail::for_each_subset(flat, [&](std::uint64_t keep) {
      Real v = ps;
      for (std::uint64_t r = flat; r; r &= r - 1) {
        const auto p = static_cast<std::size_t>(std::countr_zero(r));
        v *= ((keep >> p) & 1u) ? q[p] : 1 - q[p];
      }
      out.add(BitVector::from_word(np, keep), v);
    });
  }
  return out;
}

/// Pushforward of a cluster table under the cluster-to-gauge arrow: a uniform gauge field flat on P.
inline MeasureTable cluster_to_gauge_pushforward(const CellComplex& cx, const MeasureTable& cluster) {
  MeasureTable out;
  out.kind = MeasureKind::gauge;
  out.gamma = "{}";
  for (const auto& [P, pP] : cluster.prob) {
    const auto rows = P.indices();
    const auto sol = solve_affine(flatness_matrix(cx, rows), BitVector(rows.size()));
    const Real share = pP / Real(pow2(sol.kernel_dim()));
    sol.for_each([&](const BitVector& sigma) { out.add(sigma, share); });
  }
  return out;
}

/// Restriction of a cluster table to P_gamma, renormalized.
inline MeasureTable condition_on_bounding(const CellComplex& cx, const MeasureTable& cluster, const Loop& gamma) {
  MeasureTable out;
  out.kind = MeasureKind::cluster;
  out.gamma = describe(gamma);
  for (const auto& [P, pP] : cluster.prob)
    if (contains_bounding_surface(cx, TwoFormZ2(P), gamma)) out.add(P, pP);
  out.normalize();
  return out;
}

/**
 * Gauge marginal of the joint law
 *     J(sigma, P) ~ prod_{p in P} q_p 1(rho(d sigma(p)) = 1) prod_{p not in P} (1 - q_p)
 * conditioned on P in P_gamma, by direct enumeration of (sigma, P).  For gamma = 0 this is mu.
 */
inline MeasureTable joint_gauge_marginal(const CellComplex& cx, const Loop& gamma, const CouplingParams& params,
                                         const OracleBudget& budget = {}) {
  detail::check_state_bits(cx.num_edges(), budget, "gauge");
  detail::check_state_bits(cx.num_plaquettes(), budget, "cluster");
  const std::size_t np = cx.num_plaquettes();
  std::vector<Real> q(np);
  for (std::size_t p = 0; p < np; ++p) q[p] = params.prob_cluster_real(p);
  const auto in_event = detail::bounding_event_table(cx, gamma);
  MeasureTable out;
  out.kind = MeasureKind::gauge;
  out.gamma = describe(gamma);
  const std::uint64_t total = std::uint64_t{1} << cx.num_edges();
  for (std::uint64_t s = 0; s < total; ++s) {
    const auto sigma = BitVector::from_word(cx.num_edges(), s);
    const std::uint64_t flat = detail::flat_mask(cx, sigma);
    Real w = 0;
    detail::for_each_subset(flat, [&](std::uint64_t P) {
      if (!in_event[P]) return;
      Real v = 1;
      for (std::size_t p = 0; p < np; ++p) v *= ((P >> p) & 1u) ? q[p] : 1 - q[p];
      w += v;
    });
    out.add(sigma, w);
  }
  out.normalize();
  return out;
}

/**
 * Exact check of one coupling step: pushforward of the source table against the independently computed target,
 * passing when the total-variation distance is at most 1e-10.
 *
 *   parity            current measure          -> P^gamma
 *   hat-from-ht       P^gamma                  -> law of supp n           X1 ~ Bernoulli(1 - 1/cosh 2 beta)
 *   cluster-from-ht   P^gamma                  -> phi^gamma               X2 ~ Bernoulli(tanh 2 beta)
 *   cluster-from-hat  law of supp n            -> phi^gamma               X3 ~ Bernoulli(1 - e^(-2 beta))
 *   subsurface        phi^gamma                -> P^gamma
 *   gauge-to-cluster  mu, then conditioned on P_gamma -> phi^gamma       keep flat p w.p. 1 - e^(-4 beta)
 *   cluster-to-gauge  phi^gamma                -> joint gauge marginal on P_gamma (mu when gamma = 0)
 */
inline CheckRecord verify_coupling(const CellComplex& cx, CouplingStep step, const Loop& gamma,
                                   const CouplingParams& params, const OracleBudget& budget = {}) {
  gamma.check_inside(cx);
  params.check_size(cx.num_plaquettes());
  const std::size_t np = cx.num_plaquettes();
  detail::check_state_bits(np, budget, "plaquette");
  auto probs = [&](auto member) {
    std::vector<Real> q(np);
    for (std::size_t p = 0; p < np; ++p) q[p] = (params.*member)(p);
    return q;
  };
  MeasureTable push, target;
  std::string source_name, target_name;
  switch (step) {
    case CouplingStep::parity:
      push = parity_pushforward(cx, gamma, params, budget);
      target = exact_measure(cx, MeasureKind::ht, gamma, params, budget);
      source_name = "current";
      target_name = "ht";
      break;
    case CouplingStep::hat_from_ht:
      push = bernoulli_raise(exact_measure(cx, MeasureKind::ht, gamma, params, budget),
                             probs(&CouplingParams::prob_hat_real), MeasureKind::current_support);
      target = exact_measure(cx, MeasureKind::current_support, gamma, params, budget);
      source_name = "ht";
      target_name = "current-support";
      break;
    case CouplingStep::cluster_from_ht:
      push = bernoulli_raise(exact_measure(cx, MeasureKind::ht, gamma, params, budget),
                             probs(&CouplingParams::prob_ht_real), MeasureKind::cluster);
      target = exact_measure(cx, MeasureKind::cluster, gamma, params, budget);
      source_name = "ht";
      target_name = "cluster";
      break;
    case CouplingStep::cluster_from_hat:
      push = bernoulli_raise(exact_measure(cx, MeasureKind::current_support, gamma, params, budget),
                             probs(&CouplingParams::prob_boost_real), MeasureKind::cluster);
      target = exact_measure(cx, MeasureKind::cluster, gamma, params, budget);
      source_name = "current-support";
      target_name = "cluster";
      break;
    case CouplingStep::subsurface:
      push = subsurface_pushforward(cx, exact_measure(cx, MeasureKind::cluster, gamma, params, budget), gamma);
      target = exact_measure(cx, MeasureKind::ht, gamma, params, budget);
      source_name = "cluster";
      target_name = "ht";
      break;
    case CouplingStep::gauge_to_cluster:
      push = gauge_to_cluster_pushforward(cx, exact_measure(cx, MeasureKind::gauge, Loop::empty(cx), params, budget),
                                          params);
      if (!gamma.is_empty()) push = condition_on_bounding(cx, push, gamma);
      target = exact_measure(cx, MeasureKind::cluster, gamma, params, budget);
      source_name = gamma.is_empty() ? "gauge" : "gauge | P_gamma";
      target_name = "cluster";
      break;
    case CouplingStep::cluster_to_gauge:
      push = cluster_to_gauge_pushforward(cx, exact_measure(cx, MeasureKind::cluster, gamma, params, budget));
      target = gamma.is_empty() ? exact_measure(cx, MeasureKind::gauge, gamma, params, budget)
                                : joint_gauge_marginal(cx, gamma, params, budget);
      source_name = "cluster";
      target_name = gamma.is_empty() ? "gauge" : "joint gauge marginal";
      break;
    case CouplingStep::lift:
      throw InvalidArgument("the lift step has an infinite target space; it is checked by sampling");
  }
  const Real tv = total_variation(push, target);
  CheckRecord r;
  r.check = "coupling:" + to_string(step);
  r.complex = describe(cx);
  r.gamma = describe(gamma);
  r.params = params_json(params);
  r.lhs = "push(" + source_name + ")";
  r.rhs = target_name;
  r.metric = to_double(tv);
  r.pass = tv <= Real("1e-10");
  return r;
}

/// Exact E[W_gamma] as a ratio of integer polynomials: numerator and denominator in y = e^(2 beta) from the gauge
/// enumeration, or in t = tanh(2 beta) from the high-temperature coset when that is the smaller computation.
struct WilsonRatio {
  LaurentPoly num, den;
  bool in_t = false;

  Real variable(double beta) const {
    const Real b(beta);
    return in_t ? Real(tanh(2 * b)) : Real(exp(2 * b));
  }
  Wide variable_wide(double beta) const {
    const Wide b(beta);
    return in_t ? Wide(tanh(2 * b)) : Wide(exp(2 * b));
  }
  Real value(double beta) const {
    const Real x = variable(beta);
    return num.evaluate(x) / den.evaluate(x);
  }
};

inline WilsonRatio wilson_ratio(const CellComplex& cx, const Loop& g, const OracleBudget& budget = {},
                                bool prefer_gauge = false) {
  g.check_inside(cx);
  const auto ker = cx.num_plaquettes() - rank(boundary_matrix(cx));
  const auto free = enumerated_edges(cx, true).size();
  WilsonRatio r;
  const bool ht_ok = ker <= budget.max_coset_dim;
  const bool gauge_ok = free <= budget.max_free_edges;
  if (gauge_ok && (prefer_gauge || !ht_ok || free <= ker)) {
    r.num = exact_Z(cx, g, true, 1, budget);
    r.den = exact_Z(cx, Loop::empty(cx), true, 1, budget);
  } else if (ht_ok) {
    r.in_t = true;
    r.num = ht_sum(cx, g, budget);
    r.den = ht_sum(cx, Loop::empty(cx), budget);
    if (r.num.is_zero()) throw Infeasible("loop bounds no surface inside the complex");
  } else {
    throw SizeRefusal("no exact route fits the budget for this complex");
  }
  return r;
}

/// Exact E_beta[W_gamma] on the box.
inline Real oracle_wilson(const CellComplex& cx, const Loop& g, double beta, const OracleBudget& budget = {}) {
  return wilson_ratio(cx, g, budget).value(beta);
}

}  // namespace z2lgt
