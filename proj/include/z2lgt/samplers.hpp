#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/errors.hpp"
#include "z2lgt/forms.hpp"
#include "z2lgt/gf2.hpp"
#include "z2lgt/oracle.hpp"
#include "z2lgt/rng.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace z2lgt {

/// rho(d sigma(p)) for plaquette p with the bit on edge e forced to 0.
inline int holonomy_without(const CellComplex& cx, const BitVector& sigma, std::size_t p, std::size_t e) {
  bool odd = false;
  for (const auto& inc : cx.plaquette_boundary(p))
    if (inc.index != e) odd ^= sigma.test(inc.index);
  return odd ? -1 : 1;
}

/// Exact conditional probability that sigma(e) = 1 given all other edges:
/// 1 / (1 + exp(4 A)) with A = sum_{p in coboundary(e)} beta_p rho_p(sigma with sigma(e) = 0).
template <class Float>
Float heatbath_flip_probability(const CellComplex& cx, const BitVector& sigma, std::size_t e,
                                const CouplingParams& params) {
  Float a = 0;
  for (const auto& inc : cx.edge_coboundary(e))
    a += Float(params.beta(inc.index)) * holonomy_without(cx, sigma, inc.index, e);
  using std::exp;
  return Float(1) / (Float(1) + exp(4 * a));
}

/// One heat-bath sweep over the positive edges in index order.
inline void heatbath_sweep(const CellComplex& cx, GaugeField& sigma, const CouplingParams& params, Engine& rng) {
  params.check_size(cx.num_plaquettes());
  if (sigma.bits.size() != cx.num_edges()) throw InvalidArgument("gauge field has wrong length");
  for (std::size_t e = 0; e < cx.num_edges(); ++e) {
    const double q = heatbath_flip_probability<double>(cx, sigma.bits, e, params);
    sigma.bits.set(e, uniform01(rng) < q);
  }
}

inline TwoFormZ2 sample_bernoulli(const CellComplex& cx, double p, Engine& rng) {
  if (!(p >= 0 && p <= 1)) throw InvalidArgument("Bernoulli parameter must lie in [0, 1]");
  TwoFormZ2 out(cx.num_plaquettes());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (uniform01(rng) < p) out.bits.set(i);
  return out;
}

/// Gauge-to-cluster half step: keep each flat plaquette independently with probability 1 - e^(-4 beta_p).
inline TwoFormZ2 gauge_to_cluster(const CellComplex& cx, const GaugeField& sigma, const CouplingParams& params,
                                  Engine& rng) {
  params.check_size(cx.num_plaquettes());
  TwoFormZ2 out(cx.num_plaquettes());
  for (std::size_t p = 0; p < cx.num_plaquettes(); ++p) {
    const double u = uniform01(rng);
    if (holonomy(cx, sigma, p) == 1 && u < params.prob_cluster(p)) out.bits.set(p);
  }
  return out;
}

/// Cluster-to-gauge half step: a uniform gauge field flat on every plaquette of P.
inline GaugeField cluster_to_gauge(const CellComplex& cx, const TwoFormZ2& P, Engine& rng) {
  if (P.size() != cx.num_plaquettes()) throw InvalidArgument("plaquette set has wrong length");
  const auto rows = P.bits.indices();
  const auto sol = solve_affine(flatness_matrix(cx, rows), BitVector(rows.size()));
  if (!sol.feasible) throw Error("flatness system unexpectedly infeasible");
  return GaugeField(uniform_solution(sol, rng));
}

/// One alternation gauge -> cluster -> gauge; both half steps are reported through the references.
inline void sw_update(const CellComplex& cx, GaugeField& sigma, TwoFormZ2& P, const CouplingParams& params,
                      Engine& rng) {
  P = gauge_to_cluster(cx, sigma, params, rng);
  sigma = cluster_to_gauge(cx, P, rng);
}

/// Poisson(lambda) conditioned on its parity.  Rejection from the unconditioned law, or inverse CDF on the
/// parity-restricted pmf when lambda < 0.05 and odd values are rare.
inline std::uint32_t sample_conditioned_poisson(double lambda, bool odd, Engine& rng) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidArgument("Poisson mean must be finite and >= 0");
  if (lambda == 0) {
    if (odd) throw Infeasible("odd value impossible with zero Poisson mean");
    return 0;
  }
  if (lambda < 0.05) {
    const double norm = odd ? std::sinh(lambda) : std::cosh(lambda);
    double u = uniform01(rng) * norm;
    std::uint32_t k = odd ? 1 : 0;
    double term = odd ? lambda : 1.0;
    while (true) {
      if (u < term || term < 1e-300) return k;
      u -= term;
      term *= lambda * lambda / ((k + 1.0) * (k + 2.0));
      k += 2;
    }
  }
  std::poisson_distribution<std::uint32_t> pois(lambda);
  while (true) {
    const auto k = pois(rng);
    if (static_cast<bool>(k & 1u) == odd) return k;
  }
}

/// Parity lift: n(p) ~ Poisson(2 beta_p) conditioned on n(p) = eta(p) mod 2, independently per plaquette.
inline Current lift(const TwoFormZ2& eta, const CouplingParams& params, Engine& rng) {
  params.check_size(eta.size());
  Current n(eta.size());
  for (std::size_t p = 0; p < eta.size(); ++p)
    n.values[p] = sample_conditioned_poisson(2.0 * params.beta(p), eta.bits.test(p), rng);
  return n;
}

namespace detail {

inline TwoFormZ2 raise(const TwoFormZ2& base, const CouplingParams& params, double (CouplingParams::*prob)(std::size_t) const,
                       Engine& rng) {
  params.check_size(base.size());
  TwoFormZ2 out = base;
  for (std::size_t p = 0; p < base.size(); ++p) {
    const double u = uniform01(rng);
    if (u < (params.*prob)(p)) out.bits.set(p);
  }
  return out;
}

}  // namespace detail

/// max(eta, X1), X1 ~ Bernoulli(1 - 1/cosh 2 beta).
inline TwoFormZ2 hat_from_ht(const TwoFormZ2& eta, const CouplingParams& params, Engine& rng) {
  return detail::raise(eta, params, &CouplingParams::prob_hat, rng);
}

/// supp max(eta, X2), X2 ~ Bernoulli(tanh 2 beta).
inline TwoFormZ2 cluster_from_ht(const TwoFormZ2& eta, const CouplingParams& params, Engine& rng) {
  return detail::raise(eta, params, &CouplingParams::prob_ht, rng);
}

/// supp max(n_hat, X3), X3 ~ Bernoulli(1 - e^(-2 beta)).
inline TwoFormZ2 cluster_from_hat(const TwoFormZ2& hat, const CouplingParams& params, Engine& rng) {
  return detail::raise(hat, params, &CouplingParams::prob_boost, rng);
}

/// Uniform P' inside P with mod-2 boundary gamma.
inline TwoFormZ2 subsurface(const CellComplex& cx, const TwoFormZ2& P, const Loop& gamma, Engine& rng) {
  const auto sol = bounding_surfaces(cx, P, gamma);
  if (!sol.feasible) throw Infeasible("no bounding subsurface");
  const auto cols = P.bits.indices();
  return expand_columns(cx, cols, uniform_solution(sol, rng));
}

using Configuration = std::variant<GaugeField, TwoFormZ2, Current>;

/// Applies one coupling step to a configuration of the matching kind.
inline Configuration apply_coupling(const CellComplex& cx, CouplingStep step, const Configuration& input,
                                    const Loop& gamma, const CouplingParams& params, Engine& rng) {
  auto need_form = [&]() -> const TwoFormZ2& {
    if (auto* f = std::get_if<TwoFormZ2>(&input)) return *f;
    throw InvalidArgument("coupling step " + to_string(step) + " expects a plaquette configuration");
  };
  switch (step) {
    case CouplingStep::parity:
      if (auto* n = std::get_if<Current>(&input)) return n->parity();
      throw InvalidArgument("coupling step parity expects a current");
    case CouplingStep::lift: return lift(need_form(), params, rng);
    case CouplingStep::hat_from_ht: return hat_from_ht(need_form(), params, rng);
    case CouplingStep::cluster_from_ht: return cluster_from_ht(need_form(), params, rng);
    case CouplingStep::cluster_from_hat: return cluster_from_hat(need_form(), params, rng);
    case CouplingStep::subsurface: return subsurface(cx, need_form(), gamma, rng);
    case CouplingStep::gauge_to_cluster:
      if (auto* s = std::get_if<GaugeField>(&input)) return gauge_to_cluster(cx, *s, params, rng);
      throw InvalidArgument("coupling step gauge-to-cluster expects a gauge field");
    case CouplingStep::cluster_to_gauge: return cluster_to_gauge(cx, need_form(), rng);
  }
  throw InvalidArgument("unknown coupling step");
}

enum class ChainKind { gauge, cluster };

inline std::string to_string(ChainKind k) { return k == ChainKind::gauge ? "gauge" : "cluster"; }

inline ChainKind parse_chain_kind(const std::string& s) {
  if (s == "gauge") return ChainKind::gauge;
  if (s == "cluster") return ChainKind::cluster;
  throw InvalidArgument("unknown chain kind '" + s + "' (expected gauge or cluster)");
}

/// A running chain: heat-bath sweeps for gauge chains, gauge/cluster alternations for cluster chains.
/// Cluster chains keep both halves; observables may read either.
struct ChainState {
  ChainKind kind = ChainKind::gauge;
  GaugeField sigma;
  TwoFormZ2 plaquettes;
  std::uint64_t step = 0;
  Engine rng;

  ChainState(const CellComplex& cx, ChainKind k, const RngSpec& spec)
      : kind(k), sigma(GaugeField::zero(cx)), plaquettes(TwoFormZ2::empty(cx)), rng(make_engine(spec)) {}

  void advance(const CellComplex& cx, const CouplingParams& params) {
    if (kind == ChainKind::gauge) heatbath_sweep(cx, sigma, params, rng);
    else sw_update(cx, sigma, plaquettes, params, rng);
    ++step;
  }
};

struct ChainSpec {
  ChainKind kind = ChainKind::gauge;
  CouplingParams params;
  std::uint64_t sweeps = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thinning = 1;
  RngSpec rng;
};

inline void validate(const ChainSpec& spec, const CellComplex& cx) {
  spec.params.check_size(cx.num_plaquettes());
  if (spec.sweeps == 0) throw InvalidArgument("sweeps must be positive");
  if (spec.burn_in > spec.sweeps) throw InvalidArgument("burn-in exceeds the number of sweeps");
  if (spec.thinning == 0) throw InvalidArgument("thinning must be positive");
}

struct Observable {
  std::string name;
  std::function<double(const ChainState&)> eval;
};

/// Observable values recorded after burn-in every `thinning` sweeps; values[i][j] is observable i at record j.
struct TimeSeries {
  std::vector<std::string> names;
  std::vector<std::uint64_t> sweeps;
  std::vector<std::vector<double>> values;
};

inline TimeSeries run_chain(const CellComplex& cx, const ChainSpec& spec, const std::vector<Observable>& observables) {
  validate(spec, cx);
  ChainState state(cx, spec.kind, spec.rng);
  TimeSeries ts;
  for (const auto& o : observables) ts.names.push_back(o.name);
  ts.values.resize(observables.size());
  for (std::uint64_t s = 1; s <= spec.sweeps; ++s) {
    state.advance(cx, spec.params);
    if (s <= spec.burn_in || (s - spec.burn_in) % spec.thinning != 0) continue;
    ts.sweeps.push_back(s);
    for (std::size_t i = 0; i < observables.size(); ++i) ts.values[i].push_back(observables[i].eval(state));
  }
  return ts;
}

inline Observable wilson_observable(const CellComplex& cx, const Loop& gamma, std::string name = "wilson") {
  gamma.check_inside(cx);
  return {std::move(name), [&cx, gamma](const ChainState& s) { return static_cast<double>(wilson(cx, s.sigma, gamma)); }};
}

/// 1(P in P_gamma) on the cluster half of a cluster chain.
inline Observable bounding_observable(const CellComplex& cx, const Loop& gamma, std::string name = "bounding") {
  gamma.check_inside(cx);
  return {std::move(name), [&cx, gamma](const ChainState& s) {
            if (s.kind != ChainKind::cluster) throw InvalidArgument("bounding events need a cluster chain");
            return contains_bounding_surface(cx, s.plaquettes, gamma) ? 1.0 : 0.0;
          }};
}

/// Exact image of a gauge table under one heat-bath sweep.
inline MeasureTable exact_heatbath_sweep(const CellComplex& cx, const MeasureTable& gauge,
                                         const CouplingParams& params) {
  MeasureTable cur = gauge;
  for (std::size_t e = 0; e < cx.num_edges(); ++e) {
    MeasureTable next;
    next.kind = cur.kind;
    next.gamma = cur.gamma;
    for (const auto& [sigma, ps] : cur.prob) {
      const Real q = heatbath_flip_probability<Real>(cx, sigma, e, params);
      BitVector s0 = sigma, s1 = sigma;
      s0.set(e, false);
      s1.set(e, true);
      next.add(s0, ps * (1 - q));
      next.add(s1, ps * q);
    }
    cur = std::move(next);
  }
  return cur;
}

/// Exact image of a gauge table under one gauge -> cluster -> gauge alternation.
inline MeasureTable exact_sw_step(const CellComplex& cx, const MeasureTable& gauge, const CouplingParams& params) {
  return cluster_to_gauge_pushforward(cx, gauge_to_cluster_pushforward(cx, gauge, params));
}

/// Exact image of a cluster table under one cluster -> gauge -> cluster alternation.
inline MeasureTable exact_sw_cluster_step(const CellComplex& cx, const MeasureTable& cluster,
                                          const CouplingParams& params) {
  return gauge_to_cluster_pushforward(cx, cluster_to_gauge_pushforward(cx, cluster), params);
}

}  // namespace z2lgt
