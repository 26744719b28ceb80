#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/errors.hpp"
#include "z2lgt/forms.hpp"
#include "z2lgt/laurent.hpp"
#include "z2lgt/oracle.hpp"
#include "z2lgt/parallel.hpp"
#include "z2lgt/report.hpp"
#include "z2lgt/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace z2lgt {

struct Estimate {
  double value = 0;
  double se = 0;
  std::size_t batches = 0;
  std::size_t samples = 0;
  std::string route;
};

inline void to_json(nlohmann::ordered_json& j, const Estimate& e) {
  j = nlohmann::ordered_json{
      {"route", e.route}, {"value", e.value}, {"se", e.se}, {"batches", e.batches}, {"samples", e.samples}};
}

inline constexpr std::size_t kDefaultBatches = 32;

/// Batch-means estimate pooled over independent series: each series is cut into `batches` equal batches
/// (a remainder at the end is dropped) and the standard error is that of the pooled batch means.
inline Estimate batch_means(const std::vector<std::vector<double>>& series, std::size_t batches = kDefaultBatches,
                            std::string route = {}) {
  std::vector<double> means;
  std::size_t used = 0;
  for (const auto& x : series) {
    if (x.empty()) continue;
    const std::size_t nb = std::min(batches, x.size());
    const std::size_t len = x.size() / nb;
    for (std::size_t b = 0; b < nb; ++b) {
      double s = 0;
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
      means.push_back(s / static_cast<double>(len));
      used += len;
    }
  }
  if (means.empty()) throw InvalidArgument("no samples to estimate from");
  Estimate e;
  e.route = std::move(route);
  e.batches = means.size();
  e.samples = used;
  double mean = 0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  e.value = mean;
  if (means.size() > 1) {
    double ss = 0;
    for (double m : means) ss += (m - mean) * (m - mean);
    e.se = std::sqrt(ss / static_cast<double>(means.size() - 1) / static_cast<double>(means.size()));
  }
  return e;
}

inline Estimate batch_means(const std::vector<double>& series, std::size_t batches = kDefaultBatches,
                            std::string route = {}) {
  return batch_means(std::vector<std::vector<double>>{series}, batches, std::move(route));
}

enum class WilsonRoute { direct, cluster, current_squared };

inline std::string to_string(WilsonRoute r) {
  switch (r) {
    case WilsonRoute::direct: return "direct";
    case WilsonRoute::cluster: return "cluster";
    case WilsonRoute::current_squared: return "current-squared";
  }
  return "?";
}

inline WilsonRoute parse_wilson_route(const std::string& s) {
  for (auto r : {WilsonRoute::direct, WilsonRoute::cluster, WilsonRoute::current_squared})
    if (to_string(r) == s) return r;
  throw InvalidArgument("unknown route '" + s + "' (expected direct, cluster or current-squared)");
}

/// Stream id of chain `i` of a run whose base stream is `base`; the current-squared route uses two per chain.
inline RngSpec chain_stream(const RngSpec& base, std::uint64_t i) { return {base.seed, base.stream + i}; }

/// Per-record indicators 1(exists q in C_gamma, q <= n1 + n2) for two independent sourceless currents, each
/// produced by cluster chain -> uniform sourceless subsurface -> parity lift.
inline std::vector<double> current_squared_series(const CellComplex& cx, const Loop& gamma, const ChainSpec& spec,
                                                  const RngSpec& a, const RngSpec& b) {
  ChainState c1(cx, ChainKind::cluster, a), c2(cx, ChainKind::cluster, b);
  const Loop none = Loop::empty(cx);
  std::vector<double> out;
  for (std::uint64_t s = 1; s <= spec.sweeps; ++s) {
    c1.advance(cx, spec.params);
    c2.advance(cx, spec.params);
    if (s <= spec.burn_in || (s - spec.burn_in) % spec.thinning != 0) continue;
    const Current n1 = lift(subsurface(cx, c1.plaquettes, none, c1.rng), spec.params, c1.rng);
    const Current n2 = lift(subsurface(cx, c2.plaquettes, none, c2.rng), spec.params, c2.rng);
    out.push_back(has_subcurrent(cx, n1 + n2, gamma) ? 1.0 : 0.0);
  }
  return out;
}

/**
 * Per-chain records behind a Wilson-loop estimate, from `chains` independent chains (streams base, base+1, ...):
 *   direct           W_gamma over heat-bath gauge chains
 *   cluster          1(P in P_gamma) over gauge/cluster alternation chains
 *   current-squared  the subcurrent indicator for pairs of sourceless currents; its mean is E[W_gamma]^2
 */
inline std::vector<std::vector<double>> wilson_series(const CellComplex& cx, const Loop& gamma, WilsonRoute route,
                                                      const ChainSpec& base, std::size_t chains = 1,
                                                      unsigned threads = 1) {
  gamma.check_inside(cx);
  validate(base, cx);
  if (chains == 0) throw InvalidArgument("need at least one chain");
  std::vector<std::vector<double>> series(chains);
  parallel_for(chains, threads, [&](std::size_t i) {
    ChainSpec spec = base;
    switch (route) {
      case WilsonRoute::direct:
        spec.kind = ChainKind::gauge;
        spec.rng = chain_stream(base.rng, i);
        series[i] = run_chain(cx, spec, {wilson_observable(cx, gamma)}).values[0];
        break;
      case WilsonRoute::cluster:
        spec.kind = ChainKind::cluster;
        spec.rng = chain_stream(base.rng, i);
        series[i] = run_chain(cx, spec, {bounding_observable(cx, gamma)}).values[0];
        break;
      case WilsonRoute::current_squared:
        series[i] = current_squared_series(cx, gamma, spec, chain_stream(base.rng, 2 * i),
                                           chain_stream(base.rng, 2 * i + 1));
        break;
    }
  });
  return series;
}

/// Batch-means estimate over wilson_series.
inline Estimate estimate_wilson(const CellComplex& cx, const Loop& gamma, WilsonRoute route, const ChainSpec& base,
                                std::size_t chains = 1, unsigned threads = 1,
                                std::size_t batches = kDefaultBatches) {
  return batch_means(wilson_series(cx, gamma, route, base, chains, threads), batches, to_string(route));
}

/// l1 distance between edge midpoints, rounded down.
inline std::size_t edge_distance(const CellComplex& cx, std::size_t e, std::size_t f) {
  const auto a = cx.edge_midpoint2(e), b = cx.edge_midpoint2(f);
  long d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::labs(static_cast<long>(a[i]) - b[i]);
  return static_cast<std::size_t>(d / 2);
}

/// dist(gamma, gamma') := min over e in supp gamma, e' in supp gamma' of the l1 distance of edge midpoints,
/// rounded down.
inline std::size_t loop_distance(const CellComplex& cx, const Loop& g1, const Loop& g2) {
  g1.check_inside(cx);
  g2.check_inside(cx);
  if (g1.is_empty() || g2.is_empty()) throw InvalidArgument("distance to an empty loop is undefined");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (auto e : g1.support().indices())
    for (auto f : g2.support().indices()) best = std::min(best, edge_distance(cx, e, f));
  return best;
}

/// Smallest l1 distance, rounded down, from an edge midpoint of gamma to a face of the box.
inline std::size_t boundary_distance(const CellComplex& cx, const Loop& g) {
  g.check_inside(cx);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (auto e : g.support().indices()) {
    const auto mid = cx.edge_midpoint2(e);
    for (int i = 0; i < cx.dimension(); ++i) {
      const int lo = mid[i], hi = 2 * (cx.extents()[i] - 1) - mid[i];
      best = std::min<std::size_t>(best, static_cast<std::size_t>(std::min(lo, hi) / 2));
    }
  }
  return best;
}

struct CovarianceEstimate {
  Estimate cov;
  std::size_t distance = 0;
};

/// Cov(W_gamma, W_gamma') from heat-bath chains.  With global means m, m' the per-sweep quantity
/// (W - m)(W' - m') is batch-averaged.
inline CovarianceEstimate estimate_covariance(const CellComplex& cx, const Loop& g1, const Loop& g2,
                                              const ChainSpec& base, std::size_t chains = 1, unsigned threads = 1,
                                              std::size_t batches = kDefaultBatches) {
  validate(base, cx);
  if ((g1.support() & g2.support()).any()) throw InvalidArgument("loops must have disjoint supports");
  CovarianceEstimate out;
  out.distance = loop_distance(cx, g1, g2);
  std::vector<TimeSeries> runs(chains);
  parallel_for(chains, threads, [&](std::size_t i) {
    ChainSpec spec = base;
    spec.kind = ChainKind::gauge;
    spec.rng = chain_stream(base.rng, i);
    runs[i] = run_chain(cx, spec, {wilson_observable(cx, g1, "w1"), wilson_observable(cx, g2, "w2")});
  });
  double m1 = 0, m2 = 0;
  std::size_t n = 0;
  for (const auto& r : runs)
    for (std::size_t j = 0; j < r.sweeps.size(); ++j) {
      m1 += r.values[0][j];
      m2 += r.values[1][j];
      ++n;
    }
  if (n == 0) throw InvalidArgument("no samples to estimate from");
  m1 /= static_cast<double>(n);
  m2 /= static_cast<double>(n);
  std::vector<std::vector<double>> prod(chains);
  for (std::size_t i = 0; i < chains; ++i)
    for (std::size_t j = 0; j < runs[i].sweeps.size(); ++j)
      prod[i].push_back((runs[i].values[0][j] - m1) * (runs[i].values[1][j] - m2));
  out.cov = batch_means(prod, batches, "covariance");
  return out;
}

/// Least-squares slope of log|cov| against distance, reported as a decay rate c (|cov| ~ C e^(-c d)).
/// Points with nonpositive |cov| are skipped; returns nothing with fewer than two usable points.
inline std::optional<double> fit_decay_rate(const std::vector<std::pair<double, double>>& distance_cov) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [d, c] : distance_cov)
    if (std::abs(c) > 0) pts.emplace_back(d, std::log(std::abs(c)));
  if (pts.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(pts.size());
  const double den = k * sxx - sx * sx;
  if (den == 0) return std::nullopt;
  return -(k * sxy - sx * sy) / den;
}

/// R x T rectangle on axes (a, b), centred in the box (rounding toward the origin) and at the middle of the
/// other axes.
inline Loop centered_rectangle(const CellComplex& cx, int R, int T, int a = 0, int b = 1) {
  if (R < 1 || T < 1 || R > cx.extents()[a] - 1 || T > cx.extents()[b] - 1)
    throw InvalidArgument("rectangle " + std::to_string(R) + "x" + std::to_string(T) + " does not fit in the box");
  std::vector<int> corner(cx.dimension());
  for (int i = 0; i < cx.dimension(); ++i) corner[i] = (cx.extents()[i] - 1) / 2;
  corner[a] = (cx.extents()[a] - 1 - R) / 2;
  corner[b] = (cx.extents()[b] - 1 - T) / 2;
  return Loop::rectangle(cx, corner, a, b, R, T);
}

struct PotentialPoint {
  int T = 0;
  Estimate wilson;
  std::optional<double> value;  // -log(estimate) / T, absent when the estimate is not positive
  std::optional<double> se;
};

struct PotentialFit {
  int R = 0;
  std::vector<PotentialPoint> points;
  std::optional<double> V;  // from the largest T with a usable estimate
  std::optional<double> slope;
  std::optional<double> residual;  // RMS residual of the linear fit of -log W against T
  bool subadditive = true;
  std::vector<std::string> notes;
};

namespace detail {

inline void fill_fit(PotentialFit& fit) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : fit.points)
    if (p.value) pts.emplace_back(p.T, *p.value * p.T);
  for (auto it = fit.points.rbegin(); it != fit.points.rend(); ++it)
    if (it->value) {
      fit.V = it->value;
      break;
    }
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = static_cast<double>(pts.size());
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / k;
    double rss = 0;
    for (const auto& [x, y] : pts) rss += (y - slope * x - icpt) * (y - slope * x - icpt);
    fit.slope = slope;
    fit.residual = std::sqrt(rss / k);
  } else if (pts.size() == 1) {
    fit.slope = pts[0].second / pts[0].first;
    fit.residual = 0.0;
  }
}

inline void check_T_list(const std::vector<int>& Ts) {
  if (Ts.empty()) throw InvalidArgument("T list is empty");
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (Ts[i] < 1) throw InvalidArgument("every T must be >= 1");
    if (i && Ts[i] <= Ts[i - 1]) throw InvalidArgument("T list must be strictly increasing");
  }
}

}  // namespace detail

/// Quark-potential estimates -log<W_{R,T}>/T from heat-bath chains, with the subadditivity diagnostic
/// -log W(T1+T2) <= -log W(T1) - log W(T2) checked within 3 combined standard errors.
inline PotentialFit estimate_potential(const CellComplex& cx, int R, const std::vector<int>& Ts, const ChainSpec& spec,
                                       std::size_t chains = 1, unsigned threads = 1,
                                       std::size_t batches = kDefaultBatches) {
  detail::check_T_list(Ts);
  PotentialFit fit;
  fit.R = R;
  std::vector<Loop> loops;
  for (int T : Ts) loops.push_back(centered_rectangle(cx, R, T));
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    PotentialPoint pt;
    pt.T = Ts[i];
    ChainSpec s = spec;
    s.rng = chain_stream(spec.rng, i * chains);
    pt.wilson = estimate_wilson(cx, loops[i], WilsonRoute::direct, s, chains, threads, batches);
    if (pt.wilson.value > 0) {
      pt.value = -std::log(pt.wilson.value) / Ts[i];
      pt.se = pt.wilson.se / pt.wilson.value / Ts[i];
    } else {
      fit.notes.push_back("insufficient statistics at T=" + std::to_string(Ts[i]));
    }
    fit.points.push_back(std::move(pt));
  }
  detail::fill_fit(fit);
  auto find = [&](int T) -> const PotentialPoint* {
    for (const auto& p : fit.points)
      if (p.T == T) return &p;
    return nullptr;
  };
  for (const auto& a : fit.points)
    for (const auto& b : fit.points) {
      if (a.T > b.T) continue;
      const auto* c = find(a.T + b.T);
      if (!c || !a.value || !b.value || !c->value) continue;
      const double lhs = *c->value * c->T, rhs = *a.value * a.T + *b.value * b.T;
      const double se = std::sqrt(std::pow(*a.se * a.T, 2) + std::pow(*b.se * b.T, 2) + std::pow(*c->se * c->T, 2));
      if (lhs > rhs + 3 * se) fit.subadditive = false;
    }
  return fit;
}

/// -log E[W_{R,T}] exactly for each T, with the same placement as estimate_potential.
inline std::vector<Real> potential_oracle(const CellComplex& cx, int R, const std::vector<int>& Ts, double beta,
                                          const OracleBudget& budget = {}) {
  detail::check_T_list(Ts);
  std::vector<Real> out;
  for (int T : Ts) out.push_back(-log(oracle_wilson(cx, centered_rectangle(cx, R, T), beta, budget)));
  return out;
}

enum class CheckMode { oracle, mc };

inline std::string to_string(CheckMode m) { return m == CheckMode::oracle ? "oracle" : "mc"; }

inline CheckMode parse_check_mode(const std::string& s) {
  if (s == "oracle") return CheckMode::oracle;
  if (s == "mc") return CheckMode::mc;
  throw InvalidArgument("unknown mode '" + s + "' (expected oracle or mc)");
}

/// (4(m-1) beta)^area / (1 - 4(m-1) beta); requires 4(m-1) beta < 1.
inline Real area_law_bound(int m, double beta, std::size_t area_value) {
  const Real r = Real(4 * (m - 1)) * Real(beta);
  if (!(beta >= 0) || r >= 1)
    throw HypothesisViolated("area-law bound needs beta < 1/(4(m-1)) = " + std::to_string(1.0 / (4.0 * (m - 1))));
  return pow(r, static_cast<int>(area_value)) / (1 - r);
}

/**
 * E[W_gamma] <= (4(m-1) beta)^area(gamma) / (1 - 4(m-1) beta).  Oracle mode compares exactly (certified sign of
 * bound * den - num); MC mode accepts when the direct estimate minus 3 SE lies below the bound.  The distance of
 * gamma to the box boundary is reported against area(gamma).
 */
inline CheckRecord check_area_law(const CellComplex& cx, const Loop& gamma, double beta, CheckMode mode,
                                  const ChainSpec* chain = nullptr, std::size_t chains = 1, unsigned threads = 1,
                                  std::optional<std::size_t> known_area = std::nullopt,
                                  const OracleBudget& budget = {}) {
  const int m = cx.dimension();
  const std::size_t a = known_area ? *known_area : area(cx, gamma, budget.max_coset_dim);
  const Real bound = area_law_bound(m, beta, a);
  const std::size_t dist = boundary_distance(cx, gamma);
  CheckRecord r;
  r.check = "area-law:" + to_string(mode);
  r.complex = describe(cx);
  r.gamma = describe(gamma);
  r.params = {{"beta", beta}, {"area", a}, {"boundary_distance", dist}, {"distance_hypothesis", dist >= a}};
  r.rhs = format_real(bound, 17);
  if (mode == CheckMode::oracle) {
    const auto ratio = wilson_ratio(cx, gamma, budget);
    const Wide x = ratio.variable_wide(beta);
    const Wide b = Wide(bound);
    const Wide num = ratio.num.evaluate(x), den = ratio.den.evaluate(x);
    const Wide diff = b * den - num;
    const Wide slack = (b * ratio.den.evaluate_abs(x) + ratio.num.evaluate_abs(x)) * Wide("1e-80");
    const Wide value = num / den;
    r.lhs = format_real(value, 17);
    r.metric = static_cast<double>(Wide(b - value));
    r.pass = diff > slack;
    if (!r.pass && abs(diff) <= slack) r.note = "comparison not certified at working precision";
  } else {
    if (!chain) throw InvalidArgument("MC mode needs chain settings");
    ChainSpec spec = *chain;
    if (!spec.params.is_uniform() || spec.params.beta() != beta)
      spec.params = CouplingParams::uniform(beta, cx.num_plaquettes());
    const auto est = estimate_wilson(cx, gamma, WilsonRoute::direct, spec, chains, threads);
    r.lhs = format_real(Real(est.value), 17);
    r.params["se"] = est.se;
    r.metric = to_double(bound) - est.value;
    r.pass = est.value - 3 * est.se <= to_double(bound);
  }
  if (dist < a) r.note += (r.note.empty() ? "" : "; ") + std::string("box smaller than the distance hypothesis");
  return r;
}

/// Exact Griffiths checks at one beta: (i) E[W1 W2] >= E[W1] E[W2] and (ii) d/dbeta E[W_g] >= 0 for g = g1, g2.
/// Signs of integer polynomials are certified; an identically zero difference counts as equality.
inline std::vector<CheckRecord> check_griffiths_oracle(const CellComplex& cx, const Loop& g1, const Loop& g2,
                                                       const std::vector<double>& betas,
                                                       const OracleBudget& budget = {}) {
  const Loop g12 = g1 + g2;
  g1.check_inside(cx);
  g2.check_inside(cx);
  // Gauge enumeration in y = e^(2 beta) when it fits, else the high-temperature sum in t = tanh(2 beta); both
  // variables increase with beta, so the sign of the derivative is the same in either.
  const bool in_t = enumerated_edges(cx, true).size() > budget.max_free_edges;
  auto poly = [&](const Loop& g) { return in_t ? ht_sum(cx, g, budget) : exact_Z(cx, g, true, 1, budget); };
  const LaurentPoly z0 = poly(Loop::empty(cx)), z1 = poly(g1), z2 = poly(g2), z12 = poly(g12);
  const LaurentPoly first = z12 * z0 - z1 * z2;
  const LaurentPoly mono1 = z1.derivative() * z0 - z1 * z0.derivative();
  const LaurentPoly mono2 = z2.derivative() * z0 - z2 * z0.derivative();
  std::vector<CheckRecord> out;
  for (double beta : betas) {
    const Wide x = in_t ? Wide(tanh(2 * Wide(beta))) : Wide(exp(2 * Wide(beta)));
    auto record = [&](const std::string& name, const LaurentPoly& q, const std::string& gamma) {
      const auto s = certified_sign(q, x);
      CheckRecord r;
      r.check = name;
      r.complex = describe(cx);
      r.gamma = gamma;
      r.params = {{"beta", beta}, {"variable", in_t ? "t=tanh(2beta)" : "y=exp(2beta)"}};
      r.lhs = format_real(s.value, 17);
      r.rhs = "0";
      r.metric = static_cast<double>(s.value);
      r.pass = s.certified && s.sign >= 0;
      if (q.is_zero()) r.note = "identically zero";
      else if (!s.certified) r.note = "sign not certified at working precision";
      out.push_back(std::move(r));
    };
    record("griffiths-i", first, describe(g1) + "," + describe(g2));
    record("griffiths-ii", mono1, describe(g1));
    record("griffiths-ii", mono2, describe(g2));
  }
  return out;
}

/// Monte Carlo Griffiths checks: (i) the covariance of W1, W2 is >= -3 SE; (ii) direct estimates of E[W_g1] along
/// the increasing beta grid never drop by more than 3 combined SE.
inline std::vector<CheckRecord> check_griffiths_mc(const CellComplex& cx, const Loop& g1, const Loop& g2,
                                                   const std::vector<double>& betas, const ChainSpec& base,
                                                   std::size_t chains = 1, unsigned threads = 1) {
  std::vector<CheckRecord> out;
  std::optional<Estimate> prev;
  double prev_beta = 0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    ChainSpec spec = base;
    spec.params = CouplingParams::uniform(betas[i], cx.num_plaquettes());
    spec.rng = chain_stream(base.rng, i * 2 * chains);
    CheckRecord ri;
    ri.check = "griffiths-i:mc";
    ri.complex = describe(cx);
    ri.gamma = describe(g1) + "," + describe(g2);
    ri.params = {{"beta", betas[i]}};
    if (!(g1.support() & g2.support()).any()) {
      const auto cov = estimate_covariance(cx, g1, g2, spec, chains, threads);
      ri.lhs = format_real(Real(cov.cov.value), 17);
      ri.rhs = "0";
      ri.params["se"] = cov.cov.se;
      ri.metric = cov.cov.value;
      ri.pass = cov.cov.value >= -3 * cov.cov.se;
      out.push_back(ri);
    }
    spec.rng = chain_stream(base.rng, i * 2 * chains + chains);
    const auto est = estimate_wilson(cx, g1, WilsonRoute::direct, spec, chains, threads);
    if (prev) {
      CheckRecord r;
      r.check = "griffiths-ii:mc";
      r.complex = describe(cx);
      r.gamma = describe(g1);
      r.params = {{"beta_from", prev_beta}, {"beta_to", betas[i]}};
      r.lhs = format_real(Real(prev->value), 17);
      r.rhs = format_real(Real(est.value), 17);
      const double se = std::sqrt(prev->se * prev->se + est.se * est.se);
      r.metric = est.value - prev->value;
      r.pass = est.value >= prev->value - 3 * se;
      out.push_back(r);
    }
    prev = est;
    prev_beta = betas[i];
  }
  return out;
}

/**
 * Exact stochastic-domination checks on a small complex at one beta, over the increasing events
 * "plaquette p present" and "plaquettes p and q present":
 *   Bernoulli(tanh 2b) <= phi^0 <= Bernoulli(1 - e^(-4b)),
 *   Bernoulli(1 - 1/cosh 2b) <= law of supp n under the sourceless current measure <= Bernoulli(1 - e^(-4b)),
 * plus the conditional inclusion probability of every (P, p0) under phi^0 lying in [tanh 2b, 1 - e^(-4b)].
 * Both ends of that interval are attained, so comparisons carry a rounding slack of 1e-40.
 */
inline std::vector<CheckRecord> check_domination_exact(const CellComplex& cx, double beta,
                                                       const OracleBudget& budget = {}) {
  const auto params = CouplingParams::uniform(beta, cx.num_plaquettes());
  const std::size_t np = cx.num_plaquettes();
  const Loop none = Loop::empty(cx);
  const auto phi = exact_measure(cx, MeasureKind::cluster, none, params, budget);
  std::vector<Real> p1(np, params.prob_hat_real(0));
  const auto hat = bernoulli_raise(exact_measure(cx, MeasureKind::ht, none, params, budget), p1,
                                   MeasureKind::current_support);
  const Real lo_phi = params.prob_ht_real(0), lo_hat = params.prob_hat_real(0), hi = params.prob_cluster_real(0);
  const Real slack("1e-40");

  std::vector<std::vector<std::size_t>> events;
  for (std::size_t p = 0; p < np; ++p) events.push_back({p});
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t q = p + 1; q < np; ++q) events.push_back({p, q});

  auto family = [&](const std::string& name, const MeasureTable& t, const Real& lo) {
    Real worst_lo = 1e9, worst_hi = 1e9;
    for (const auto& ev : events) {
      const Real pr = t.probability([&](const BitVector& x) {
        for (auto p : ev)
          if (!x.test(p)) return false;
        return true;
      });
      const int k = static_cast<int>(ev.size());
      worst_lo = std::min(worst_lo, Real(pr - pow(lo, k)));
      worst_hi = std::min(worst_hi, Real(pow(hi, k) - pr));
    }
    CheckRecord a;
    a.check = "domination:" + name + "-lower";
    a.complex = describe(cx);
    a.gamma = "{}";
    a.params = {{"beta", beta}, {"events", events.size()}};
    a.lhs = format_real(lo, 17);
    a.rhs = name;
    a.metric = to_double(worst_lo);
    a.pass = worst_lo >= -slack;
    CheckRecord b = a;
    b.check = "domination:" + name + "-upper";
    b.lhs = name;
    b.rhs = format_real(hi, 17);
    b.metric = to_double(worst_hi);
    b.pass = worst_hi >= -slack;
    return std::vector<CheckRecord>{a, b};
  };
  auto out = family("cluster", phi, lo_phi);
  auto more = family("current-support", hat, lo_hat);
  out.insert(out.end(), more.begin(), more.end());

  detail::check_state_bits(np, budget, "cluster");
  Real worst_lo = 1e9, worst_hi = 1e9;
  std::size_t pairs = 0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << np); ++s)
    for (std::size_t p0 = 0; p0 < np; ++p0) {
      if ((s >> p0) & 1u) continue;
      const Real without = phi.at(BitVector::from_word(np, s));
      const Real with = phi.at(BitVector::from_word(np, s | (std::uint64_t{1} << p0)));
      if (with + without == 0) continue;  // neither configuration has weight (beta = 0)
      const Real ratio = with / (with + without);
      worst_lo = std::min(worst_lo, Real(ratio - lo_phi));
      worst_hi = std::min(worst_hi, Real(hi - ratio));
      ++pairs;
    }
  CheckRecord c;
  c.check = "domination:conditional-inclusion";
  c.complex = describe(cx);
  c.gamma = "{}";
  c.params = {{"beta", beta}, {"pairs", pairs}};
  c.lhs = format_real(lo_phi, 17);
  c.rhs = format_real(hi, 17);
  c.metric = to_double(std::min(worst_lo, worst_hi));
  c.pass = worst_lo >= -slack && worst_hi >= -slack;
  out.push_back(c);
  return out;
}

/// Monte Carlo domination check for phi^0: frequencies of single plaquettes and pairs being present in the cluster
/// half of gauge/cluster chains compared one-sided at 3 SE with the two Bernoulli products.
inline std::vector<CheckRecord> check_domination_mc(const CellComplex& cx, const ChainSpec& base,
                                                    const std::vector<std::vector<std::size_t>>& events,
                                                    std::size_t chains = 1, unsigned threads = 1) {
  ChainSpec spec = base;
  spec.kind = ChainKind::cluster;
  validate(spec, cx);
  const double beta = spec.params.beta();
  std::vector<Observable> obs;
  for (const auto& ev : events) {
    for (auto p : ev)
      if (p >= cx.num_plaquettes()) throw InvalidArgument("plaquette index out of range");
    obs.push_back({"event", [ev](const ChainState& s) {
                     for (auto p : ev)
                       if (!s.plaquettes.bits.test(p)) return 0.0;
                     return 1.0;
                   }});
  }
  std::vector<TimeSeries> runs(chains);
  parallel_for(chains, threads, [&](std::size_t i) {
    ChainSpec s = spec;
    s.rng = chain_stream(base.rng, i);
    runs[i] = run_chain(cx, s, obs);
  });
  std::vector<CheckRecord> out;
  for (std::size_t k = 0; k < events.size(); ++k) {
    std::vector<std::vector<double>> series;
    for (const auto& r : runs) series.push_back(r.values[k]);
    const auto est = batch_means(series, kDefaultBatches, "cluster");
    const int n = static_cast<int>(events[k].size());
    const double lo = std::pow(spec.params.prob_ht(0), n), hi = std::pow(spec.params.prob_cluster(0), n);
    CheckRecord r;
    r.check = "domination:mc";
    r.complex = describe(cx);
    std::string ev;
    for (auto p : events[k]) ev += (ev.empty() ? "" : ",") + std::to_string(p);
    r.gamma = "{}";
    r.params = {{"beta", beta}, {"event", "{" + ev + "}"}, {"se", est.se}};
    r.lhs = format_real(Real(est.value), 17);
    r.rhs = "[" + format_real(Real(lo), 17) + ", " + format_real(Real(hi), 17) + "]";
    r.metric = std::min(est.value - lo, hi - est.value);
    r.pass = est.value + 3 * est.se >= lo && est.value - 3 * est.se <= hi;
    out.push_back(r);
  }
  return out;
}

}  // namespace z2lgt
