#pragma once

#include "z2lgt/config.hpp"
#include "z2lgt/estimators.hpp"
#include "z2lgt/oracle.hpp"
#include "z2lgt/report.hpp"
#include "z2lgt/version.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace z2lgt {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRefusal = 3, kExitCheckFailed = 4 };

/// Records of one run, all with the same keys (`columns`), plus the exit status they imply.
struct RunReport {
  std::vector<std::string> columns;
  std::vector<nlohmann::ordered_json> records;

  int exit_code() const {
    bool fail = false, refused = false, infeasible = false;
    for (const auto& r : records) {
      const auto s = r.value("status", std::string());
      fail |= s == "fail";
      refused |= s == "refused";
      infeasible |= s == "infeasible";
    }
    if (fail) return kExitCheckFailed;
    if (refused) return kExitRefusal;
    if (infeasible) return kExitConfig;
    return kExitOk;
  }
};

namespace detail {

using J = nlohmann::ordered_json;

inline const std::vector<std::string> kCheckColumns{"task", "check", "complex", "gamma", "params", "lhs",
                                                    "rhs",  "metric", "pass", "note",  "status"};

inline J blank_record(const std::vector<std::string>& columns) {
  J r = J::object();
  for (const auto& c : columns) r[c] = nullptr;
  return r;
}

inline J check_record(Task task, const CheckRecord& c) {
  J r = blank_record(kCheckColumns);
  r["task"] = to_string(task);
  r["check"] = c.check;
  r["complex"] = c.complex;
  r["gamma"] = c.gamma;
  r["params"] = c.params;
  r["lhs"] = c.lhs;
  r["rhs"] = c.rhs;
  r["metric"] = c.metric;
  r["pass"] = c.pass;
  r["note"] = c.note;
  r["status"] = c.pass ? "pass" : "fail";
  return r;
}

inline J beta_value(const CouplingParams& p) { return p.is_uniform() ? J(p.beta()) : J("per-plaquette"); }

/// Runs one unit of work; refusals and infeasibility become a record carrying `ident` instead of aborting the run.
inline void guarded(RunReport& rep, const J& ident, const std::function<void()>& work) {
  auto refuse = [&](const char* status, const std::string& msg) {
    J r = blank_record(rep.columns);
    for (const auto& [k, v] : ident.items()) r[k] = v;
    r["note"] = msg;
    r["status"] = status;
    rep.records.push_back(std::move(r));
  };
  try {
    work();
  } catch (const SizeRefusal& e) {
    refuse("refused", e.what());
  } catch (const HypothesisViolated& e) {
    refuse("refused", e.what());
  } catch (const Infeasible& e) {
    refuse("infeasible", e.what());
  }
}

inline ChainSpec chain_spec(const ExperimentConfig& c, const CouplingParams& params, std::uint64_t stream_offset) {
  ChainSpec s;
  s.params = params;
  s.sweeps = c.chain.sweeps;
  s.burn_in = c.chain.burn_in;
  s.thinning = c.chain.thinning;
  s.rng = {c.rng.seed, c.rng.stream + stream_offset};
  return s;
}

inline void run_current_expansion(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                                  unsigned threads, RunReport& rep) {
  rep.columns = kCheckColumns;
  const auto sets = parameter_sets(c, cx.num_plaquettes());
  for (const auto& g : loops) {
    guarded(rep, {{"task", to_string(c.task)}, {"complex", describe(cx)}, {"gamma", describe(g)}}, [&] {
      LaurentPoly z;
      const bool uniform = sets.front().is_uniform();
      if (uniform) z = exact_Z(cx, g, true, threads);
      for (const auto& p : sets)
        rep.records.push_back(check_record(c.task, verify_current_expansion(cx, g, p, uniform ? &z : nullptr)));
    });
  }
}

inline void run_switching(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                          RunReport& rep) {
  rep.columns = kCheckColumns;
  for (const auto& g1 : loops)
    for (const auto& g2 : loops)
      for (auto f : c.functionals)
        for (double b : c.betas) {
          // The shortest decimal form of beta, read exactly.
          const Rational beta = parse_rational(nlohmann::json(b).dump());
          guarded(rep, {{"task", to_string(c.task)}, {"complex", describe(cx)}, {"gamma", describe(g1) + "," + describe(g2)}},
                  [&] {
                    rep.records.push_back(check_record(c.task, verify_switching(cx, g1, g2, f, c.p0, c.truncation, beta)));
                  });
        }
}

inline void run_coupling(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                         RunReport& rep) {
  rep.columns = kCheckColumns;
  for (auto step : c.steps)
    for (const auto& g : loops)
      for (const auto& p : parameter_sets(c, cx.num_plaquettes()))
        guarded(rep, {{"task", to_string(c.task)}, {"check", "coupling:" + to_string(step)}, {"complex", describe(cx)},
                      {"gamma", describe(g)}},
                [&] { rep.records.push_back(check_record(c.task, verify_coupling(cx, step, g, p))); });
}

inline void run_oracle_wilson(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                              RunReport& rep) {
  rep.columns = {"task", "complex", "gamma", "beta", "value", "value_text", "variable", "note", "status"};
  for (const auto& g : loops)
    guarded(rep, {{"task", to_string(c.task)}, {"complex", describe(cx)}, {"gamma", describe(g)}}, [&] {
      const auto ratio = wilson_ratio(cx, g);
      for (double b : c.betas) {
        const Real v = ratio.value(b);
        J r = blank_record(rep.columns);
        r["task"] = to_string(c.task);
        r["complex"] = describe(cx);
        r["gamma"] = describe(g);
        r["beta"] = b;
        r["value"] = to_double(v);
        r["value_text"] = format_real(v, 17);
        r["variable"] = ratio.in_t ? "t=tanh(2beta)" : "y=exp(2beta)";
        r["note"] = "";
        // E[W] > 0 for beta > 0; at beta = 0 only the empty loop has nonzero expectation.
        r["status"] = (b > 0 ? v > 0 : v >= 0) ? "ok" : "fail";
        rep.records.push_back(std::move(r));
      }
    });
}

inline void run_estimate(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                         unsigned threads, RunReport& rep) {
  rep.columns = {"task", "record", "complex", "gamma", "beta", "route", "value", "se", "batches", "samples", "chains",
                 "note", "status"};
  const auto sets = parameter_sets(c, cx.num_plaquettes());
  std::uint64_t item = 0;
  for (const auto& g : loops)
    for (const auto& p : sets)
      for (auto route : c.routes) {
        const auto spec = chain_spec(c, p, item++ * 2 * c.chain.chains);
        guarded(rep, {{"task", to_string(c.task)}, {"record", "estimate"}, {"complex", describe(cx)},
                      {"gamma", describe(g)}, {"beta", beta_value(p)}, {"route", to_string(route)}},
                [&] {
                  const auto series = wilson_series(cx, g, route, spec, c.chain.chains, threads);
                  if (c.series) {
                    for (std::size_t i = 0; i < series.size(); ++i)
                      for (std::size_t k = 0; k < series[i].size(); ++k) {
                        J s = J::object();
                        s["task"] = to_string(c.task);
                        s["record"] = "series";
                        s["gamma"] = describe(g);
                        s["beta"] = beta_value(p);
                        s["chain"] = i;
                        s["sweep"] = spec.burn_in + spec.thinning * (k + 1);
                        s["name"] = to_string(route);
                        s["value"] = series[i][k];
                        rep.records.push_back(std::move(s));
                      }
                  }
                  const auto est = batch_means(series, kDefaultBatches, to_string(route));
                  J r = blank_record(rep.columns);
                  r["task"] = to_string(c.task);
                  r["record"] = "estimate";
                  r["complex"] = describe(cx);
                  r["gamma"] = describe(g);
                  r["beta"] = beta_value(p);
                  r["route"] = est.route;
                  r["value"] = est.value;
                  r["se"] = est.se;
                  r["batches"] = est.batches;
                  r["samples"] = est.samples;
                  r["chains"] = c.chain.chains;
                  r["note"] = route == WilsonRoute::current_squared ? "estimates E[W]^2" : "";
                  r["status"] = "ok";
                  rep.records.push_back(std::move(r));
                });
      }
}

inline void run_potential(const ExperimentConfig& c, const CellComplex& cx, unsigned threads, RunReport& rep) {
  rep.columns = {"task", "mode", "complex", "R", "T", "beta", "potential", "se", "wilson", "wilson_se",
                 "slope", "residual", "note", "status"};
  for (std::size_t bi = 0; bi < c.betas.size(); ++bi) {
    const double b = c.betas[bi];
    const J ident{{"task", to_string(c.task)}, {"mode", to_string(c.mode)}, {"complex", describe(cx)}, {"R", c.R},
                  {"beta", b}};
    guarded(rep, ident, [&] {
      std::vector<J> rows;
      if (c.mode == CheckMode::oracle) {
        const auto v = potential_oracle(cx, c.R, c.Ts, b);
        for (std::size_t i = 0; i < c.Ts.size(); ++i) {
          J r = blank_record(rep.columns);
          for (const auto& [k, x] : ident.items()) r[k] = x;
          r["T"] = c.Ts[i];
          r["potential"] = to_double(v[i] / c.Ts[i]);
          r["wilson"] = to_double(exp(-v[i]));
          r["note"] = "";
          r["status"] = "ok";
          rows.push_back(std::move(r));
        }
        // T -> -log W(R, T) is subadditive; checked wherever T1 + T2 is also on the list.
        for (std::size_t i = 0; i < c.Ts.size(); ++i)
          for (std::size_t j = i; j < c.Ts.size(); ++j)
            for (std::size_t k = 0; k < c.Ts.size(); ++k) {
              if (c.Ts[k] != c.Ts[i] + c.Ts[j]) continue;
              const Real lhs = v[k], rhs = v[i] + v[j];
              if (lhs > rhs + Real("1e-40") * (1 + abs(rhs))) {
                rows[k]["status"] = "fail";
                rows[k]["note"] = "subadditivity violated against T=" + std::to_string(c.Ts[i]) + "+" +
                                  std::to_string(c.Ts[j]);
              }
            }
      } else {
        const auto spec = chain_spec(c, CouplingParams::uniform(b, cx.num_plaquettes()),
                                     bi * c.Ts.size() * c.chain.chains);
        const auto fit = estimate_potential(cx, c.R, c.Ts, spec, c.chain.chains, threads);
        for (const auto& pt : fit.points) {
          J r = blank_record(rep.columns);
          for (const auto& [k, x] : ident.items()) r[k] = x;
          r["T"] = pt.T;
          if (pt.value) r["potential"] = *pt.value;
          if (pt.se) r["se"] = *pt.se;
          r["wilson"] = pt.wilson.value;
          r["wilson_se"] = pt.wilson.se;
          if (fit.slope) r["slope"] = *fit.slope;
          if (fit.residual) r["residual"] = *fit.residual;
          r["note"] = pt.value ? "" : "insufficient statistics";
          r["status"] = fit.subadditive ? "ok" : "fail";
          if (!fit.subadditive) r["note"] = "subadditivity violated beyond 3 SE";
          rows.push_back(std::move(r));
        }
      }
      for (auto& r : rows) rep.records.push_back(std::move(r));
    });
  }
}

inline void run_area_law(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                         unsigned threads, RunReport& rep) {
  rep.columns = kCheckColumns;
  std::uint64_t item = 0;
  for (std::size_t li = 0; li < loops.size(); ++li)
    for (double b : c.betas) {
      const auto& g = loops[li];
      const auto& ls = c.loops[li];
      std::optional<std::size_t> known;
      if (ls.kind == LoopSpec::Kind::rectangle) known = rectangle_area(ls.width, ls.height);
      if (ls.kind == LoopSpec::Kind::plaquette) known = 1;
      const auto spec = chain_spec(c, CouplingParams::uniform(b, cx.num_plaquettes()), item++ * c.chain.chains);
      guarded(rep, {{"task", to_string(c.task)}, {"check", "area-law:" + to_string(c.mode)}, {"complex", describe(cx)},
                    {"gamma", describe(g)}, {"params", {{"beta", b}}}},
              [&] {
                rep.records.push_back(check_record(
                    c.task, check_area_law(cx, g, b, c.mode, &spec, c.chain.chains, threads, known)));
              });
    }
}

inline void run_griffiths(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                          unsigned threads, RunReport& rep) {
  rep.columns = kCheckColumns;
  std::uint64_t item = 0;
  for (std::size_t i = 0; i < loops.size(); ++i)
    for (std::size_t j = i; j < loops.size(); ++j) {
      const auto spec = chain_spec(c, CouplingParams::uniform(c.betas.front(), cx.num_plaquettes()),
                                   item++ * 2 * c.chain.chains * c.betas.size());
      guarded(rep, {{"task", to_string(c.task)}, {"complex", describe(cx)},
                    {"gamma", describe(loops[i]) + "," + describe(loops[j])}},
              [&] {
                const auto recs = c.mode == CheckMode::oracle
                                      ? check_griffiths_oracle(cx, loops[i], loops[j], c.betas)
                                      : check_griffiths_mc(cx, loops[i], loops[j], c.betas, spec, c.chain.chains, threads);
                for (const auto& r : recs) rep.records.push_back(check_record(c.task, r));
              });
    }
}

inline void run_domination(const ExperimentConfig& c, const CellComplex& cx, unsigned threads, RunReport& rep) {
  rep.columns = kCheckColumns;
  std::vector<std::vector<std::size_t>> events;
  for (std::size_t p = 0; p < cx.num_plaquettes(); ++p) events.push_back({p});
  for (std::size_t p = 0; p < cx.num_plaquettes(); ++p)
    for (std::size_t q = p + 1; q < cx.num_plaquettes(); ++q) events.push_back({p, q});
  for (std::size_t bi = 0; bi < c.betas.size(); ++bi) {
    const double b = c.betas[bi];
    guarded(rep, {{"task", to_string(c.task)}, {"complex", describe(cx)}, {"params", {{"beta", b}}}}, [&] {
      const auto recs = c.mode == CheckMode::oracle
                            ? check_domination_exact(cx, b)
                            : check_domination_mc(cx, chain_spec(c, CouplingParams::uniform(b, cx.num_plaquettes()),
                                                                 bi * c.chain.chains),
                                                  events, c.chain.chains, threads);
      for (const auto& r : recs) rep.records.push_back(check_record(c.task, r));
    });
  }
}

/// Covariances of loop 0 with each other loop, a decay-rate fit, and the check that |Cov| does not grow with
/// distance beyond 3 combined SE (and vanishes within 3 SE at beta = 0).
inline void run_covariance(const ExperimentConfig& c, const CellComplex& cx, const std::vector<Loop>& loops,
                           unsigned threads, RunReport& rep) {
  rep.columns = {"task", "record", "complex", "beta", "gamma1", "gamma2", "distance", "covariance", "se",
                 "decay_rate", "note", "status"};
  const auto sets = parameter_sets(c, cx.num_plaquettes());
  std::uint64_t item = 0;
  for (const auto& p : sets) {
    const J ident{{"task", to_string(c.task)}, {"complex", describe(cx)}, {"beta", beta_value(p)}};
    std::vector<std::pair<CovarianceEstimate, std::size_t>> got;
    for (std::size_t i = 1; i < loops.size(); ++i) {
      const auto spec = chain_spec(c, p, item++ * c.chain.chains);
      J id = ident;
      id["record"] = "pair";
      id["gamma1"] = describe(loops[0]);
      id["gamma2"] = describe(loops[i]);
      guarded(rep, id, [&] {
        got.emplace_back(estimate_covariance(cx, loops[0], loops[i], spec, c.chain.chains, threads), i);
      });
    }
    std::stable_sort(got.begin(), got.end(),
                     [](const auto& a, const auto& b) { return a.first.distance < b.first.distance; });
    std::vector<std::pair<double, double>> pts;
    const bool zero_beta = p.is_uniform() && p.beta() == 0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      const auto& [ce, i] = got[k];
      J r = blank_record(rep.columns);
      for (const auto& [key, x] : ident.items()) r[key] = x;
      r["record"] = "pair";
      r["gamma1"] = describe(loops[0]);
      r["gamma2"] = describe(loops[i]);
      r["distance"] = ce.distance;
      r["covariance"] = ce.cov.value;
      r["se"] = ce.cov.se;
      r["note"] = "";
      r["status"] = "ok";
      if (k > 0) {
        const auto& prev = got[k - 1].first;
        const double tol = 3 * std::sqrt(prev.cov.se * prev.cov.se + ce.cov.se * ce.cov.se);
        if (std::abs(ce.cov.value) > std::abs(prev.cov.value) + tol) {
          r["status"] = "fail";
          r["note"] = "|cov| grows with distance beyond 3 SE";
        }
      }
      if (zero_beta && std::abs(ce.cov.value) > 3 * ce.cov.se) {
        r["status"] = "fail";
        r["note"] = "nonzero covariance at beta = 0";
      }
      pts.emplace_back(static_cast<double>(ce.distance), ce.cov.value);
      rep.records.push_back(std::move(r));
    }
    J fit = blank_record(rep.columns);
    for (const auto& [key, x] : ident.items()) fit[key] = x;
    fit["record"] = "decay-fit";
    const auto rate = fit_decay_rate(pts);
    if (rate) fit["decay_rate"] = *rate;
    fit["note"] = rate ? "least squares of log|cov| on distance; no bound asserted" : "fewer than two usable points";
    fit["status"] = "ok";
    rep.records.push_back(std::move(fit));
  }
}

inline std::string csv_field(const J& v) {
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

}  // namespace detail

/// Runs the task of a validated config.  Thread count changes scheduling only, never the records.
inline RunReport run_task(const ExperimentConfig& c, unsigned threads = 1) {
  const auto cx = build_complex(c.m, c.extents);
  std::vector<Loop> loops;
  for (const auto& l : c.loops) loops.push_back(l.build(cx));
  RunReport rep;
  switch (c.task) {
    case Task::verify_current_expansion: detail::run_current_expansion(c, cx, loops, threads, rep); break;
    case Task::verify_switching: detail::run_switching(c, cx, loops, rep); break;
    case Task::verify_coupling: detail::run_coupling(c, cx, loops, rep); break;
    case Task::oracle_wilson: detail::run_oracle_wilson(c, cx, loops, rep); break;
    case Task::estimate: detail::run_estimate(c, cx, loops, threads, rep); break;
    case Task::potential: detail::run_potential(c, cx, threads, rep); break;
    case Task::area_law: detail::run_area_law(c, cx, loops, threads, rep); break;
    case Task::griffiths: detail::run_griffiths(c, cx, loops, threads, rep); break;
    case Task::domination: detail::run_domination(c, cx, threads, rep); break;
    case Task::covariance: detail::run_covariance(c, cx, loops, threads, rep); break;
  }
  return rep;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes the report.  Line 1 holds the timestamp and nothing else; every later line is a deterministic function
/// of the config.
inline void write_report(std::ostream& out, const ExperimentConfig& c, const RunReport& rep,
                         const std::string& timestamp) {
  using J = nlohmann::ordered_json;
  const J meta{{"version", kVersion},
               {"rng_algorithm", kRngAlgorithm},
               {"config_hash", config_hash(c)},
               {"exit_code", rep.exit_code()},
               {"config", resolved_json(c)}};
  if (c.format == OutputFormat::jsonl) {
    out << J{{"timestamp", timestamp}}.dump() << '\n';
    out << J{{"header", meta}}.dump() << '\n';
    for (const auto& r : rep.records) out << r.dump() << '\n';
    return;
  }
  out << "# timestamp: " << timestamp << '\n';
  for (const auto& [k, v] : meta.items()) out << "# " << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  for (std::size_t i = 0; i < rep.columns.size(); ++i) out << (i ? "," : "") << rep.columns[i];
  out << '\n';
  for (const auto& r : rep.records) {
    for (std::size_t i = 0; i < rep.columns.size(); ++i)
      out << (i ? "," : "") << detail::csv_field(r.contains(rep.columns[i]) ? r.at(rep.columns[i]) : J());
    out << '\n';
  }
}

}  // namespace z2lgt
