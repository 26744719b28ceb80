#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/errors.hpp"
#include "z2lgt/estimators.hpp"
#include "z2lgt/forms.hpp"
#include "z2lgt/oracle.hpp"
#include "z2lgt/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace z2lgt {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class Task {
  verify_current_expansion,
  verify_switching,
  verify_coupling,
  oracle_wilson,
  estimate,
  potential,
  area_law,
  griffiths,
  domination,
  covariance
};

inline constexpr Task kAllTasks[] = {Task::verify_current_expansion, Task::verify_switching, Task::verify_coupling,
                                     Task::oracle_wilson,            Task::estimate,         Task::potential,
                                     Task::area_law,                 Task::griffiths,        Task::domination,
                                     Task::covariance};

inline std::string to_string(Task t) {
  switch (t) {
    case Task::verify_current_expansion: return "verify-current-expansion";
    case Task::verify_switching: return "verify-switching";
    case Task::verify_coupling: return "verify-coupling";
    case Task::oracle_wilson: return "oracle-wilson";
    case Task::estimate: return "estimate";
    case Task::potential: return "potential";
    case Task::area_law: return "area-law";
    case Task::griffiths: return "griffiths";
    case Task::domination: return "domination";
    case Task::covariance: return "covariance";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  for (auto t : kAllTasks)
    if (to_string(t) == s) return t;
  throw ConfigError("unknown task '" + s + "'");
}

enum class OutputFormat { csv, jsonl };

inline std::string to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "jsonl"; }

inline OutputFormat parse_output_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "jsonl") return OutputFormat::jsonl;
  throw ConfigError("unknown output format '" + s + "' (expected csv or jsonl)");
}

/// A loop as written in a config: a rectangle, a signed edge list, a plaquette boundary, or the empty loop.
struct LoopSpec {
  enum class Kind { empty, rectangle, edges, plaquette };
  Kind kind = Kind::empty;
  std::vector<int> corner;
  int axis_a = 0;
  int axis_b = 1;
  int width = 0;
  int height = 0;
  std::vector<std::pair<std::size_t, int>> edges;
  std::size_t plaquette = 0;

  Loop build(const CellComplex& cx) const {
    switch (kind) {
      case Kind::empty: return Loop::empty(cx);
      case Kind::rectangle: return Loop::rectangle(cx, corner, axis_a, axis_b, width, height);
      case Kind::plaquette:
        if (plaquette >= cx.num_plaquettes()) throw ConfigError("plaquette index out of range");
        return Loop::plaquette_boundary(cx, plaquette);
      case Kind::edges: {
        std::vector<std::int8_t> c(cx.num_edges(), 0);
        for (const auto& [e, v] : edges) {
          if (e >= cx.num_edges()) throw ConfigError("edge index " + std::to_string(e) + " out of range");
          if (v != 1 && v != -1) throw ConfigError("edge coefficients must be +1 or -1");
          if (c[e] != 0) throw ConfigError("edge " + std::to_string(e) + " listed twice");
          c[e] = static_cast<std::int8_t>(v);
        }
        return Loop::from_coefficients(cx, std::move(c));
      }
    }
    throw ConfigError("unknown loop kind");
  }

  friend bool operator==(const LoopSpec&, const LoopSpec&) = default;
};

struct ChainConfig {
  std::uint64_t sweeps = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thinning = 1;
  std::size_t chains = 1;

  friend bool operator==(const ChainConfig&, const ChainConfig&) = default;
};

struct ExperimentConfig {
  Task task = Task::oracle_wilson;
  int m = 0;
  std::vector<int> extents;
  std::vector<LoopSpec> loops;
  std::vector<double> betas;
  std::string beta_file;               // per-plaquette couplings, read relative to the config file
  std::vector<double> plaquette_betas;  // inline, or the resolved content of beta_file
  ChainConfig chain;
  RngSpec rng;
  std::string output_path;
  OutputFormat format = OutputFormat::jsonl;

  std::vector<CouplingStep> steps;
  std::vector<SwitchFunctional> functionals;
  std::size_t p0 = 0;
  std::uint32_t truncation = 4;
  std::vector<WilsonRoute> routes;
  bool series = false;
  CheckMode mode = CheckMode::oracle;
  int R = 1;
  std::vector<int> Ts;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::ordered_json& j, const std::set<std::string>& known,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_as(const nlohmann::ordered_json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

inline std::vector<double> read_beta_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open beta file " + path.string());
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    if (tok.front() == '#') {
      std::getline(in, tok);
      continue;
    }
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError("bad number '" + tok + "' in beta file " + path.string());
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const LoopSpec& s) {
  using J = nlohmann::ordered_json;
  switch (s.kind) {
    case LoopSpec::Kind::empty: return J{{"kind", "empty"}};
    case LoopSpec::Kind::rectangle:
      return J{{"kind", "rectangle"}, {"corner", s.corner}, {"axes", {s.axis_a, s.axis_b}},
               {"width", s.width},    {"height", s.height}};
    case LoopSpec::Kind::plaquette: return J{{"kind", "plaquette"}, {"index", s.plaquette}};
    case LoopSpec::Kind::edges: {
      J edges = J::array();
      for (const auto& [e, v] : s.edges) edges.push_back({e, v});
      return J{{"kind", "edges"}, {"edges", edges}};
    }
  }
  return J();
}

inline LoopSpec loop_spec_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("loop spec needs a 'kind'");
  const auto kind = detail::get_as<std::string>(j, "kind");
  LoopSpec s;
  if (kind == "empty") {
    detail::reject_unknown_keys(j, {"kind"}, "empty loop");
  } else if (kind == "rectangle") {
    detail::reject_unknown_keys(j, {"kind", "corner", "axes", "width", "height"}, "rectangle loop");
    s.kind = LoopSpec::Kind::rectangle;
    s.corner = detail::get_as<std::vector<int>>(j, "corner");
    const auto axes = detail::get_as<std::vector<int>>(j, "axes");
    if (axes.size() != 2) throw ConfigError("rectangle 'axes' must list two axes");
    s.axis_a = axes[0];
    s.axis_b = axes[1];
    s.width = detail::get_as<int>(j, "width");
    s.height = detail::get_as<int>(j, "height");
  } else if (kind == "edges") {
    detail::reject_unknown_keys(j, {"kind", "edges"}, "edge loop");
    s.kind = LoopSpec::Kind::edges;
    for (const auto& pair : j.at("edges")) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() || !pair[1].is_number_integer())
        throw ConfigError("edge loop entries must be [edge-index, coefficient]");
      s.edges.emplace_back(pair[0].get<std::size_t>(), pair[1].get<int>());
    }
  } else if (kind == "plaquette") {
    detail::reject_unknown_keys(j, {"kind", "index"}, "plaquette loop");
    s.kind = LoopSpec::Kind::plaquette;
    s.plaquette = detail::get_as<std::size_t>(j, "index");
  } else {
    throw ConfigError("unknown loop kind '" + kind + "' (expected empty, rectangle, edges or plaquette)");
  }
  return s;
}

/// Canonical JSON form of a config.  Options that do not apply to the task are omitted.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  using J = nlohmann::ordered_json;
  J j;
  j["task"] = to_string(c.task);
  j["complex"] = {{"m", c.m}, {"extents", c.extents}};
  J loops = J::array();
  for (const auto& l : c.loops) loops.push_back(to_json(l));
  j["loops"] = loops;
  j["betas"] = c.betas;
  if (!c.beta_file.empty()) j["beta_file"] = c.beta_file;
  if (!c.plaquette_betas.empty()) j["plaquette_betas"] = c.plaquette_betas;
  j["chain"] = {{"sweeps", c.chain.sweeps},
                {"burn_in", c.chain.burn_in},
                {"thinning", c.chain.thinning},
                {"chains", c.chain.chains}};
  j["rng"] = {{"seed", c.rng.seed}, {"stream", c.rng.stream}};
  j["output"] = {{"path", c.output_path}, {"format", to_string(c.format)}};
  switch (c.task) {
    case Task::verify_coupling: {
      J steps = J::array();
      for (auto s : c.steps) steps.push_back(to_string(s));
      j["steps"] = steps;
      break;
    }
    case Task::verify_switching: {
      J fs = J::array();
      for (auto f : c.functionals) fs.push_back(to_string(f));
      j["functionals"] = fs;
      j["p0"] = c.p0;
      j["truncation"] = c.truncation;
      break;
    }
    case Task::estimate: {
      J rs = J::array();
      for (auto r : c.routes) rs.push_back(to_string(r));
      j["routes"] = rs;
      j["series"] = c.series;
      break;
    }
    case Task::potential:
      j["mode"] = to_string(c.mode);
      j["R"] = c.R;
      j["T"] = c.Ts;
      break;
    case Task::area_law:
    case Task::griffiths:
    case Task::domination: j["mode"] = to_string(c.mode); break;
    default: break;
  }
  return j;
}

/// Parses a config object.  Does not read beta_file; see load_config and resolve.
inline ExperimentConfig config_from_json(const nlohmann::ordered_json& j) {
  detail::reject_unknown_keys(j,
                              {"task", "complex", "loops", "beta", "betas", "beta_file", "plaquette_betas", "chain",
                               "rng", "output", "steps", "functionals", "p0", "truncation", "routes", "series",
                               "mode", "R", "T"},
                              "config");
  ExperimentConfig c;
  if (!j.contains("task")) throw ConfigError("config needs a 'task'");
  c.task = parse_task(detail::get_as<std::string>(j, "task"));
  if (!j.contains("complex")) throw ConfigError("config needs a 'complex'");
  const auto& cx = j.at("complex");
  detail::reject_unknown_keys(cx, {"m", "extents"}, "complex");
  c.m = detail::get_as<int>(cx, "m");
  c.extents = detail::get_as<std::vector<int>>(cx, "extents");
  if (j.contains("loops")) {
    if (!j.at("loops").is_array()) throw ConfigError("'loops' must be an array");
    for (const auto& l : j.at("loops")) c.loops.push_back(loop_spec_from_json(l));
  }
  if (j.contains("beta") && j.contains("betas")) throw ConfigError("give either 'beta' or 'betas', not both");
  if (j.contains("beta")) c.betas = {detail::get_as<double>(j, "beta")};
  if (j.contains("betas")) c.betas = detail::get_as<std::vector<double>>(j, "betas");
  if (j.contains("beta_file")) c.beta_file = detail::get_as<std::string>(j, "beta_file");
  if (j.contains("plaquette_betas")) c.plaquette_betas = detail::get_as<std::vector<double>>(j, "plaquette_betas");
  if (j.contains("chain")) {
    const auto& ch = j.at("chain");
    detail::reject_unknown_keys(ch, {"sweeps", "burn_in", "thinning", "chains"}, "chain");
    if (ch.contains("sweeps")) c.chain.sweeps = detail::get_as<std::uint64_t>(ch, "sweeps");
    if (ch.contains("burn_in")) c.chain.burn_in = detail::get_as<std::uint64_t>(ch, "burn_in");
    if (ch.contains("thinning")) c.chain.thinning = detail::get_as<std::uint64_t>(ch, "thinning");
    if (ch.contains("chains")) c.chain.chains = detail::get_as<std::size_t>(ch, "chains");
  }
  if (j.contains("rng")) {
    const auto& r = j.at("rng");
    detail::reject_unknown_keys(r, {"seed", "stream"}, "rng");
    if (r.contains("seed")) c.rng.seed = detail::get_as<std::uint64_t>(r, "seed");
    if (r.contains("stream")) c.rng.stream = detail::get_as<std::uint64_t>(r, "stream");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown_keys(o, {"path", "format"}, "output");
    if (o.contains("path")) c.output_path = detail::get_as<std::string>(o, "path");
    if (o.contains("format")) c.format = parse_output_format(detail::get_as<std::string>(o, "format"));
  }
  auto names = [&](const char* key) { return detail::get_as<std::vector<std::string>>(j, key); };
  try {
    if (j.contains("steps"))
      for (const auto& s : names("steps")) c.steps.push_back(parse_coupling_step(s));
    if (j.contains("functionals"))
      for (const auto& s : names("functionals")) c.functionals.push_back(parse_switch_functional(s));
    if (j.contains("routes"))
      for (const auto& s : names("routes")) c.routes.push_back(parse_wilson_route(s));
    if (j.contains("mode")) c.mode = parse_check_mode(detail::get_as<std::string>(j, "mode"));
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("p0")) c.p0 = detail::get_as<std::size_t>(j, "p0");
  if (j.contains("truncation")) c.truncation = detail::get_as<std::uint32_t>(j, "truncation");
  if (j.contains("series")) c.series = detail::get_as<bool>(j, "series");
  if (j.contains("R")) c.R = detail::get_as<int>(j, "R");
  if (j.contains("T")) c.Ts = detail::get_as<std::vector<int>>(j, "T");

  // Task defaults, so the canonical form is complete.
  if (c.task == Task::verify_coupling && c.steps.empty())
    c.steps = {CouplingStep::parity,        CouplingStep::hat_from_ht,      CouplingStep::cluster_from_ht,
               CouplingStep::cluster_from_hat, CouplingStep::subsurface, CouplingStep::gauge_to_cluster,
               CouplingStep::cluster_to_gauge};
  if (c.task == Task::verify_switching && c.functionals.empty())
    c.functionals = {SwitchFunctional::one, SwitchFunctional::total_mass, SwitchFunctional::occupied};
  if (c.task == Task::estimate && c.routes.empty()) c.routes = {WilsonRoute::direct};
  return c;
}

inline bool task_uses_chain(const ExperimentConfig& c) {
  switch (c.task) {
    case Task::estimate:
    case Task::covariance: return true;
    case Task::potential:
    case Task::area_law:
    case Task::griffiths:
    case Task::domination: return c.mode == CheckMode::mc;
    default: return false;
  }
}

inline bool task_accepts_plaquette_betas(Task t) {
  return t == Task::verify_current_expansion || t == Task::verify_coupling || t == Task::estimate ||
         t == Task::covariance;
}

/// Full validation against the complex the config describes.  Throws ConfigError.
inline void validate(const ExperimentConfig& c) {
  const CellComplex cx = [&] {
    try {
      return build_complex(c.m, c.extents);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("complex: ") + e.what());
    }
  }();
  std::vector<Loop> loops;
  for (std::size_t i = 0; i < c.loops.size(); ++i) {
    try {
      loops.push_back(c.loops[i].build(cx));
    } catch (const InvalidArgument& e) {
      throw ConfigError("loop " + std::to_string(i) + ": " + e.what());
    }
  }

  if (!c.plaquette_betas.empty()) {
    if (!task_accepts_plaquette_betas(c.task))
      throw ConfigError("task " + to_string(c.task) + " takes uniform couplings only");
    if (!c.betas.empty()) throw ConfigError("give either a beta grid or per-plaquette couplings, not both");
    if (c.plaquette_betas.size() != cx.num_plaquettes())
      throw ConfigError("per-plaquette couplings list " + std::to_string(c.plaquette_betas.size()) +
                        " values for " + std::to_string(cx.num_plaquettes()) + " plaquettes");
    try {
      (void)CouplingParams::per_plaquette(c.plaquette_betas);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("per-plaquette couplings: ") + e.what());
    }
  } else {
    if (!c.beta_file.empty()) throw ConfigError("beta file was not loaded");
    if (c.betas.empty()) throw ConfigError("config needs 'beta', 'betas', 'beta_file' or 'plaquette_betas'");
    for (double b : c.betas) {
      try {
        (void)CouplingParams::uniform(b, 1);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("beta: ") + e.what());
      }
    }
  }

  auto need_loops = [&](std::size_t k) {
    if (c.loops.size() < k)
      throw ConfigError("task " + to_string(c.task) + " needs at least " + std::to_string(k) + " loop(s)");
  };
  switch (c.task) {
    case Task::verify_current_expansion:
    case Task::oracle_wilson:
    case Task::verify_coupling:
    case Task::estimate:
    case Task::area_law:
    case Task::verify_switching: need_loops(1); break;
    case Task::griffiths: need_loops(1); break;
    case Task::covariance: {
      need_loops(2);
      for (std::size_t i = 1; i < loops.size(); ++i)
        if ((loops[0].support() & loops[i].support()).any())
          throw ConfigError("covariance loop " + std::to_string(i) + " shares an edge with loop 0");
      break;
    }
    case Task::potential: {
      try {
        detail::check_T_list(c.Ts);
        for (int T : c.Ts) (void)centered_rectangle(cx, c.R, T);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("potential: ") + e.what());
      }
      if (c.R < 1) throw ConfigError("potential: R must be >= 1");
      break;
    }
    case Task::domination: break;
  }
  if (c.task == Task::verify_coupling)
    for (auto s : c.steps)
      if (s == CouplingStep::lift)
        throw ConfigError("the lift step has no exact pushforward table; check it through the estimate task");
  if (c.task == Task::verify_switching && c.p0 >= cx.num_plaquettes())
    throw ConfigError("p0 is not a plaquette index");
  if (c.task == Task::area_law) {
    for (double b : c.betas)
      if (!(4.0 * (c.m - 1) * b < 1))
        throw ConfigError("area-law bound needs beta < 1/(4(m-1)); got " + nlohmann::json(b).dump());
  }
  if (c.task == Task::estimate && c.series && c.format == OutputFormat::csv)
    throw ConfigError("per-sample series are written as JSONL only");
  if (task_uses_chain(c)) {
    if (c.chain.chains == 0) throw ConfigError("chain: chains must be positive");
    ChainSpec spec;
    spec.params = CouplingParams::uniform(0, cx.num_plaquettes());
    spec.sweeps = c.chain.sweeps;
    spec.burn_in = c.chain.burn_in;
    spec.thinning = c.chain.thinning;
    try {
      validate(spec, cx);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("chain: ") + e.what());
    }
  }
}

/// Loads the beta file (if any) relative to `base_dir` into plaquette_betas, then validates.
inline void resolve(ExperimentConfig& c, const std::filesystem::path& base_dir = {}) {
  if (!c.beta_file.empty()) {
    std::filesystem::path p(c.beta_file);
    if (p.is_relative()) p = base_dir / p;
    auto values = detail::read_beta_file(p);
    if (values.empty()) throw ConfigError("beta file " + p.string() + " holds no values");
    // A resolved config carries both; they must agree.
    if (!c.plaquette_betas.empty() && c.plaquette_betas != values)
      throw ConfigError("'plaquette_betas' disagrees with the content of " + p.string());
    c.plaquette_betas = std::move(values);
  }
  validate(c);
}

inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  auto c = config_from_json(j);
  resolve(c, base_dir);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

/// The config as embedded in output headers: everything that determines the payload.  The output path is left
/// out so a run can be redirected without changing its identity.
inline nlohmann::ordered_json resolved_json(const ExperimentConfig& c) {
  auto j = to_json(c);
  j["output"].erase("path");
  return j;
}

/// FNV-1a 64 of the compact resolved config, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = resolved_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Coupling parameter sets the task iterates over: one per-plaquette set, or one uniform set per beta.
inline std::vector<CouplingParams> parameter_sets(const ExperimentConfig& c, std::size_t num_plaquettes) {
  if (!c.plaquette_betas.empty()) return {CouplingParams::per_plaquette(c.plaquette_betas)};
  std::vector<CouplingParams> out;
  for (double b : c.betas) out.push_back(CouplingParams::uniform(b, num_plaquettes));
  return out;
}

}  // namespace z2lgt
