// z2lgt: config-driven runner for the Z2 gauge theory oracles, checks and estimators.

#include "z2lgt/config.hpp"
#include "z2lgt/runner.hpp"
#include "z2lgt/version.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

int run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out_path,
        unsigned threads, std::optional<std::string> format) {
  using namespace z2lgt;
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed) cfg.rng.seed = *seed;
    if (out_path) cfg.output_path = *out_path;
    if (format) cfg.format = parse_output_format(*format);
    validate(cfg);
  } catch (const Error& e) {
    std::cerr << "z2lgt: config error: " << e.what() << '\n';
    return kExitConfig;
  }

  RunReport rep;
  try {
    rep = run_task(cfg, threads == 0 ? 1 : threads);
  } catch (const SizeRefusal& e) {
    std::cerr << "z2lgt: refused: " << e.what() << '\n';
    return kExitRefusal;
  } catch (const Infeasible& e) {
    std::cerr << "z2lgt: infeasible: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "z2lgt: error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::string ts = utc_timestamp();
  if (cfg.output_path.empty() || cfg.output_path == "-") {
    write_report(std::cout, cfg, rep, ts);
  } else {
    std::ofstream out(cfg.output_path, std::ios::binary);
    if (!out) {
      std::cerr << "z2lgt: cannot write " << cfg.output_path << '\n';
      return kExitConfig;
    }
    write_report(out, cfg, rep, ts);
  }

  std::size_t failed = 0, refused = 0;
  for (const auto& r : rep.records) {
    const auto s = r.value("status", std::string());
    failed += s == "fail";
    refused += s == "refused" || s == "infeasible";
  }
  std::cerr << "z2lgt: " << to_string(cfg.task) << ": " << rep.records.size() << " records, " << failed
            << " failed, " << refused << " refused\n";
  return rep.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Z2 lattice gauge theory: exact oracles, couplings and Monte Carlo estimators"};
  app.set_version_flag("--version", z2lgt::kVersion);
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run the experiment described by a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path, format;
  unsigned threads = 1;
  run_cmd->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "override rng.seed");
  run_cmd->add_option("--out", out_path, "override output.path ('-' for stdout)");
  run_cmd->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
  run_cmd->add_option("--format", format, "override output.format")->check(CLI::IsMember({"csv", "jsonl"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : z2lgt::kExitConfig;
  }
  return run(config_path, seed, out_path, threads, format);
}
