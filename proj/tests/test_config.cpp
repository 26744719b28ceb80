#include "z2lgt/config.hpp"
#include "z2lgt/runner.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace z2lgt;
namespace fs = std::filesystem;

namespace {

const char* kCube = R"({
  "task": "verify-current-expansion",
  "complex": {"m": 3, "extents": [2, 2, 2]},
  "loops": [{"kind": "plaquette", "index": 0}],
  "betas": [0.1, 0.5, 1.0]
})";

const char* kEstimate = R"({
  "task": "estimate",
  "complex": {"m": 3, "extents": [2, 2, 2]},
  "loops": [{"kind": "rectangle", "corner": [0, 0, 0], "axes": [0, 1], "width": 1, "height": 1}],
  "beta": 0.3,
  "routes": ["direct", "cluster", "current-squared"],
  "chain": {"sweeps": 400, "burn_in": 40, "chains": 4},
  "rng": {"seed": 5}
})";

nlohmann::ordered_json edit(const char* text) { return nlohmann::ordered_json::parse(text); }

ExperimentConfig parse_json(const nlohmann::ordered_json& j) { return parse_config(j.dump()); }

std::string render(const ExperimentConfig& c, const RunReport& rep, const std::string& ts) {
  std::ostringstream os;
  write_report(os, c, rep, ts);
  return os.str();
}

std::string drop_first_line(const std::string& s) { return s.substr(s.find('\n') + 1); }

}  // namespace

TEST_CASE("config parsing and defaults") {
  const auto c = parse_config(kCube);
  CHECK(c.task == Task::verify_current_expansion);
  CHECK(c.extents == std::vector<int>{2, 2, 2});
  CHECK(c.betas == std::vector<double>{0.1, 0.5, 1.0});
  CHECK(c.format == OutputFormat::jsonl);
  const auto e = parse_config(kEstimate);
  CHECK(e.betas == std::vector<double>{0.3});
  CHECK(e.chain.thinning == 1);
  CHECK(e.routes.size() == 3);
  auto sw = edit(kCube);
  sw["task"] = "verify-switching";
  CHECK(parse_json(sw).functionals.size() == 3);
  CHECK(parse_json(sw).truncation == 4);
  auto cp = edit(kCube);
  cp["task"] = "verify-coupling";
  CHECK(parse_json(cp).steps.size() == 7);
}

TEST_CASE("config round trip") {
  std::vector<ExperimentConfig> all{parse_config(kCube), parse_config(kEstimate)};
  for (const auto& entry : fs::directory_iterator(Z2LGT_CONFIG_DIR))
    if (entry.path().extension() == ".json") all.push_back(load_config(entry.path()));
  CHECK(all.size() >= 10);
  for (const auto& c : all) {
    INFO(to_json(c).dump());
    const auto back = config_from_json(to_json(c));
    CHECK(back == c);
    CHECK(to_json(back) == to_json(c));
  }
}

TEST_CASE("config validation errors") {
  auto bad = [](auto mutate) {
    auto j = edit(kEstimate);
    mutate(j);
    CHECK_THROWS_AS(parse_json(j), ConfigError);
  };
  bad([](auto& j) { j["chain"]["sweeps"] = 0; });
  bad([](auto& j) { j["chain"]["burn_in"] = 401; });
  bad([](auto& j) { j["chain"]["chains"] = 0; });
  bad([](auto& j) { j["chain"]["thinning"] = 0; });
  bad([](auto& j) { j["task"] = "simulate"; });
  bad([](auto& j) { j["colour"] = "blue"; });
  bad([](auto& j) { j["complex"]["extents"] = {2, 2}; });
  bad([](auto& j) { j["complex"]["extents"] = {2, 0, 2}; });
  bad([](auto& j) { j["betas"] = {0.1}; });
  bad([](auto& j) { j.erase("beta"); });
  bad([](auto& j) { j["beta"] = -0.1; });
  bad([](auto& j) { j["beta"] = "hot"; });
  bad([](auto& j) { j["routes"] = {"worm"}; });
  bad([](auto& j) { j["loops"] = nlohmann::ordered_json::array(); });
  bad([](auto& j) { j["loops"][0]["width"] = 5; });
  bad([](auto& j) { j["loops"][0] = {{"kind", "edges"}, {"edges", {{0, 1}}}}; });
  bad([](auto& j) { j["loops"][0] = {{"kind", "edges"}, {"edges", {{0, 2}}}}; });
  bad([](auto& j) { j["loops"][0] = {{"kind", "plaquette"}, {"index", 6}}; });
  bad([](auto& j) { j["loops"][0] = {{"kind", "circle"}}; });
  bad([](auto& j) { j["plaquette_betas"] = {0.1, 0.2}; j.erase("beta"); });
  bad([](auto& j) { j["series"] = true; j["output"] = {{"format", "csv"}}; });
  bad([](auto& j) { j["output"] = {{"format", "xml"}}; });
  bad([](auto& j) {
    j["task"] = "griffiths";
    j["plaquette_betas"] = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    j.erase("beta");
    j.erase("routes");
  });
  bad([](auto& j) {
    j["task"] = "verify-coupling";
    j["steps"] = {"lift"};
    j.erase("routes");
  });
  bad([](auto& j) {
    j["task"] = "area-law";
    j["beta"] = 0.2;
    j.erase("routes");
  });
  bad([](auto& j) {
    j["task"] = "potential";
    j["R"] = 2;
    j["T"] = {1};
    j.erase("routes");
  });
  bad([](auto& j) {
    j["task"] = "covariance";
    j["loops"].push_back(j["loops"][0]);
    j.erase("routes");
  });
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("edge-list loops") {
  auto j = edit(kCube);
  const auto cx = build_complex(3, {2, 2, 2});
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& inc : cx.plaquette_boundary(4)) edges.push_back({inc.index, inc.sign});
  j["loops"] = {{{"kind", "edges"}, {"edges", edges}}, {{"kind", "empty"}}};
  const auto c = parse_json(j);
  const auto built = c.loops[0].build(cx), want = Loop::plaquette_boundary(cx, 4);
  CHECK(std::ranges::equal(built.coefficients(), want.coefficients()));
  CHECK(c.loops[1].build(cx).is_empty());
}

TEST_CASE("per-plaquette couplings from a file") {
  const fs::path dir = fs::temp_directory_path() / "z2lgt_test_config";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "betas.txt") << "# cube\n0.1 0.2 0.3\n0.4 0.05 0.5\n";
    auto j = edit(kCube);
    j.erase("betas");
    j["beta_file"] = "betas.txt";
    std::ofstream(dir / "c.json") << j.dump(2);
  }
  const auto c = load_config(dir / "c.json");
  CHECK(c.plaquette_betas == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.05, 0.5});
  CHECK(parameter_sets(c, 6).size() == 1);
  CHECK_FALSE(parameter_sets(c, 6)[0].is_uniform());
  // A resolved config still resolves.
  auto again = config_from_json(to_json(c));
  resolve(again, dir);
  CHECK(again == c);
  again.plaquette_betas[0] = 0.11;
  CHECK_THROWS_AS(resolve(again, dir), ConfigError);

  std::ofstream(dir / "betas.txt") << "0.1 0.2 x\n";
  CHECK_THROWS_AS(load_config(dir / "c.json"), ConfigError);
  std::ofstream(dir / "betas.txt") << "0.1 0.2\n";
  CHECK_THROWS_AS(load_config(dir / "c.json"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("config hash") {
  auto a = parse_config(kEstimate);
  auto b = a;
  b.output_path = "elsewhere.jsonl";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.rng.seed = 6;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("current expansion run on the unit cube") {
  const auto c = parse_config(kCube);
  const auto rep = run_task(c);
  REQUIRE(rep.records.size() == 3);
  for (const auto& r : rep.records) CHECK(r["status"] == "pass");
  CHECK(rep.exit_code() == kExitOk);
}

TEST_CASE("output headers and reproducibility") {
  auto c = parse_config(kEstimate);
  const auto rep1 = run_task(c, 1), rep4 = run_task(c, 4);
  CHECK(rep1.records == rep4.records);
  const auto a = render(c, rep1, "2000-01-01T00:00:00Z"), b = render(c, rep4, "2030-06-30T12:00:00Z");
  CHECK(a != b);
  CHECK(drop_first_line(a) == drop_first_line(b));

  std::istringstream in(a);
  std::string line;
  std::getline(in, line);
  CHECK(nlohmann::json::parse(line).at("timestamp") == "2000-01-01T00:00:00Z");
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line).at("header");
  CHECK(header.at("config_hash") == config_hash(c));
  CHECK(header.at("rng_algorithm") == kRngAlgorithm);
  CHECK(header.at("version") == kVersion);
  CHECK(config_from_json(header.at("config")) == [&] {
    auto copy = c;
    copy.output_path.clear();
    return copy;
  }());
  std::size_t records = 0;
  while (std::getline(in, line)) {
    CHECK(nlohmann::json::parse(line).contains("status"));
    ++records;
  }
  CHECK(records == 3);

  c.format = OutputFormat::csv;
  const auto csv = render(c, rep1, "t");
  CHECK(csv.rfind("# timestamp: t\n", 0) == 0);
  CHECK(csv.find("# config_hash: " + config_hash(c)) != std::string::npos);
  CHECK(csv.find("# rng_algorithm: ") != std::string::npos);
  CHECK(csv.find("# version: ") != std::string::npos);
  CHECK(csv.find("\ntask,record,complex,gamma,beta,route,value,se,batches,samples,chains,note,status\n") !=
        std::string::npos);
}

TEST_CASE("per-sample series") {
  auto j = edit(kEstimate);
  j["series"] = true;
  j["routes"] = {"direct"};
  j["chain"] = {{"sweeps", 20}, {"burn_in", 10}, {"thinning", 5}, {"chains", 2}};
  const auto rep = run_task(parse_json(j));
  REQUIRE(rep.records.size() == 5);
  CHECK(rep.records[0]["record"] == "series");
  CHECK(rep.records[0]["chain"] == 0);
  CHECK(rep.records[0]["sweep"] == 15);
  CHECK(rep.records[1]["sweep"] == 20);
  CHECK(rep.records[2]["chain"] == 1);
  CHECK(rep.records[4]["record"] == "estimate");
  CHECK(rep.records[4]["samples"] == 4);
}

TEST_CASE("refusals and exit codes") {
  auto j = edit(kCube);
  j["task"] = "oracle-wilson";
  j["complex"]["extents"] = {5, 5, 5};
  const auto rep = run_task(parse_json(j));
  REQUIRE(rep.records.size() == 1);
  CHECK(rep.records[0]["status"] == "refused");
  CHECK(rep.exit_code() == kExitRefusal);

  RunReport fake;
  fake.records = {{{"status", "pass"}}, {{"status", "infeasible"}}};
  CHECK(fake.exit_code() == kExitConfig);
  fake.records.push_back({{"status", "refused"}});
  CHECK(fake.exit_code() == kExitRefusal);
  fake.records.push_back({{"status", "fail"}});
  CHECK(fake.exit_code() == kExitCheckFailed);
}

TEST_CASE("CSV quoting") {
  CHECK(detail::csv_field(nullptr) == "");
  CHECK(detail::csv_field("plain") == "plain");
  CHECK(detail::csv_field("a,b") == "\"a,b\"");
  CHECK(detail::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(detail::csv_field("x,\"y\"") == "\"x,\"\"y\"\"\"");
  CHECK(detail::csv_field(0.25) == "0.25");
  CHECK(detail::csv_field(true) == "true");
}
