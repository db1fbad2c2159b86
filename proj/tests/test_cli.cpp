#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"
#include "nlv/cli/config.hpp"
#include "nlv/cli/manifest.hpp"
#include "nlv/cli/run.hpp"

using namespace nlv::cli;
namespace fs = std::filesystem;

namespace {

// Returns "line:col" of the ConfigError raised by the config, or "" if none.
std::string error_at(const std::string& text, const std::string& command = "verify-calculus",
                     std::string* message = nullptr) {
  try {
    load_config(text, "cfg.json", command);
  } catch (const ConfigError& e) {
    if (message) *message = e.what();
    return std::to_string(e.line()) + ":" + std::to_string(e.column());
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nlv_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("json positions are indexed by pointer") {
  const auto pos = index_positions("{\n  \"a\": {\"b\": [1,\n 2]},\n  \"c\": true\n}");
  CHECK(pos.at("/a") == std::pair{2, 3});
  CHECK(pos.at("/a/b") == std::pair{2, 9});
  CHECK(pos.at("/a/b/1") == std::pair{3, 2});
  CHECK(pos.at("/c") == std::pair{4, 3});
}

TEST_CASE("defaults load for every command") {
  for (const std::string& c : kCommands) {
    const ExperimentConfig cfg = load_config("{}", "empty.json", c);
    CHECK(cfg.command == c);
  }
  CHECK_THROWS(load_config("{}", "empty.json", "no-such-command"));
}

TEST_CASE("config errors point at the offending line") {
  std::string msg;
  CHECK(error_at("{\n  \"mesh\": {\"dim\": 1, \"elements\": 8},\n  \"kernel\": {\"order\": {\"preset\": \"sine\", "
                 "\"mean\": 0.5, \"amplitude\": 0.2, \"beta_hi\": 1.2}}\n}",
                 "verify-calculus", &msg)
            .starts_with("3:"));
  CHECK(msg.find("beta^* = 1.2 violates the bound beta^* < 1") != std::string::npos);
  CHECK(msg.starts_with("cfg.json:3:"));

  CHECK(error_at("{\n\n  \"mesh\": {\"elemnts\": 8}\n}") == "3:12");
  CHECK(error_at("{\n  \"mesh\": {\n    \"elements\": \"eight\"\n  }\n}") == "3:5");
  CHECK(error_at("{\n  \"kernel\": {\"horizon\": -0.1}\n}").starts_with("2:"));
  CHECK(error_at("{\n  \"mesh\": {\"elements\": 8,}\n}").starts_with("2:"));
  CHECK(error_at("[1, 2]") == "1:1");
  CHECK(error_at("{\"seed\": 3}").empty());
}

TEST_CASE("run writes artifacts and a manifest with hashes") {
  const fs::path dir = scratch("run");
  write(dir / "cfg.json", R"({"seed": 5, "mesh": {"elements": 8}, "experiment": {"fields": 5}})");
  RunArgs args;
  args.command = "verify-calculus";
  args.config = dir / "cfg.json";
  args.out = dir / "out";
  const RunResult r = run(args);
  REQUIRE_MESSAGE(r.status == 0, r.message);
  CHECK(r.failed.empty());

  const auto man = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(man["command"] == "verify-calculus");
  CHECK(man["seed"] == 5);
  CHECK(man["status"] == 0);
  CHECK(man["deterministic"] == true);
  REQUIRE(man["files"].size() + 1 == r.files.size());
  for (const auto& f : man["files"]) {
    const fs::path p = dir / "out" / f["path"].get<std::string>();
    REQUIRE(fs::exists(p));
    CHECK(f["sha256"] == sha256_file(p));
    CHECK(f["bytes"] == fs::file_size(p));
  }

  args.seed = 6;
  args.out = dir / "out6";
  const RunResult r6 = run(args);
  CHECK(r6.status == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "out6" / "manifest.json"))["seed"] == 6);
  fs::remove_all(dir);
}

TEST_CASE("run reports config problems with status 2") {
  const fs::path dir = scratch("bad");
  write(dir / "bad.json", "{\n  \"kernel\": {\"horizon\": \"wide\"}\n}");
  RunArgs args;
  args.command = "solve";
  args.config = dir / "bad.json";
  args.out = dir / "out";
  const RunResult r = run(args);
  CHECK(r.status == 2);
  CHECK(r.message.find("bad.json:2:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));

  args.config = dir / "missing.json";
  CHECK(run(args).status == 2);
  fs::remove_all(dir);
}
