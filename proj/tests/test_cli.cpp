//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

// End-to-end checks of the installed command-line binary: exit codes and the
// JSON-lines event schema. The engine behind each subcommand is covered in
// depth by the library suites; this file only proves the thin shell wires
// arguments, streams, and exit statuses correctly.

#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using nlohmann::json;

namespace {

const std::string kCli = TEDGE_CLI_BIN;
const std::filesystem::path kFixtures = TEDGE_FIXTURE_DIR;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

/// Runs the CLI with the given arguments, capturing stdout+stderr merged.
RunResult run_cli(const std::string& args) {
  std::string command = kCli + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  std::array<char, 4096> chunk{};
  std::size_t n = 0;
  while ((n = fread(chunk.data(), 1, chunk.size(), pipe)) > 0) {
    result.output.append(chunk.data(), n);
  }
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string fx(const char* name) { return (kFixtures / name).string(); }

std::string lifecycle_args(const char* image, bool with_policy = true) {
  std::string args = "lifecycle --fsbl " + fx("fsbl.bin") + " --image " +
                     fx(image) + " --seed 42";
  if (with_policy) args += " --policy " + fx("policy.txt");
  return args;
}

std::vector<json> parse_lines(const std::string& output) {
  std::vector<json> lines;
  std::istringstream in(output);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(json::parse(line));
  }
  return lines;
}

}  // namespace

TEST_CASE("lifecycle with the approved image exits 0 and ends trusted") {
  RunResult run = run_cli(lifecycle_args("p_plus.bin"));
  CHECK(run.exit_code == 0);

  std::vector<json> events = parse_lines(run.output);
  REQUIRE(!events.empty());
  for (const json& e : events) {
    CHECK(e.size() == 4);
    CHECK(e.contains("actor"));
    CHECK(e.contains("event"));
    CHECK(e.contains("payload"));
    CHECK(e.contains("stage"));
  }
  const json& last = events.back();
  CHECK(last["event"] == "lifecycle-complete");
  CHECK(last["payload"]["all_trusted"] == true);
}

TEST_CASE("lifecycle with the tampered image exits 1") {
  RunResult run = run_cli(lifecycle_args("p_minus.bin"));
  CHECK(run.exit_code == 1);
  const json last = parse_lines(run.output).back();
  CHECK(last["payload"]["all_trusted"] == false);
}

TEST_CASE("lifecycle output is byte-identical for a fixed seed") {
  RunResult a = run_cli(lifecycle_args("p_plus.bin"));
  RunResult b = run_cli(lifecycle_args("p_plus.bin"));
  CHECK(a.output == b.output);
  CHECK(a.exit_code == b.exit_code);
}

TEST_CASE("lifecycle with a missing fixture exits 2 with a diagnostic") {
  RunResult run = run_cli("lifecycle --fsbl /no/such/file.bin --image " +
                          fx("p_plus.bin"));
  CHECK(run.exit_code == 2);
  CHECK(run.output.find("error:") != std::string::npos);
}

TEST_CASE("lifecycle can write its event log to a file") {
  auto out = std::filesystem::temp_directory_path() / "tedge-cli-events.jsonl";
  std::filesystem::remove(out);
  RunResult run =
      run_cli(lifecycle_args("p_plus.bin") + " --out " + out.string());
  CHECK(run.exit_code == 0);
  CHECK(run.output.empty());

  std::ifstream in(out);
  REQUIRE(in.good());
  std::stringstream contents;
  contents << in.rdbuf();
  std::vector<json> events = parse_lines(contents.str());
  CHECK(!events.empty());
  CHECK(events.back()["event"] == "lifecycle-complete");
}

TEST_CASE("attack all exits 0 with a fully passing summary") {
  RunResult run = run_cli("attack all --seed 9");
  CHECK(run.exit_code == 0);
  const json last = parse_lines(run.output).back();
  CHECK(last["event"] == "summary");
  CHECK(last["payload"]["failed"] == 0);
  CHECK(last["payload"]["passed"].get<int>() >= 6);
}

TEST_CASE("attack accepts a single scenario and a catalog file") {
  RunResult one = run_cli("attack replay-response");
  CHECK(one.exit_code == 0);
  const json last = parse_lines(one.output).back();
  CHECK(last["payload"]["passed"] == 1);

  RunResult from_file = run_cli("attack all --catalog " + fx("catalog.txt"));
  CHECK(from_file.exit_code == 0);
}

TEST_CASE("attack with an unknown scenario exits 2") {
  RunResult run = run_cli("attack no-such-scenario");
  CHECK(run.exit_code == 2);
  CHECK(run.output.find("unknown scenario") != std::string::npos);
}

TEST_CASE("inspect prints the golden report and validates its signature") {
  RunResult run = run_cli("inspect " + fx("report.bin") + " --registry " +
                          fx("registry.log"));
  CHECK(run.exit_code == 0);
  json report = json::parse(run.output);
  CHECK(report["signature"] == "valid");
  CHECK(report["serial_number"] == 1);
  CHECK(report["suite_id"] == 1);
}

TEST_CASE("inspect rejects undecodable files with exit 2") {
  auto garbage = std::filesystem::temp_directory_path() / "garbage.bin";
  std::ofstream(garbage, std::ios::binary) << "this is not a framed report";
  RunResult run = run_cli("inspect " + garbage.string());
  CHECK(run.exit_code == 2);
  CHECK(run.output.find("error:") != std::string::npos);

  RunResult missing = run_cli("inspect /no/such/report.bin");
  CHECK(missing.exit_code == 2);
}

TEST_CASE("registry serve binds, announces itself, and exits cleanly") {
  auto log = std::filesystem::temp_directory_path() / "tedge-cli-serve.log";
  std::filesystem::remove(log);
  RunResult run = run_cli("registry serve --registry 127.0.0.1:0 --out " +
                          log.string() + " --serve-for-ms 200");
  CHECK(run.exit_code == 0);

  std::vector<json> events = parse_lines(run.output);
  REQUIRE(!events.empty());
  CHECK(events.front()["event"] == "serving");
  std::string address = events.front()["payload"]["address"];
  CHECK(address.find("127.0.0.1:") == 0);
  CHECK(std::filesystem::exists(log));
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("lifecycle --image " + fx("p_plus.bin")).exit_code == 2);
  CHECK(run_cli("attack --bad-flag").exit_code == 2);
}

TEST_CASE("help exits 0") {
  RunResult run = run_cli("--help");
  CHECK(run.exit_code == 0);
  CHECK(run.output.find("lifecycle") != std::string::npos);
  CHECK(run.output.find("attack") != std::string::npos);
  CHECK(run.output.find("inspect") != std::string::npos);
}
