//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/sim.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tedge/errors.hpp"
#include "tedge/registry.hpp"

using namespace tedge;
using nlohmann::json;

namespace {

const std::filesystem::path kFixtures = TEDGE_FIXTURE_DIR;

sim::SimulationConfig base_config() {
  sim::SimulationConfig config;
  config.seed = 42;
  config.fsbl_path = kFixtures / "fsbl.bin";
  config.image_path = kFixtures / "p_plus.bin";
  config.policy_path = kFixtures / "policy.txt";
  return config;
}

json parse_line(const std::string& line) { return json::parse(line); }

}  // namespace

TEST_CASE("the default lifecycle ends trusted with a working channel") {
  auto result = sim::run_lifecycle(base_config());
  CHECK(result.all_trusted);
  REQUIRE(result.decisions.size() == 1);
  CHECK(result.decisions[0].trusted());

  // Event schema: every line is JSON with exactly these keys.
  REQUIRE(!result.log.lines().empty());
  for (const std::string& line : result.log.lines()) {
    json j = parse_line(line);
    REQUIRE(j.is_object());
    CHECK(j.size() == 4);
    CHECK(j.contains("actor"));
    CHECK(j.contains("event"));
    CHECK(j.contains("payload"));
    CHECK(j.contains("stage"));
  }

  // Stages appear in lifecycle order.
  std::vector<std::string> stages;
  for (const auto& line : result.log.lines()) {
    stages.push_back(parse_line(line)["stage"]);
  }
  auto pos = [&](const char* s) {
    return std::find(stages.begin(), stages.end(), s) - stages.begin();
  };
  CHECK(pos("setup") < pos("release"));
  CHECK(pos("release") < pos("manufacture"));
  CHECK(pos("manufacture") < pos("provision"));
  CHECK(pos("provision") < pos("boot"));
  CHECK(pos("boot") < pos("attest"));

  // The sealed-channel probe crossed.
  bool probe_ok = false;
  for (const auto& line : result.log.lines()) {
    json j = parse_line(line);
    if (j["event"] == "sealed-roundtrip") probe_ok = j["payload"]["ok"];
  }
  CHECK(probe_ok);
}

TEST_CASE("lifecycle logs are byte-identical for a fixed seed") {
  auto a = sim::run_lifecycle(base_config());
  auto b = sim::run_lifecycle(base_config());
  CHECK(a.log.lines() == b.log.lines());

  auto config = base_config();
  config.seed = 43;
  auto c = sim::run_lifecycle(config);
  CHECK(a.log.lines() != c.log.lines());
}

TEST_CASE("booting the tampered image is detected by measurement alone") {
  auto config = base_config();
  config.image_path = kFixtures / "p_minus.bin";
  auto result = sim::run_lifecycle(config);
  CHECK_FALSE(result.all_trusted);
  REQUIRE(result.decisions.size() == 1);
  CHECK(result.decisions[0].reason == verifier::TrustReason::kUnknownProgram);
}

TEST_CASE("without a policy file the booted configuration is approved") {
  auto config = base_config();
  config.policy_path.clear();
  config.image_path = kFixtures / "p_minus.bin";
  // Self-approving mode: even the tampered image measures as approved.
  CHECK(sim::run_lifecycle(config).all_trusted);
}

TEST_CASE("the lifecycle scales to several devices") {
  auto config = base_config();
  config.device_count = 3;
  auto result = sim::run_lifecycle(config);
  CHECK(result.all_trusted);
  CHECK(result.decisions.size() == 3);
}

TEST_CASE("missing fixtures are operational errors") {
  auto config = base_config();
  config.fsbl_path = kFixtures / "no-such-file.bin";
  CHECK_THROWS_AS(sim::run_lifecycle(config), Error);

  auto bad_policy = base_config();
  bad_policy.policy_path = kFixtures / "no-such-policy.txt";
  CHECK_THROWS_AS(sim::run_lifecycle(bad_policy), Error);
}

TEST_CASE("the lifecycle runs against a live socket registry") {
  DeterministicRandom rng(77);
  auto log = std::filesystem::temp_directory_path() / "tedge-sim-serve.log";
  std::filesystem::remove(log);
  registry::RegistryService service(log, rng);
  registry::RegistryServer server(service);

  auto config = base_config();
  config.registry_address = server.address();
  auto result = sim::run_lifecycle(config);
  CHECK(result.all_trusted);
  // The remote service holds the registration made over the socket.
  crypto::Digest fsbl_digest =
      crypto::hash(as_view(sim::read_file(config.fsbl_path)));
  CHECK(service.lookup(1, fsbl_digest) != std::nullopt);
  server.stop();
}

TEST_CASE("attack runs grade the catalog and honour selection") {
  auto config = base_config();
  auto all = sim::run_attack(config, "all");
  CHECK(all.all_passed);
  CHECK(all.reports.size() >= 6);

  auto one = sim::run_attack(config, "replay-response");
  CHECK(one.all_passed);
  REQUIRE(one.reports.size() == 1);
  CHECK(one.reports[0].name == "replay-response");

  CHECK_THROWS_AS(sim::run_attack(config, "definitely-not-a-scenario"),
                  HarnessError);
}

TEST_CASE("attack runs can load the shipped catalog file") {
  auto result =
      sim::run_attack(base_config(), "all", kFixtures / "catalog.txt");
  CHECK(result.all_passed);
  CHECK(result.reports.size() ==
        sim::run_attack(base_config(), "all").reports.size());
}

TEST_CASE("inspect decodes the golden report and checks its signature") {
  std::string text =
      sim::inspect_report(kFixtures / "report.bin", kFixtures / "registry.log");
  json j = json::parse(text);

  std::ifstream manifest_in(kFixtures / "manifest.json");
  REQUIRE(manifest_in.good());
  json manifest = json::parse(manifest_in);

  CHECK(j["serial_number"] == manifest["serial_number"]);
  CHECK(j["fsbl_digest"] == manifest["fsbl_digest"]);
  CHECK(j["program_digest"] == manifest["program_digest"]);
  CHECK(j["session_signing_key"] == manifest["session_signing_key"]);
  CHECK(j["session_dh_key"] == manifest["session_dh_key"]);
  CHECK(j["suite_id"] == manifest["suite_id"]);
  CHECK(j["device_signature"] == manifest["device_signature"]);
  CHECK(j["signature"] == "valid");

  // Without a snapshot there is no signature judgement.
  json bare = json::parse(sim::inspect_report(kFixtures / "report.bin"));
  CHECK_FALSE(bare.contains("signature"));
}

TEST_CASE("inspect rejects damaged inputs") {
  auto tmp = std::filesystem::temp_directory_path();

  Bytes framed = sim::read_file(kFixtures / "report.bin");
  Bytes truncated(framed.begin(), framed.end() - 5);
  std::ofstream(tmp / "truncated.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(truncated.data()),
             static_cast<std::streamsize>(truncated.size()));
  CHECK_THROWS_AS(sim::inspect_report(tmp / "truncated.bin"), CodecError);

  // A validly framed non-report message is also refused.
  Bytes ack = wire::encode(wire::AckResponse{});
  std::ofstream(tmp / "ack.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(ack.data()),
             static_cast<std::streamsize>(ack.size()));
  CHECK_THROWS_AS(sim::inspect_report(tmp / "ack.bin"), CodecError);

  CHECK_THROWS_AS(sim::inspect_report(tmp / "does-not-exist.bin"), Error);
  CHECK_THROWS_AS(
      sim::inspect_report(kFixtures / "report.bin", tmp / "no-registry.log"),
      Error);
}

TEST_CASE("a tampered report is flagged against the registry snapshot") {
  Bytes framed = sim::read_file(kFixtures / "report.bin");
  // Flip one bit inside the measured program digest (frame offset: 4 length
  // + 1 opcode + 8 serial + 32 fsbl digest puts the program digest at 45).
  framed[45 + 3] ^= 0x01;
  auto tmp = std::filesystem::temp_directory_path() / "tampered-report.bin";
  std::ofstream(tmp, std::ios::binary)
      .write(reinterpret_cast<const char*>(framed.data()),
             static_cast<std::streamsize>(framed.size()));

  json j = json::parse(sim::inspect_report(tmp, kFixtures / "registry.log"));
  CHECK(j["signature"] == "invalid");
}

TEST_CASE("the golden transcript decodes and re-encodes identically") {
  Bytes raw = sim::read_file(kFixtures / "transcript.txt");
  std::string text(raw.begin(), raw.end());
  std::vector<Bytes> frames = wire::from_transcript(text);
  REQUIRE(frames.size() == 2);

  // Re-encode every message from its decoded form: byte-identical frames.
  std::vector<Bytes> re_encoded;
  for (const Bytes& frame : frames) {
    re_encoded.push_back(wire::encode(wire::decode(as_view(frame))));
  }
  CHECK(re_encoded == frames);
  CHECK(wire::to_transcript(re_encoded) == text);

  // The response inside the transcript carries the golden report.
  auto response =
      std::get<wire::ChallengeResponse>(wire::decode(as_view(frames[1])));
  Bytes report_frame = sim::read_file(kFixtures / "report.bin");
  CHECK(wire::encode(response.report) == report_frame);
}
