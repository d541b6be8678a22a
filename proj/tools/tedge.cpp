//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Thin by design: every behaviour lives in the
// library; this file only parses flags, routes output and maps results to
// exit codes (0 success/trusted, 1 untrusted or failed expectation,
// 2 usage, missing fixture or decode errors).
//

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "tedge/errors.hpp"
#include "tedge/registry.hpp"
#include "tedge/sim.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

/// Event logs go to --out when given, stdout otherwise.
void write_log(const tedge::sim::EventLog& log,
               const std::filesystem::path& out_path) {
  if (out_path.empty()) {
    log.write(std::cout);
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    throw tedge::Error("cannot write log: " + out_path.string());
  }
  log.write(out);
}

std::uint16_t parse_port(const std::string& address) {
  auto colon = address.rfind(':');
  std::string host =
      colon == std::string::npos ? address : address.substr(0, colon);
  if (host != "127.0.0.1" && host != "localhost") {
    throw tedge::Error("registry serves loopback only, got host " + host);
  }
  if (colon == std::string::npos) {
    throw tedge::Error("expected host:port, got " + address);
  }
  int port = std::stoi(address.substr(colon + 1));
  if (port < 0 || port > 65535) {
    throw tedge::Error("port out of range: " + address);
  }
  return static_cast<std::uint16_t>(port);
}

int cmd_lifecycle(const tedge::sim::SimulationConfig& config,
                  const std::filesystem::path& out_path) {
  tedge::sim::LifecycleResult result = tedge::sim::run_lifecycle(config);
  write_log(result.log, out_path);
  return result.all_trusted ? 0 : 1;
}

int cmd_attack(const tedge::sim::SimulationConfig& config,
               const std::string& scenario,
               const std::filesystem::path& catalog,
               const std::filesystem::path& out_path) {
  tedge::sim::AttackResult result =
      tedge::sim::run_attack(config, scenario, catalog);
  write_log(result.log, out_path);
  return result.all_passed ? 0 : 1;
}

int cmd_inspect(const std::filesystem::path& report,
                const std::filesystem::path& registry_log,
                const std::filesystem::path& out_path) {
  std::string text = tedge::sim::inspect_report(report, registry_log);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw tedge::Error("cannot write: " + out_path.string());
    out << text;
  }
  return 0;
}

int cmd_registry_serve(const std::string& bind_address,
                       const std::filesystem::path& log_path,
                       std::uint64_t seed, int serve_for_ms) {
  tedge::DeterministicRandom rng(seed);
  tedge::registry::RegistryService service(log_path, rng);
  tedge::registry::RegistryServer server(service, parse_port(bind_address));

  tedge::sim::EventLog log;
  log.emit("serve", "registry", "serving",
           {{"address", server.address()},
            {"service_key",
             tedge::to_hex(tedge::ByteView(service.service_key().bytes))}});
  log.write(std::cout);
  std::cout.flush();

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  auto started = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (serve_for_ms > 0 &&
        std::chrono::steady_clock::now() - started >=
            std::chrono::milliseconds(serve_for_ms)) {
      break;
    }
  }
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"t-edge: emulated trusted-edge attestation testbed"};
  app.require_subcommand(1);

  tedge::sim::SimulationConfig config;
  std::filesystem::path out_path;
  std::filesystem::path catalog_path;
  std::filesystem::path registry_snapshot;
  std::filesystem::path report_path;
  std::string scenario = "all";
  std::string bind_address = "127.0.0.1:0";
  std::filesystem::path serve_log = "registry.log";
  int serve_for_ms = 0;

  CLI::App* lifecycle = app.add_subcommand(
      "lifecycle", "manufacture, provision, boot and attest devices");
  lifecycle->add_option("--seed", config.seed, "rng seed for the whole run");
  lifecycle->add_option("--devices", config.device_count,
                        "number of devices to take through the lifecycle");
  lifecycle->add_option("--registry", config.registry_address,
                        "host:port of a live registry (default: in-process)");
  lifecycle->add_option("--fsbl", config.fsbl_path, "bootloader code fixture")
      ->required();
  lifecycle->add_option("--image", config.image_path,
                        "FPGA configuration the devices boot")
      ->required();
  lifecycle->add_option("--policy", config.policy_path,
                        "approved-measurement policy file "
                        "(default: approve the booted configuration)");
  lifecycle->add_option("--os", config.os_payload_path,
                        "secure-OS payload file (default: built-in constant)");
  lifecycle->add_option("--out", out_path, "write the event log here");

  CLI::App* attack =
      app.add_subcommand("attack", "run adversary scenarios and grade them");
  attack->add_option("scenario", scenario,
                     "scenario name from the catalog, or 'all'");
  attack->add_option("--seed", config.seed, "rng seed base");
  attack->add_option("--catalog", catalog_path,
                     "scenario catalog file (default: built-in catalog)");
  attack->add_option("--out", out_path, "write the event log here");

  CLI::App* inspect =
      app.add_subcommand("inspect", "decode an attestation report file");
  inspect->add_option("report", report_path, "framed report file")->required();
  inspect->add_option("--registry", registry_snapshot,
                      "registry log snapshot for signature verification");
  inspect->add_option("--out", out_path, "write the JSON here");

  CLI::App* registry_cmd =
      app.add_subcommand("registry", "registry service operations");
  registry_cmd->require_subcommand(1);
  CLI::App* serve = registry_cmd->add_subcommand(
      "serve", "serve the provisioning wire protocol on loopback");
  serve->add_option("--registry", bind_address, "host:port to bind");
  serve->add_option("--out", serve_log, "persistence log path");
  serve->add_option("--seed", config.seed, "rng seed for fresh service keys");
  serve->add_option("--serve-for-ms", serve_for_ms,
                    "stop after this many milliseconds (0 = run until "
                    "SIGINT/SIGTERM)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (lifecycle->parsed()) return cmd_lifecycle(config, out_path);
    if (attack->parsed()) {
      return cmd_attack(config, scenario, catalog_path, out_path);
    }
    if (inspect->parsed()) {
      return cmd_inspect(report_path, registry_snapshot, out_path);
    }
    if (serve->parsed()) {
      return cmd_registry_serve(bind_address, serve_log, config.seed,
                                serve_for_ms);
    }
  } catch (const tedge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
