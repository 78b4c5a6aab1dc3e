//
// Copyright 2026 the qedge authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "qedge/emulator.hpp"
#include "qedge/proxy_server.hpp"
#include "qedge/scenario.hpp"

namespace {

using namespace qedge;

constexpr int kExitOk = 0;
constexpr int kExitDomainError = 1;
constexpr int kExitUsageError = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

Scenario resolve_scenario(const std::string& name) {
  if (name == "static") return static_scenario();
  if (name == "dynamic") return dynamic_scenario();
  const auto dir = std::filesystem::path(name).parent_path().string();
  return load_scenario(read_file(name), dir.empty() ? "." : dir);
}

struct SimulateArgs {
  std::string scenario = "static";
  std::string router;
  double alpha = 1.0;
  bool alpha_given = false;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "markdown";
  bool per_phase = false;
  double beta = 0.3;
  int violation_limit = 1;
  std::size_t refresh_period = 100;
  double nodeport_overhead_ms = 0.0;
};

RouterKind make_router_kind(const SimulateArgs& args) {
  if (args.router == "qedge") return RouterKind::qedge();
  if (args.router == "nodeport") return RouterKind::nodeport();
  if (args.router == "proximity") {
    return RouterKind::proximity(args.alpha, args.refresh_period);
  }
  throw CLI::ValidationError("--router",
                             "must be qedge, nodeport or proximity");
}

PoolConfig make_pool_config(const SimulateArgs& args) {
  PoolConfig config;
  config.ewma_beta = args.beta;
  config.violation_threshold = args.violation_limit <= 0
                                   ? PoolConfig::kViolationRuleDisabled
                                   : args.violation_limit;
  return config;
}

ReportFormat parse_format(const std::string& format) {
  if (format == "csv") return ReportFormat::csv;
  if (format == "markdown") return ReportFormat::markdown;
  throw CLI::ValidationError("--format", "must be markdown or csv");
}

int run_simulate(const SimulateArgs& args) {
  Scenario scenario = resolve_scenario(args.scenario);
  scenario.nodeport_overhead_ms = args.nodeport_overhead_ms;
  const RouterKind kind = make_router_kind(args);
  const auto records = run(scenario, kind, args.seed, make_pool_config(args));
  if (!args.out.empty()) write_file(args.out, export_records_csv(records));
  const auto report = summarize(records, kind.label());
  std::cout << export_report(report, parse_format(args.format));
  if (args.per_phase) std::cout << export_phase_distribution_csv(report);
  return kExitOk;
}

int run_compare(const SimulateArgs& args) {
  const std::vector<RouterKind> kinds{
      RouterKind::nodeport(),
      RouterKind::proximity(0.8, args.refresh_period),
      RouterKind::proximity(1.0, args.refresh_period),
      RouterKind::qedge(),
  };
  const PoolConfig pool = make_pool_config(args);
  std::vector<ComparisonRow> rows;

  auto report_for = [&](const std::string& scenario_name,
                        const RouterKind& kind) {
    Scenario scenario = resolve_scenario(scenario_name);
    scenario.nodeport_overhead_ms = args.nodeport_overhead_ms;
    return summarize(run(scenario, kind, args.seed, pool), kind.label());
  };

  if (args.scenario == "both") {
    for (const auto& kind : kinds) {
      rows.push_back({kind.label(), report_for("static", kind),
                      report_for("dynamic", kind)});
    }
    std::cout << export_comparison(rows, parse_format(args.format));
  } else {
    for (const auto& kind : kinds) {
      rows.push_back({kind.label(), report_for(args.scenario, kind),
                      std::nullopt});
    }
    std::cout << export_comparison(rows, parse_format(args.format),
                                   args.scenario);
  }
  return kExitOk;
}

struct ServeArgs {
  std::string bind = "127.0.0.1:8080";
  std::string registry;
  std::vector<std::string> services;
  std::string router = "qedge";
  double alpha = 1.0;
  double beta = 0.3;
  int violation_limit = 1;
  std::size_t refresh_period = 100;
  bool fallback = false;
  bool no_watch = false;
  long poll_ms = 1000;
  std::string header = "X-Qedge-Service";
};

int run_serve(const ServeArgs& args) {
  ProxyConfig config;
  const auto colon = args.bind.rfind(':');
  if (colon == std::string::npos) {
    throw CLI::ValidationError("--bind", "expected host:port");
  }
  config.bind_host = args.bind.substr(0, colon);
  config.bind_port = std::stoi(args.bind.substr(colon + 1));
  config.registry_file = args.registry;
  config.watch_registry = !args.no_watch;
  config.poll_interval = std::chrono::milliseconds(args.poll_ms);
  config.fallback_on_empty_pool = args.fallback;
  config.service_header = args.header;
  config.pool.ewma_beta = args.beta;
  config.pool.violation_threshold = args.violation_limit <= 0
                                        ? PoolConfig::kViolationRuleDisabled
                                        : args.violation_limit;
  for (const auto& svc : args.services) {
    const auto eq = svc.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--service", "expected name=slo-ms");
    }
    config.services.push_back(ServiceSpec{
        ServiceName{svc.substr(0, eq)},
        {std::stod(svc.substr(eq + 1))}});
  }
  if (args.router == "qedge") {
    config.router = RouterKind::qedge();
  } else if (args.router == "nodeport") {
    config.router = RouterKind::nodeport();
  } else if (args.router == "proximity") {
    config.router = RouterKind::proximity(args.alpha, args.refresh_period);
  } else {
    throw CLI::ValidationError("--router",
                               "must be qedge, nodeport or proximity");
  }

  ProxyServer server(std::move(config));
  server.start();
  std::cerr << "qedge proxy listening on " << args.bind.substr(0, colon) << ":"
            << server.port() << " (service header: " << args.header << ")\n";
  server.wait();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qedge: QoS-aware load-balancing proxy and continuum "
               "emulation harness"};
  app.require_subcommand(1);
  app.set_config("--config")->envname("QEDGE_CONFIG");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run one scenario against one router and report metrics");
  simulate->add_option("--scenario", sim.scenario,
                       "static, dynamic, or a scenario file");
  simulate->add_option("--router", sim.router, "qedge, nodeport or proximity")
      ->required();
  CLI::Option* alpha_opt = simulate->add_option(
      "--alpha", sim.alpha, "proximity blend in [0,1] (proximity only)");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--out", sim.out, "write the request records CSV here");
  simulate->add_option("--format", sim.format, "markdown or csv");
  simulate->add_flag("--per-phase", sim.per_phase,
                     "also print per-phase instance counts (CSV)");
  simulate->add_option("--beta", sim.beta, "EWMA smoothing factor (qedge)");
  simulate->add_option("--violation-limit", sim.violation_limit,
                       "consecutive violations before ejection; 0 disables");
  simulate->add_option("--refresh-period", sim.refresh_period,
                       "proximity probe cadence in requests");
  simulate->add_option("--nodeport-overhead-ms", sim.nodeport_overhead_ms,
                       "extra per-request cost applied to nodeport");

  SimulateArgs cmp;
  cmp.scenario = "both";
  CLI::App* compare = app.add_subcommand(
      "compare",
      "Run nodeport, proximity 0.8/1.0 and qedge on the same scenario");
  compare->add_option("--scenario", cmp.scenario,
                      "static, dynamic, both, or a scenario file");
  compare->add_option("--seed", cmp.seed, "RNG seed");
  compare->add_option("--format", cmp.format, "markdown or csv");
  compare->add_option("--beta", cmp.beta, "EWMA smoothing factor (qedge)");
  compare->add_option("--violation-limit", cmp.violation_limit,
                      "consecutive violations before ejection; 0 disables");
  compare->add_option("--refresh-period", cmp.refresh_period,
                      "proximity probe cadence in requests");
  compare->add_option("--nodeport-overhead-ms", cmp.nodeport_overhead_ms,
                      "extra per-request cost applied to nodeport");

  CLI::App* topology =
      app.add_subcommand("topology", "Dump or validate topology configs");
  topology->require_subcommand(1);
  std::string dump_out;
  CLI::App* dump = topology->add_subcommand(
      "dump", "Print the built-in default topology config");
  dump->add_option("--out", dump_out, "write to a file instead of stdout");
  std::string validate_path;
  CLI::App* validate =
      topology->add_subcommand("validate", "Check a topology config file");
  validate->add_option("file", validate_path, "topology config to check")
      ->required();

  ServeArgs srv;
  CLI::App* serve =
      app.add_subcommand("serve", "Run the wire-level reverse proxy");
  serve->add_option("--bind", srv.bind, "listen address host:port");
  serve->add_option("--registry", srv.registry, "backend registry file")
      ->required();
  serve
      ->add_option("--service", srv.services,
                   "service spec name=slo-ms (repeatable)")
      ->required();
  serve->add_option("--router", srv.router, "qedge, nodeport or proximity");
  serve->add_option("--alpha", srv.alpha, "proximity blend in [0,1]");
  serve->add_option("--beta", srv.beta, "EWMA smoothing factor");
  serve->add_option("--violation-limit", srv.violation_limit,
                    "consecutive violations before ejection; 0 disables");
  serve->add_option("--refresh-period", srv.refresh_period,
                    "proximity probe cadence in requests");
  serve->add_flag("--fallback", srv.fallback,
                  "route to the best estimate when the pool is empty");
  serve->add_flag("--no-watch", srv.no_watch,
                  "read the registry once instead of polling");
  serve->add_option("--poll-ms", srv.poll_ms, "registry poll interval");
  serve->add_option("--header", srv.header, "service selection header name");

  std::string records_path;
  std::string report_format = "markdown";
  bool report_per_phase = false;
  CLI::App* report =
      app.add_subcommand("report", "Summarize a request records CSV");
  report->add_option("--records", records_path, "records CSV from simulate")
      ->required();
  report->add_option("--format", report_format, "markdown or csv");
  report->add_flag("--per-phase", report_per_phase,
                   "also print per-phase instance counts (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsageError;
  }

  try {
    if (app.got_subcommand(simulate)) {
      sim.alpha_given = alpha_opt->count() > 0;
      if (sim.alpha_given && sim.router != "proximity") {
        std::cerr << "error: --alpha only applies to --router proximity\n";
        return kExitUsageError;
      }
      if (!sim.alpha_given && sim.router == "proximity") {
        std::cerr << "warning: --alpha not given; defaulting to 1.0\n";
      }
      return run_simulate(sim);
    }
    if (app.got_subcommand(compare)) return run_compare(cmp);
    if (app.got_subcommand(topology)) {
      if (topology->got_subcommand(dump)) {
        const std::string text = dump_topology(default_topology());
        if (dump_out.empty()) {
          std::cout << text;
        } else {
          write_file(dump_out, text);
        }
        return kExitOk;
      }
      try {
        load_topology(read_file(validate_path));
      } catch (const TopologyError& e) {
        std::cerr << "invalid topology:\n" << e.what() << "\n";
        return kExitDomainError;
      }
      std::cout << "ok\n";
      return kExitOk;
    }
    if (app.got_subcommand(serve)) return run_serve(srv);
    if (app.got_subcommand(report)) {
      const auto records = parse_records_csv(read_file(records_path));
      const auto summary = summarize(records, "records");
      std::cout << export_report(summary, parse_format(report_format));
      if (report_per_phase) {
        std::cout << export_phase_distribution_csv(summary);
      }
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsageError;
}
