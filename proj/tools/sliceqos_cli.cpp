// Command-line front end: run scenarios, validate documents, print plans.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sliceqos/orchestrator.hpp"
#include "sliceqos/scenarios.hpp"
#include "sliceqos/topology_json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sliceqos;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

Scenario load(const std::string& scenario_arg, const std::string& topology_arg) {
  std::optional<json> topology;
  if (!topology_arg.empty()) topology = read_json_file(topology_arg);
  const json* topo = topology ? &*topology : nullptr;

  const std::string prefix = "preset:";
  if (scenario_arg.rfind(prefix, 0) == 0) {
    const std::string name = scenario_arg.substr(prefix.size());
    const json preset_topology = preset_topology_document(name);
    return parse_scenario(preset_scenario_document(name), {}, topo ? topo : &preset_topology);
  }
  return load_scenario_file(scenario_arg, topo);
}

FlowSpec parse_flow(const json& doc) {
  try {
    FlowSpec f;
    f.id = doc.value("id", std::string("flow"));
    f.kind = FlowKind::Ran;
    f.src = doc.at("src").get<std::string>();
    f.dst = doc.at("dst").get<std::string>();
    f.gbr_mbps = doc.at("gbr_mbps").get<double>();
    f.demand_mbps = doc.value("demand_mbps", f.gbr_mbps);
    if (doc.contains("dscp") && !doc.at("dscp").is_null()) f.dscp = Dscp(doc.at("dscp").get<int>());
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

// Telemetry in a flow document: {"telemetry": [{"switch", "port", "dscp_rates_mbps": {"39": 90}, "unmarked_mbps"}]}.
TelemetrySnapshot parse_telemetry(const json& doc) {
  TelemetrySnapshot snap;
  if (!doc.contains("telemetry")) return snap;
  try {
    SamplingSettings exact;
    exact.n = 1;
    for (const auto& entry : doc.at("telemetry")) {
      const PortRef iface{entry.at("switch").get<std::string>(), entry.at("port").get<std::string>()};
      DscpRates rates;
      const json marked = entry.value("dscp_rates_mbps", json::object());
      for (const auto& [key, value] : marked.items()) {
        rates.marked.at(static_cast<std::size_t>(Dscp(std::stoi(key)).value())) = value.get<double>();
      }
      rates.unmarked = entry.value("unmarked_mbps", 0.0);
      snap[iface] = sample_flows(iface, rates, exact, 0);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  } catch (const std::invalid_argument&) {
    throw Error(Errc::ParseError, "telemetry DSCP keys must be integers");
  }
  return snap;
}

int run(const std::string& scenario_arg, const std::string& topology_arg, bool no_orchestrator, const std::string& out,
        std::optional<std::uint64_t> seed, std::optional<int> tick_ms) {
  Scenario sc = load(scenario_arg, topology_arg);
  if (no_orchestrator) sc.orchestrator_enabled = false;
  if (seed) sc.seed = *seed;
  if (tick_ms) {
    if (*tick_ms <= 0) throw Error(Errc::InvalidConfig, "--tick-ms must be positive");
    sc.tick_ms = *tick_ms;
  }
  const ExperimentResult result = run_experiment(sc);
  write_metrics_csv(result.series, result.summary, out);

  json events = json::array();
  for (const auto& e : result.events) events.push_back(to_json(e));
  std::ofstream ev(fs::path(out) / "events.json");
  ev << events.dump(2) << '\n';
  if (!ev) throw Error(Errc::IoError, "cannot write events.json");

  std::cout << sc.name << ": " << result.series.records.size() << " ticks, " << sc.flows.size() << " flows, "
            << result.events.size() << " control events -> " << out << '\n';
  return kOk;
}

int validate(const std::string& topology_arg, const std::string& scenario_arg) {
  const Fabric fabric = build_fabric(read_json_file(topology_arg));
  std::cout << "topology ok: " << fabric.switches().size() << " switches, " << fabric.endpoints().size()
            << " endpoints\n";
  if (!scenario_arg.empty()) {
    const Scenario sc = load(scenario_arg, topology_arg);
    route_flows(sc.fabric, sc.flows);
    std::cout << "scenario ok: " << sc.flows.size() << " flows over " << sc.duration_s << " s\n";
  }
  return kOk;
}

int plan(const std::string& topology_arg, const std::string& flow_arg) {
  const Fabric fabric = build_fabric(read_json_file(topology_arg));
  const json doc = read_json_file(flow_arg);
  const AdmissionResult result = admit_flow(fabric, parse_flow(doc), parse_telemetry(doc));
  std::cout << to_json(result).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fabric QoS simulator and slice orchestrator"};
  app.require_subcommand(1);

  std::string topology, scenario, out, flow;
  bool no_orchestrator = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> tick_ms;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write ticks.csv, windows.csv and events.json");
  run_cmd->add_option("--topology", topology, "Topology JSON (overrides the scenario's own)");
  run_cmd->add_option("--scenario", scenario, "Scenario JSON, or preset:motivation / preset:lanimpact")->required();
  run_cmd->add_flag("--no-orchestrator", no_orchestrator, "Run without the orchestrator");
  run_cmd->add_option("--out", out, "Output directory")->required();
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--tick-ms", tick_ms, "Override the tick length");

  auto* validate_cmd = app.add_subcommand("validate", "Validate a topology and optionally a scenario");
  validate_cmd->add_option("--topology", topology, "Topology JSON")->required();
  validate_cmd->add_option("--scenario", scenario, "Scenario JSON");

  auto* plan_cmd = app.add_subcommand("plan", "Print the admission result and DSCP plan for one RAN flow");
  plan_cmd->add_option("--topology", topology, "Topology JSON")->required();
  plan_cmd->add_option("--flow", flow, "Flow JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run_cmd) return run(scenario, topology, no_orchestrator, out, seed, tick_ms);
    if (*validate_cmd) return validate(topology, scenario);
    if (*plan_cmd) return plan(topology, flow);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
