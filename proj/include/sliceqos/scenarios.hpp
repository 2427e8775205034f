#pragma once

// Scenario documents, bundled presets, the experiment runner and CSV output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sliceqos/fabric.hpp"
#include "sliceqos/orchestrator.hpp"
#include "sliceqos/telemetry.hpp"
#include "sliceqos/traffic.hpp"

namespace sliceqos {

struct NamedWindow {
  std::string name;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Scenario {
  std::string name;
  Fabric fabric;
  std::vector<FlowSpec> flows;
  double duration_s = 0.0;
  double tick_ms = 100.0;
  std::uint64_t seed = 1;
  bool orchestrator_enabled = true;
  SamplingSettings sampling;
  double telemetry_refresh_s = 5.0;
  double monitor_period_s = 5.0;
  OrchestratorSettings orchestrator;
  std::vector<NamedWindow> windows;  // summary windows; whole run if none declared
};

/// Builds a scenario from its document. The topology is `topology` when
/// given, otherwise the document's "topology" entry: an inline object or a
/// file path relative to base_dir. Throws ParseError, UnknownEndpoint,
/// WindowOutOfRange, or any fabric validation error.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {},
                        const nlohmann::json* topology = nullptr);

Scenario load_scenario_file(const std::filesystem::path& path, const nlohmann::json* topology = nullptr);

/// Bundled presets: "motivation" and "lanimpact". Throws ParseError for an
/// unknown name.
Scenario load_preset(const std::string& name);
Scenario motivation_preset();
Scenario lanimpact_preset();
nlohmann::json preset_topology_document(const std::string& name);
nlohmann::json preset_scenario_document(const std::string& name);

struct WindowStat {
  std::string window;
  std::string flow_id;
  double throughput_mbps = 0.0;
  double loss_fraction = 0.0;
  double delay_ms = 0.0;
  // Means over the flow's active ticks in the window.
  double offered_mbps = 0.0;
  double dropped_mbps = 0.0;
};

struct WindowSummary {
  std::vector<WindowStat> rows;  // window order, then flow id

  const WindowStat* find(const std::string& window, const std::string& flow_id) const;
};

/// Per-window means over the ticks in which each flow is active; flows never
/// active in a window get no row.
WindowSummary summarize(const MetricsSeries& series, std::span<const FlowSpec> flows,
                        std::span<const NamedWindow> windows);

struct ControlEvent {
  double time_s = 0.0;
  std::string flow_id;
  std::string action;  // admitted, best_effort, replanned, demoted, released
  nlohmann::json detail;
};

struct ExperimentResult {
  MetricsSeries series;
  WindowSummary summary;
  std::vector<ControlEvent> events;
};

/// Runs the scenario. With the orchestrator enabled each RAN flow is
/// admitted when it becomes active, telemetry is refreshed and the monitor
/// runs at their periods, and policies change between ticks.
ExperimentResult run_experiment(const Scenario& scenario);

/// Writes ticks.csv and windows.csv into `dir` (created if missing). Numbers
/// have three decimals. Throws IoError.
void write_metrics_csv(const MetricsSeries& series, const WindowSummary& summary, const std::filesystem::path& dir);

struct TickRow {
  double time_s = 0.0;
  std::string flow_id;
  double offered_mbps = 0.0;
  double delivered_mbps = 0.0;
  double dropped_mbps = 0.0;
  double delay_ms = 0.0;
};

/// Reads a ticks.csv back. Throws IoError or ParseError.
std::vector<TickRow> read_ticks_csv(const std::filesystem::path& path);

/// Fixed three-decimal formatting used in the CSV files.
std::string format_number(double value);

nlohmann::json to_json(const ControlEvent& event);

}  // namespace sliceqos
