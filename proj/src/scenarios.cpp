#include "sliceqos/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "sliceqos/topology_json.hpp"
#include "sliceqos_presets_data.hpp"

namespace sliceqos {

using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

std::uint64_t mix(std::uint64_t a, const std::string& s) {
  std::uint64_t h = a;
  for (unsigned char c : s) h = mix(h, c);
  return h;
}

FlowKind parse_kind(const std::string& s) {
  if (s == "ran" || s == "RAN") return FlowKind::Ran;
  if (s == "lan" || s == "LAN") return FlowKind::Lan;
  throw Error(Errc::ParseError, "unknown flow kind '" + s + "'");
}

PolicerMode parse_policer(const std::string& s) {
  if (s == "per_flow") return PolicerMode::PerFlow;
  if (s == "aggregate") return PolicerMode::Aggregate;
  throw Error(Errc::ParseError, "unknown policer_mode '" + s + "'");
}

void check_window(double start, double end, double duration, const std::string& what) {
  if (start < 0.0 || end > duration + 1e-9 || !(start < end)) {
    std::ostringstream msg;
    msg << what << " [" << start << ", " << end << ") is outside [0, " << duration << ")";
    throw Error(Errc::WindowOutOfRange, msg.str());
  }
}

std::vector<FlowSpec> parse_flows(const json& list, double duration) {
  std::vector<FlowSpec> flows;
  std::set<std::string> ids;
  for (const auto& f : list) {
    FlowSpec base;
    base.id = f.at("id").get<std::string>();
    base.kind = parse_kind(f.value("kind", std::string("lan")));
    base.src = f.at("src").get<std::string>();
    base.dst = f.at("dst").get<std::string>();
    base.gbr_mbps = f.value("gbr_mbps", 0.0);
    base.demand_mbps = f.value("demand_mbps", base.gbr_mbps);
    if (f.contains("dscp") && !f.at("dscp").is_null()) base.dscp = Dscp(f.at("dscp").get<int>());
    if (f.contains("active")) {
      for (const auto& w : f.at("active")) {
        if (!w.is_array() || w.size() != 2) throw Error(Errc::ParseError, "flow " + base.id + ": active windows are [start, end] pairs");
        base.active_windows.push_back({w[0].get<double>(), w[1].get<double>()});
      }
    } else {
      base.active_windows.push_back({0.0, duration});
    }
    for (const auto& w : base.active_windows) check_window(w.start_s, w.end_s, duration, "flow " + base.id + " window");
    base.validate();

    const int count = f.value("count", 1);
    if (count < 1) throw Error(Errc::ParseError, "flow " + base.id + ": count must be >= 1");
    const int width = static_cast<int>(std::to_string(count).size());
    for (int i = 1; i <= count; ++i) {
      FlowSpec flow = base;
      if (f.contains("count")) {
        std::string n = std::to_string(i);
        flow.id += "-" + std::string(static_cast<std::size_t>(width) - n.size(), '0') + n;
      }
      if (!ids.insert(flow.id).second) throw Error(Errc::ParseError, "duplicate flow id " + flow.id);
      flows.push_back(std::move(flow));
    }
  }
  return flows;
}

double mean(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir, const json* topology) {
  try {
    if (!doc.is_object()) throw Error(Errc::ParseError, "scenario must be an object");
    Scenario sc;
    sc.name = doc.value("name", std::string("scenario"));
    if (topology) {
      sc.fabric = build_fabric(*topology);
    } else if (doc.contains("topology") && doc.at("topology").is_object()) {
      sc.fabric = build_fabric(doc.at("topology"));
    } else if (doc.contains("topology") && doc.at("topology").is_string()) {
      sc.fabric = build_fabric(read_json_file(base_dir / doc.at("topology").get<std::string>()));
    } else {
      throw Error(Errc::ParseError, "scenario has no topology");
    }

    sc.duration_s = doc.at("duration_s").get<double>();
    if (!(sc.duration_s > 0.0)) throw Error(Errc::ParseError, "duration_s must be positive");
    sc.tick_ms = doc.value("tick_ms", 100.0);
    sc.seed = doc.value("seed", std::uint64_t{1});
    sc.orchestrator_enabled = doc.value("orchestrator_enabled", true);
    if (doc.contains("telemetry")) {
      const auto& t = doc.at("telemetry");
      sc.sampling.n = t.value("n", sc.sampling.n);
      sc.sampling.window_s = t.value("window_s", sc.sampling.window_s);
      sc.sampling.packet_size_b = t.value("packet_size_b", sc.sampling.packet_size_b);
      sc.telemetry_refresh_s = t.value("refresh_s", sc.telemetry_refresh_s);
    }
    sc.sampling.validate();
    sc.monitor_period_s = doc.value("monitor_period_s", sc.monitor_period_s);
    if (!(sc.monitor_period_s > 0.0) || !(sc.telemetry_refresh_s > 0.0)) {
      throw Error(Errc::ParseError, "monitor and telemetry periods must be positive");
    }
    sc.orchestrator.policer_mode = parse_policer(doc.value("policer_mode", std::string("per_flow")));
    sc.orchestrator.hysteresis = doc.value("hysteresis", sc.orchestrator.hysteresis);
    sc.orchestrator.cbs_kb = doc.value("cbs_kb", sc.orchestrator.cbs_kb);
    sc.orchestrator.pbs_kb = doc.value("pbs_kb", sc.orchestrator.pbs_kb);

    for (const auto& w : doc.value("windows", json::array())) {
      NamedWindow nw{w.at("name").get<std::string>(), w.at("start_s").get<double>(), w.at("end_s").get<double>()};
      check_window(nw.start_s, nw.end_s, sc.duration_s, "window " + nw.name);
      sc.windows.push_back(std::move(nw));
    }
    if (sc.windows.empty()) sc.windows.push_back({"all", 0.0, sc.duration_s});

    sc.flows = parse_flows(doc.value("flows", json::array()), sc.duration_s);
    for (const auto& f : sc.flows) {
      sc.fabric.endpoint(f.src);
      sc.fabric.endpoint(f.dst);
    }
    tick_count(sc.duration_s, sc.tick_ms);
    return sc;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

Scenario load_scenario_file(const std::filesystem::path& path, const json* topology) {
  return parse_scenario(read_json_file(path), path.parent_path(), topology);
}

json preset_topology_document(const std::string& name) {
  if (name == "motivation") return json::parse(presets::kMotivationTopology);
  if (name == "lanimpact") return json::parse(presets::kLanimpactTopology);
  throw Error(Errc::ParseError, "unknown preset '" + name + "'");
}

json preset_scenario_document(const std::string& name) {
  if (name == "motivation") return json::parse(presets::kMotivationScenario);
  if (name == "lanimpact") return json::parse(presets::kLanimpactScenario);
  throw Error(Errc::ParseError, "unknown preset '" + name + "'");
}

Scenario load_preset(const std::string& name) {
  const json topology = preset_topology_document(name);
  return parse_scenario(preset_scenario_document(name), {}, &topology);
}

Scenario motivation_preset() { return load_preset("motivation"); }
Scenario lanimpact_preset() { return load_preset("lanimpact"); }

const WindowStat* WindowSummary::find(const std::string& window, const std::string& flow_id) const {
  for (const auto& r : rows) {
    if (r.window == window && r.flow_id == flow_id) return &r;
  }
  return nullptr;
}

WindowSummary summarize(const MetricsSeries& series, std::span<const FlowSpec> flows, std::span<const NamedWindow> windows) {
  std::vector<std::size_t> order(flows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return flows[a].id < flows[b].id; });

  WindowSummary out;
  for (const auto& w : windows) {
    const auto first = static_cast<std::size_t>(std::max(0LL, std::llround(w.start_s * 1000.0 / series.tick_ms)));
    const auto last = std::min(series.records.size(),
                               static_cast<std::size_t>(std::max(0LL, std::llround(w.end_s * 1000.0 / series.tick_ms))));
    for (std::size_t f : order) {
      double delivered = 0.0, offered = 0.0, dropped = 0.0, delay = 0.0;
      std::size_t n = 0;
      for (std::size_t t = first; t < last; ++t) {
        if (!active_in_tick(flows[f], t, series.tick_ms)) continue;
        const FlowTick& m = series.records[t].flows[f];
        delivered += m.delivered_mbps;
        offered += m.offered_mbps;
        dropped += m.dropped_mbps;
        delay += m.delay_ms;
        ++n;
      }
      if (n == 0) continue;
      const double loss = offered > 0.0 ? std::clamp(dropped / offered, 0.0, 1.0) : 0.0;
      out.rows.push_back({w.name, flows[f].id, mean(delivered, n), loss, mean(delay, n), mean(offered, n), mean(dropped, n)});
    }
  }
  return out;
}

ExperimentResult run_experiment(const Scenario& scenario) {
  const std::vector<RoutedFlow> routed = route_flows(scenario.fabric, scenario.flows);
  const std::size_t ticks = tick_count(scenario.duration_s, scenario.tick_ms);
  const double dt = scenario.tick_ms / 1000.0;
  for (const auto& f : scenario.flows) {
    for (const auto& w : f.active_windows) {
      tick_count(w.start_s, scenario.tick_ms);
      tick_count(w.end_s, scenario.tick_ms);
    }
  }

  Engine engine(scenario.fabric, routed);
  Orchestrator orchestrator(scenario.fabric, scenario.orchestrator);
  const std::size_t refresh_every = std::max<std::size_t>(1, tick_count(scenario.telemetry_refresh_s, scenario.tick_ms));
  const std::size_t monitor_every = std::max<std::size_t>(1, tick_count(scenario.monitor_period_s, scenario.tick_ms));

  std::set<PortRef> sampled;
  for (const auto& r : routed) {
    for (const auto& h : r.path.hops) sampled.insert({h.sw, h.egress_port});
  }

  ExperimentResult result;
  result.series.tick_ms = scenario.tick_ms;
  for (const auto& f : scenario.flows) result.series.flow_ids.push_back(f.id);
  result.series.records.reserve(ticks);

  TelemetrySnapshot snapshot;
  NetworkPolicies policies;
  std::vector<bool> active(routed.size(), false);
  std::vector<bool> was_active(routed.size(), false);
  std::set<std::string> demoted;

  for (std::size_t t = 0; t < ticks; ++t) {
    const double now = static_cast<double>(t) * dt;
    for (std::size_t f = 0; f < routed.size(); ++f) active[f] = active_in_tick(routed[f].spec, t, scenario.tick_ms);

    if (scenario.orchestrator_enabled) {
      bool changed = false;
      if (t > 0 && t % refresh_every == 0) {
        snapshot.clear();
        std::uint64_t i = 0;
        for (const auto& iface : sampled) {
          const DscpRates rates = engine.recent_rates(iface, scenario.sampling.window_s);
          snapshot[iface] = sample_flows(iface, rates, scenario.sampling, mix(mix(scenario.seed, t), mix(i++, iface.sw + "/" + iface.port)));
        }
      }
      if (t > 0 && t % monitor_every == 0) {
        for (auto& u : orchestrator.monitor(snapshot)) {
          changed = true;
          if (const auto* plan = std::get_if<DscpPlan>(&u.update)) {
            result.events.push_back({now, u.flow_id, "replanned", to_json(*plan)});
          } else {
            demoted.insert(u.flow_id);
            result.events.push_back({now, u.flow_id, "demoted", to_json(AdmissionResult{std::get<BestEffort>(u.update)})});
          }
        }
      }
      for (std::size_t f = 0; f < routed.size(); ++f) {
        const FlowSpec& spec = routed[f].spec;
        if (!spec.is_ran()) continue;
        if (was_active[f] && !active[f]) {
          demoted.erase(spec.id);
          if (orchestrator.admitted().count(spec.id)) {
            orchestrator.release(spec.id);
            result.events.push_back({now, spec.id, "released", json::object()});
            changed = true;
          }
        } else if (active[f] && !was_active[f] && !demoted.count(spec.id)) {
          const AdmissionResult r = orchestrator.admit_flow(spec, snapshot);
          const bool ok = std::holds_alternative<Admitted>(r);
          if (!ok) demoted.insert(spec.id);
          result.events.push_back({now, spec.id, ok ? "admitted" : "best_effort", to_json(r)});
          changed = true;
        }
      }
      if (changed) policies = orchestrator.network_policies();
    }

    TickMetrics m = engine.step(active, policies, dt);
    m.time_s = now;
    result.series.records.push_back(std::move(m));
    was_active = active;
  }

  result.summary = summarize(result.series, scenario.flows, scenario.windows);
  return result;
}

std::string format_number(double value) {
  if (std::abs(value) < 0.0005) value = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

void write_metrics_csv(const MetricsSeries& series, const WindowSummary& summary, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::size_t> order(series.flow_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return series.flow_ids[a] < series.flow_ids[b]; });

  {
    std::ofstream out(dir / "ticks.csv", std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + (dir / "ticks.csv").string());
    out << "time_s,flow_id,offered_mbps,delivered_mbps,dropped_mbps,delay_ms\n";
    for (const auto& rec : series.records) {
      const std::string time = format_number(rec.time_s);
      for (std::size_t f : order) {
        const FlowTick& m = rec.flows[f];
        out << time << ',' << series.flow_ids[f] << ',' << format_number(m.offered_mbps) << ','
            << format_number(m.delivered_mbps) << ',' << format_number(m.dropped_mbps) << ','
            << format_number(m.delay_ms) << '\n';
      }
    }
    if (!out) throw Error(Errc::IoError, "write failed for ticks.csv");
  }
  {
    std::ofstream out(dir / "windows.csv", std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + (dir / "windows.csv").string());
    out << "window,flow_id,throughput_mbps,loss_fraction,delay_ms\n";
    for (const auto& r : summary.rows) {
      out << r.window << ',' << r.flow_id << ',' << format_number(r.throughput_mbps) << ','
          << format_number(r.loss_fraction) << ',' << format_number(r.delay_ms) << '\n';
    }
    if (!out) throw Error(Errc::IoError, "write failed for windows.csv");
  }
}

std::vector<TickRow> read_ticks_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "time_s,flow_id,offered_mbps,delivered_mbps,dropped_mbps,delay_ms") {
    throw Error(Errc::ParseError, path.string() + ": unexpected header");
  }
  std::vector<TickRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw Error(Errc::ParseError, path.string() + ": malformed row '" + line + "'");
    try {
      rows.push_back({std::stod(cells[0]), cells[1], std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                      std::stod(cells[5])});
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, path.string() + ": bad number in '" + line + "'");
    }
  }
  return rows;
}

json to_json(const ControlEvent& event) {
  return {{"time_s", event.time_s}, {"flow_id", event.flow_id}, {"action", event.action}, {"detail", event.detail}};
}

}  // namespace sliceqos
