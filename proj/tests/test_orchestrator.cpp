#include <doctest.h>

#include "sliceqos/orchestrator.hpp"
#include "sliceqos/scenarios.hpp"
#include "sliceqos/topology_json.hpp"
#include "support/fixtures.hpp"

using namespace sliceqos;
using nlohmann::json;

namespace {

// Statuses for every hop of `path`: the listed (queue -> spare) pairs, every
// other queue fully subscribed.
QueueStatusMap statuses(const Path& path, const std::map<SwitchId, std::map<int, double>>& spare) {
  QueueStatusMap out;
  for (const auto& hop : path.hops) {
    auto& v = out[{hop.sw, hop.egress_port}];
    for (int q = 1; q <= 8; ++q) {
      double s = 0.0;
      if (auto it = spare.find(hop.sw); it != spare.end() && it->second.count(q)) s = it->second.at(q);
      v.push_back({hop.sw, hop.egress_port, QueueId(q), 350.0, 350.0 - s, s});
    }
  }
  return out;
}

PerSwitchChoice choice(const Fabric& f, const Hop& hop, int queue, int dscp) {
  const DscpSet set = dscps_for_queue(f.switch_at(hop.sw).mapping, QueueId(queue));
  return {hop.sw, hop.egress_port, QueueId(queue), run_containing(set, dscp), Dscp(dscp), set};
}

FlowSpec ran_flow(const std::string& id, const std::string& src, const std::string& dst, double gbr) {
  FlowSpec f;
  f.id = id;
  f.kind = FlowKind::Ran;
  f.src = src;
  f.dst = dst;
  f.gbr_mbps = gbr;
  f.demand_mbps = gbr;
  f.dscp = Dscp(39);
  f.active_windows = {{0.0, 60.0}};
  return f;
}

// Exact telemetry (n = 1) from per-DSCP rates.
SampleSet exact(const PortRef& iface, std::map<int, double> marked, double unmarked = 0.0) {
  DscpRates r;
  for (auto [d, v] : marked) r.marked[d] = v;
  r.unmarked = unmarked;
  SamplingSettings s;
  s.n = 1;
  return sample_flows(iface, r, s, 0);
}

json chain_with_q7() {
  json doc = fixtures::chain_topology();
  for (auto& sw : doc["switches"]) {
    sw["queues"] = {{{"queue", 1}, {"capacity_mbps", 300}},
                    {{"queue", 2}, {"is_default", true}},
                    {{"queue", 7}, {"capacity_mbps", 100}},
                    {{"queue", 8}, {"capacity_mbps", 350}}};
  }
  return doc;
}

}  // namespace

TEST_CASE("feasibility picks the queue with headroom") {
  const Fabric f = fixtures::chain_fabric();
  const Path path = discover_path(f, f.endpoint("ue"), f.endpoint("app"));

  SUBCASE("only q8 free on S1") {
    const auto r = feasibility_check(f, path, 40.0, statuses(path, {{"S1", {{8, 350}}}, {"S2", {{8, 350}}}, {"S3", {{8, 350}}}}));
    const auto& c = std::get<std::vector<PerSwitchChoice>>(r);
    REQUIRE(c.size() == 3);
    CHECK(c[0].queue == QueueId(8));
    CHECK(c[0].dscp_range == DscpRange{56, 63});
    CHECK(c[0].chosen_dscp == Dscp(56));
  }
  SUBCASE("different queue per switch") {
    const auto r = feasibility_check(f, path, 40.0, statuses(path, {{"S1", {{8, 350}}}, {"S2", {{2, 200}}}, {"S3", {{1, 100}}}}));
    const auto& c = std::get<std::vector<PerSwitchChoice>>(r);
    REQUIRE(c.size() == 3);
    CHECK(c[0].dscp_range == DscpRange{56, 63});
    CHECK(c[1].queue == QueueId(2));
    CHECK(c[1].dscp_range == DscpRange{8, 15});
    CHECK(c[2].queue == QueueId(1));
    CHECK(c[2].dscp_range == DscpRange{0, 7});
  }
  SUBCASE("saturated first hop") {
    const auto r = feasibility_check(f, path, 40.0, statuses(path, {{"S2", {{8, 350}}}, {"S3", {{8, 350}}}}));
    CHECK(std::get<Infeasible>(r) == Infeasible{"S1", "p2"});
  }
  SUBCASE("first offending hop is reported") {
    const auto r = feasibility_check(f, path, 40.0, statuses(path, {{"S1", {{8, 350}}}, {"S2", {{8, 39.9}}}}));
    CHECK(std::get<Infeasible>(r) == Infeasible{"S2", "p2"});
  }
  SUBCASE("largest spare wins, ties go to the higher queue") {
    auto r = feasibility_check(f, path, 10.0, statuses(path, {{"S1", {{1, 50}, {5, 80}}}, {"S2", {{1, 80}, {5, 80}}}, {"S3", {{2, 10}}}}));
    const auto& c = std::get<std::vector<PerSwitchChoice>>(r);
    CHECK(c[0].queue == QueueId(5));
    CHECK(c[1].queue == QueueId(5));
    CHECK(c[2].queue == QueueId(2));
  }
  SUBCASE("codepoints used by other flows are skipped") {
    DscpUsage used;
    used[{"S1", "p2"}].set(56).set(57);
    const auto r = feasibility_check(f, path, 40.0, statuses(path, {{"S1", {{8, 350}}}, {"S2", {{8, 350}}}, {"S3", {{8, 350}}}}), used);
    const auto& c = std::get<std::vector<PerSwitchChoice>>(r);
    CHECK(c[0].chosen_dscp == Dscp(58));
    CHECK(c[1].chosen_dscp == Dscp(56));
  }
  SUBCASE("missing status is a precondition failure") {
    CHECK_THROWS_AS(feasibility_check(f, path, 1.0, {}), Error);
  }
}

TEST_CASE("compatibility check") {
  const Fabric f = fixtures::chain_fabric();
  const Path path = discover_path(f, f.endpoint("ue"), f.endpoint("app"));
  const auto& h = path.hops;

  SUBCASE("identical ranges") {
    const std::vector<PerSwitchChoice> c{choice(f, h[0], 8, 56), choice(f, h[1], 8, 56), choice(f, h[2], 8, 56)};
    CHECK(std::get<CommonDscp>(compatibility_check(c)).dscp == Dscp(56));
  }
  SUBCASE("disjoint ranges") {
    const std::vector<PerSwitchChoice> c{choice(f, h[0], 8, 56), choice(f, h[1], 2, 8), choice(f, h[2], 1, 0)};
    CHECK(std::holds_alternative<NeedsRewrites>(compatibility_check(c)));
  }
  SUBCASE("range spanning two table rows") {
    json doc = fixtures::chain_topology();
    doc["switches"][0]["mapping"] = {{"entries",
                                      {{{"dscp_lo", 0}, {"dscp_hi", 7}, {"queue", 1}},
                                       {{"dscp_lo", 8}, {"dscp_hi", 15}, {"queue", 1}},
                                       {{"dscp_lo", 16}, {"dscp_hi", 63}, {"queue", 2}}}}};
    const Fabric g = build_fabric(doc);
    const std::vector<PerSwitchChoice> c{choice(g, h[0], 1, 0), choice(g, h[1], 2, 8)};
    CHECK(c[0].dscp_range == DscpRange{0, 15});
    CHECK(std::get<CommonDscp>(compatibility_check(c)).dscp == Dscp(8));
  }
  SUBCASE("prefers a codepoint nobody else uses") {
    const std::vector<PerSwitchChoice> c{choice(f, h[0], 8, 56), choice(f, h[1], 8, 56)};
    DscpSet avoid;
    avoid.set(56);
    CHECK(std::get<CommonDscp>(compatibility_check(c, avoid)).dscp == Dscp(57));
    avoid.set();
    CHECK(std::get<CommonDscp>(compatibility_check(c, avoid)).dscp == Dscp(56));
  }
}

TEST_CASE("build_plan") {
  const Fabric f = fixtures::chain_fabric();
  const Path path = discover_path(f, f.endpoint("ue"), f.endpoint("app"));
  const auto& h = path.hops;

  SUBCASE("common DSCP needs no rewrites") {
    std::vector<PerSwitchChoice> c{choice(f, h[0], 8, 56), choice(f, h[1], 8, 57), choice(f, h[2], 8, 56)};
    const DscpPlan plan = build_plan(path, c, CommonDscp{Dscp(58)});
    CHECK(plan.rewrites.empty());
    CHECK(plan.initial_dscp == Dscp(58));
    for (const auto& ch : plan.choices) CHECK(ch.chosen_dscp == Dscp(58));
    CHECK_FALSE(first_incoherent_hop(path, plan, plan.rewrites));
  }
  SUBCASE("per-switch DSCPs are chained by rewrites") {
    std::vector<PerSwitchChoice> c{choice(f, h[0], 8, 60), choice(f, h[1], 2, 10), choice(f, h[2], 1, 3)};
    const DscpPlan plan = build_plan(path, c, NeedsRewrites{});
    CHECK(plan.initial_dscp == Dscp(60));
    REQUIRE(plan.rewrites.size() == 2);
    CHECK(plan.rewrites[0] == RewriteRule{"S1", "p2", Dscp(60), Dscp(10)});
    CHECK(plan.rewrites[1] == RewriteRule{"S2", "p2", Dscp(10), Dscp(3)});
    const auto seen = replay(path, plan.initial_dscp, plan.rewrites);
    CHECK(seen == std::vector<Dscp>{Dscp(60), Dscp(10), Dscp(3)});
    CHECK_FALSE(first_incoherent_hop(path, plan, plan.rewrites));
  }
  SUBCASE("single hop") {
    Path one = path;
    one.hops.resize(1);
    const DscpPlan plan = build_plan(one, {choice(f, h[0], 5, 33)}, NeedsRewrites{});
    CHECK(plan.initial_dscp == Dscp(33));
    CHECK(plan.rewrites.empty());
  }
}

TEST_CASE("install_policies uses min and max GBR") {
  const Fabric f = fixtures::chain_fabric();
  const Path path = discover_path(f, f.endpoint("ue"), f.endpoint("app"));

  const std::vector<double> five{6, 6, 11, 6, 11};
  const PolicySet p = install_policies(path, five);
  CHECK(p.ingress.size() == 3);
  for (const auto& [port, cfg] : p.ingress) {
    CHECK(cfg.cir_mbps == 6.0);
    CHECK(cfg.pir_mbps == 11.0);
    CHECK(cfg.cbs_kb == 64.0);
  }
  CHECK(p.ingress.count({"S1", "p1"}) == 1);
  CHECK(p.ingress.count({"S3", "p1"}) == 1);
  CHECK(p.round_robin == std::set<PortRef>{{"S1", "p2"}, {"S2", "p2"}, {"S3", "p2"}});

  const std::vector<double> one{10};
  CHECK(install_policies(path, one).ingress.at({"S1", "p1"}) == TrTcmConfig{10, 10});
  const std::vector<double> two{5, 50};
  CHECK(install_policies(path, two).ingress.at({"S2", "p1"}) == TrTcmConfig{5, 50});
  CHECK_THROWS_AS(install_policies(path, std::vector<double>{}), Error);
}

TEST_CASE("admission on the motivation fabric") {
  const Scenario sc = motivation_preset();

  SUBCASE("empty LAN: RAN goes to q8 everywhere") {
    const AdmissionResult r = admit_flow(sc.fabric, ran_flow("ran", "ue1", "app", 40), {});
    const auto& ok = std::get<Admitted>(r);
    REQUIRE(ok.plan.choices.size() == 3);
    for (const auto& c : ok.plan.choices) CHECK(c.queue == QueueId(8));
    CHECK(ok.plan.rewrites.empty());
    CHECK(ok.plan.initial_dscp == Dscp(56));
  }
  SUBCASE("saturated S2 means best effort at S2") {
    TelemetrySnapshot snap;
    snap[{"S2", "p2"}] = exact({"S2", "p2"}, {{0, 400}, {32, 200}, {56, 400}}, 400);
    const AdmissionResult r = admit_flow(sc.fabric, ran_flow("ran", "ue1", "app", 40), snap);
    CHECK(std::get<BestEffort>(r) == BestEffort{"S2", "p2"});
  }
  SUBCASE("unreachable destination") {
    FabricConfig cfg = sc.fabric.config();
    cfg.switches[0].ip_table.clear();
    const Fabric broken = Fabric::build(cfg);
    try {
      admit_flow(broken, ran_flow("ran", "ue1", "app", 40), {});
      FAIL("expected NoRoute");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NoRoute);
    }
  }
  SUBCASE("LAN flows are not orchestrated") {
    FlowSpec lan = ran_flow("lan", "ue1", "app", 5);
    lan.kind = FlowKind::Lan;
    CHECK_THROWS_AS(admit_flow(sc.fabric, lan, {}), Error);
  }
}

TEST_CASE("orchestrator state: several flows, policies, release") {
  const Scenario sc = motivation_preset();
  Orchestrator o(sc.fabric);
  const double gbrs[] = {6, 6, 11, 6, 11};
  for (int i = 0; i < 5; ++i) {
    const auto r = o.admit_flow(ran_flow("ran-" + std::to_string(i + 1), "ue" + std::to_string(i + 1), "app", gbrs[i]), {});
    REQUIRE(std::holds_alternative<Admitted>(r));
    CHECK(std::get<Admitted>(r).plan.initial_dscp == Dscp(56 + i));
  }
  const PolicySet p = o.policies();
  CHECK(p.ingress.at({"S1", "p1"}) == TrTcmConfig{6, 11});
  const NetworkPolicies np = o.network_policies();
  CHECK(np.ingress.at({"S1", "p1"}).flows.size() == 5);
  CHECK(np.initial_dscp.at("ran-3") == Dscp(58));
  CHECK(np.round_robin.count({"S3", "p2"}) == 1);

  o.release("ran-3");
  CHECK(o.admitted().size() == 4);
  CHECK(o.network_policies().initial_dscp.count("ran-3") == 0);
}

TEST_CASE("monitor") {
  const Fabric f = build_fabric(chain_with_q7());
  Orchestrator o(f);
  const FlowSpec ran = ran_flow("ran", "ue", "app", 40);
  TelemetrySnapshot calm;
  calm[{"S2", "p2"}] = exact({"S2", "p2"}, {{0, 100}, {56, 50}});
  REQUIRE(std::holds_alternative<Admitted>(o.admit_flow(ran, calm)));
  CHECK(o.admitted().at("ran").plan.choices[1].queue == QueueId(8));

  SUBCASE("static load: no updates") {
    for (int i = 0; i < 20; ++i) CHECK(o.monitor(calm).empty());
    CHECK(o.admitted().at("ran").plan.choices[1].queue == QueueId(8));
  }
  SUBCASE("q8 fills up, q7 has room: move after two observations") {
    TelemetrySnapshot surge = calm;
    // The flow itself accounts for 40 of the 390 seen on q8; q2 keeps 10 spare.
    surge[{"S2", "p2"}] = exact({"S2", "p2"}, {{0, 300}, {56, 390}}, 240);
    CHECK(o.monitor(surge).empty());
    const auto updates = o.monitor(surge);
    REQUIRE(updates.size() == 1);
    const auto& plan = std::get<DscpPlan>(updates[0].update);
    CHECK(plan.choices[1].queue == QueueId(7));
    CHECK_FALSE(first_incoherent_hop(o.admitted().at("ran").path, plan, o.installed_rewrites()));
    CHECK(o.monitor(surge).empty());
  }
  SUBCASE("a single bad sample does not move the flow") {
    TelemetrySnapshot surge = calm;
    // The flow itself accounts for 40 of the 390 seen on q8; q2 keeps 10 spare.
    surge[{"S2", "p2"}] = exact({"S2", "p2"}, {{0, 300}, {56, 390}}, 240);
    CHECK(o.monitor(surge).empty());
    CHECK(o.monitor(calm).empty());
    CHECK(o.monitor(surge).empty());
    CHECK(o.admitted().at("ran").plan.choices[1].queue == QueueId(8));
  }
  SUBCASE("everything full: demotion with the offending hop") {
    TelemetrySnapshot full = calm;
    full[{"S2", "p2"}] = exact({"S2", "p2"}, {{0, 300}, {48, 100}, {56, 390}}, 400);
    o.monitor(full);
    const auto updates = o.monitor(full);
    REQUIRE(updates.size() == 1);
    CHECK(std::get<BestEffort>(updates[0].update) == BestEffort{"S2", "p2"});
    CHECK(o.admitted().empty());
  }
}

TEST_CASE("plans that would contradict installed rewrites fall back to best effort") {
  const Fabric f = fixtures::chain_fabric();
  Orchestrator o(f);
  // First flow: S1 q8, S2 q2, S3 q1 -> rewrites 56->8 on S1 and 8->0 on S2.
  TelemetrySnapshot snap;
  snap[{"S1", "p2"}] = exact({"S1", "p2"}, {{0, 300}, {32, 150}}, 800);
  snap[{"S2", "p2"}] = exact({"S2", "p2"}, {{0, 300}, {32, 150}, {56, 350}});
  snap[{"S3", "p2"}] = exact({"S3", "p2"}, {{32, 150}, {56, 350}}, 800);
  const auto first = o.admit_flow(ran_flow("a", "ue", "app", 40), snap);
  REQUIRE(std::holds_alternative<Admitted>(first));
  const DscpPlan& plan = std::get<Admitted>(first).plan;
  CHECK(plan.initial_dscp == Dscp(56));
  CHECK(plan.rewrites.size() == 2);

  // Second flow can use the same queues but must pick fresh codepoints.
  const auto second = o.admit_flow(ran_flow("b", "ue", "app", 40), snap);
  REQUIRE(std::holds_alternative<Admitted>(second));
  const DscpPlan& p2 = std::get<Admitted>(second).plan;
  CHECK(p2.initial_dscp == Dscp(57));
  for (const auto& [id, e] : o.admitted()) CHECK_FALSE(first_incoherent_hop(e.path, e.plan, o.installed_rewrites()));
}

TEST_CASE("plan export document") {
  const Scenario sc = motivation_preset();
  const json doc = to_json(admit_flow(sc.fabric, ran_flow("ran", "ue1", "app", 40), {}));
  CHECK(doc.at("status") == "admitted");
  CHECK(doc.at("plan").at("initial_dscp") == 56);
  CHECK(doc.at("plan").at("rewrites").empty());
  CHECK(doc.at("policies").at("ingress").size() == 3);
  CHECK(doc.at("policies").at("egress")[0].at("policy") == "round_robin");
  CHECK(doc.at("path").size() == 3);

  const json be = to_json(AdmissionResult{BestEffort{"S2", "p2"}});
  CHECK(be.at("status") == "best_effort");
  CHECK(be.at("offending_switch") == "S2");
}

TEST_CASE("rewrites never match codepoints seen in foreign traffic") {
  const Fabric f = fixtures::chain_fabric();
  // q8 is full on S2, so the plan needs rewrites; S1 already carries DSCP 56
  // and 57 from other sources.
  TelemetrySnapshot snap;
  snap[{"S1", "p2"}] = exact({"S1", "p2"}, {{56, 10}, {57, 10}});
  snap[{"S2", "p2"}] = exact({"S2", "p2"}, {{56, 350}, {32, 150}, {0, 300}});
  const auto r = admit_flow(f, ran_flow("ran", "ue", "app", 40), snap);
  const auto& plan = std::get<Admitted>(r).plan;
  REQUIRE_FALSE(plan.rewrites.empty());
  CHECK(plan.rewrites.front().sw == "S1");
  CHECK(plan.rewrites.front().match_dscp == Dscp(58));
}
