#include <doctest.h>

#include <cmath>

#include "sliceqos/telemetry.hpp"
#include "sliceqos/topology_json.hpp"
#include "support/fixtures.hpp"

using namespace sliceqos;
using nlohmann::json;

namespace {

const PortRef kIface{"S1", "p2"};

DscpRates rates(std::initializer_list<std::pair<int, double>> marked, double unmarked = 0.0) {
  DscpRates r;
  for (auto [d, v] : marked) r.marked[d] = v;
  r.unmarked = unmarked;
  return r;
}

const QueueStatus& status_of(const std::vector<QueueStatus>& all, int q) {
  for (const auto& s : all) {
    if (s.queue == QueueId(q)) return s;
  }
  throw std::logic_error("queue missing");
}

// P(|X - mean| <= tol) for X ~ Binomial(n, p), summed from the pmf.
double binomial_coverage(std::uint64_t n, double p, double lo, double hi) {
  double total = 0.0;
  for (std::uint64_t k = static_cast<std::uint64_t>(std::ceil(lo)); k <= static_cast<std::uint64_t>(std::floor(hi)); ++k) {
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                           static_cast<double>(k) * std::log(p) + static_cast<double>(n - k) * std::log1p(-p);
    total += std::exp(log_pmf);
  }
  return total;
}

}  // namespace

TEST_CASE("n = 1 counts every packet") {
  SamplingSettings s;
  s.n = 1;
  const SampleSet set = sample_flows(kIface, rates({{39, 15.0}, {56, 40.0}}, 8.0), s, 3);
  CHECK(set.counts.at(39) == 15000);
  CHECK(set.counts.at(56) == 40000);
  CHECK(set.unmarked == 8000);
  const DscpRates est = estimated_rates(set);
  CHECK(est.marked[39] == doctest::Approx(15.0));
  CHECK(est.marked[56] == doctest::Approx(40.0));
  CHECK(est.unmarked == doctest::Approx(8.0));
}

TEST_CASE("a silent DSCP is never sampled") {
  const SampleSet set = sample_flows(kIface, rates({{39, 15.0}}), {}, 11);
  CHECK(set.counts.count(40) == 0);
  CHECK(set.unmarked == 0);
}

TEST_CASE("15 Mbps sampled 1 in 100 over 10 s") {
  const SamplingSettings s;  // n = 100, 10 s, 1250 B
  const std::uint64_t packets = packets_in_window(15.0, s);
  CHECK(packets == 15000);
  const double expected = 15e6 * 10 / (8 * 1250 * 100);
  CHECK(expected == doctest::Approx(150.0));

  const int seeds = 2000;
  double sum = 0.0;
  int within = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto set = sample_flows(kIface, rates({{39, 15.0}}), s, static_cast<std::uint64_t>(seed));
    const double c = set.counts.count(39) ? static_cast<double>(set.counts.at(39)) : 0.0;
    sum += c;
    if (std::abs(c - expected) <= 0.05 * expected) ++within;
  }
  CHECK(sum / seeds == doctest::Approx(expected).epsilon(0.01));
  // The +-5% band is about 0.6 standard deviations wide at this count.
  const double coverage = binomial_coverage(packets, 0.01, expected * 0.95, expected * 1.05);
  CHECK(coverage == doctest::Approx(0.50).epsilon(0.1));
  CHECK(static_cast<double>(within) / seeds == doctest::Approx(coverage).epsilon(0.08));
}

TEST_CASE("estimate_queue_load") {
  const Fabric f = fixtures::chain_fabric();

  SUBCASE("rate formula and queue attribution") {
    SampleSet set{kIface, 100, 10.0, 1250.0, {{39, 900}}, 0};
    const auto st = estimate_queue_load(f, set);
    CHECK(st.size() == 8);
    CHECK(status_of(st, 5).estimated_load_mbps == doctest::Approx(90.0));
    CHECK(status_of(st, 5).spare_mbps == doctest::Approx(60.0));
    CHECK(status_of(st, 8).estimated_load_mbps == 0.0);
  }
  SUBCASE("no samples") {
    SampleSet set{kIface, 100, 10.0, 1250.0, {}, 0};
    for (const auto& s : estimate_queue_load(f, set)) {
      CHECK(s.estimated_load_mbps == 0.0);
      CHECK(s.spare_mbps == s.capacity_mbps);
    }
    CHECK(status_of(estimate_queue_load(f, set), 8).spare_mbps == doctest::Approx(350.0));
  }
  SUBCASE("unmarked traffic loads the default queue") {
    SampleSet set{kIface, 100, 10.0, 1250.0, {}, 200};
    const auto st = estimate_queue_load(f, set);
    CHECK(status_of(st, 2).estimated_load_mbps == doctest::Approx(20.0));
  }
  SUBCASE("known rates are taken off, clamped at zero") {
    SampleSet set{kIface, 100, 10.0, 1250.0, {{39, 900}, {56, 10}}, 0};
    const DscpRates known = rates({{39, 30.0}, {56, 40.0}});
    const auto st = estimate_queue_load(f, set, &known);
    CHECK(status_of(st, 5).estimated_load_mbps == doctest::Approx(60.0));
    CHECK(status_of(st, 8).estimated_load_mbps == 0.0);
  }
  SUBCASE("unknown interface") {
    SampleSet set{{"S1", "p9"}, 100, 10.0, 1250.0, {}, 0};
    try {
      estimate_queue_load(f, set);
      FAIL("expected UnknownInterface");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownInterface);
    }
  }
}

TEST_CASE("sampling is unbiased per queue over 1000 seeds") {
  const Fabric f = fixtures::chain_fabric();
  const DscpRates truth = rates({{39, 90.0}, {3, 25.0}, {60, 140.0}}, 300.0);
  std::array<double, kQueueCount> sum{};
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto st = estimate_queue_load(f, sample_flows(kIface, truth, {}, 1000 + seed));
    for (const auto& s : st) sum[s.queue.index()] += s.estimated_load_mbps;
  }
  CHECK(sum[QueueId(5).index()] / seeds == doctest::Approx(90.0).epsilon(0.01));
  CHECK(sum[QueueId(1).index()] / seeds == doctest::Approx(25.0).epsilon(0.01));
  CHECK(sum[QueueId(8).index()] / seeds == doctest::Approx(140.0).epsilon(0.01));
  CHECK(sum[QueueId(2).index()] / seeds == doctest::Approx(300.0).epsilon(0.01));
}

TEST_CASE("n = 1 estimates are exact and monotone") {
  const Fabric f = fixtures::chain_fabric();
  SamplingSettings s;
  s.n = 1;
  double previous = -1.0;
  for (double r = 0.0; r <= 200.0; r += 12.5) {
    const auto st = estimate_queue_load(f, sample_flows(kIface, rates({{39, r}, {60, 40.0}}), s, 5));
    const double load = status_of(st, 5).estimated_load_mbps;
    CHECK(load == doctest::Approx(r));
    CHECK(load >= previous);
    CHECK(status_of(st, 8).estimated_load_mbps == doctest::Approx(40.0));
    previous = load;
  }
}

TEST_CASE("sampling settings are validated") {
  SamplingSettings s;
  s.n = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.n = 10;
  s.window_s = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("the engine reports recent per-DSCP arrivals at an interface") {
  const Fabric f = fixtures::chain_fabric();
  FlowSpec a;
  a.id = "a";
  a.src = "ue";
  a.dst = "app";
  a.demand_mbps = 12.0;
  a.dscp = Dscp(60);
  a.active_windows = {{0.0, 100.0}};
  Engine engine(f, route_flows(f, std::vector<FlowSpec>{a}));
  for (int t = 0; t < 30; ++t) engine.step({true}, {}, 0.1);
  const DscpRates r = engine.recent_rates({"S2", "p2"}, 2.0);
  CHECK(r.marked[60] == doctest::Approx(12.0));
  CHECK(r.total() == doctest::Approx(12.0));
  CHECK(engine.recent_rates({"S1", "p1"}, 2.0).total() == 0.0);
  CHECK_THROWS_AS(engine.recent_rates({"S9", "p1"}, 2.0), Error);
}
