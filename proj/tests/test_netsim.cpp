#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oneplus/netsim.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace oneplus;
using testsc::two_path_scenario;

namespace {

std::string flows_csv(const MetricsRecord& m) {
    std::ostringstream ss;
    write_flows_csv(m, ss);
    return ss.str();
}

}  // namespace

TEST_CASE("event queue dequeues by time then insertion order") {
    sim::EventQueue q;
    auto ev = [](SimTime at, int tag) {
        sim::Event e;
        e.at = at;
        e.traffic = tag;
        return e;
    };
    q.push(ev(5, 0));
    q.push(ev(1, 1));
    q.push(ev(5, 2));
    q.push(ev(1, 3));
    std::vector<int> order;
    while (!q.empty()) order.push_back(q.pop().traffic);
    REQUIRE(order == std::vector<int>{1, 3, 0, 2});
}

TEST_CASE("lossless protected run delivers everything and drops one duplicate per packet") {
    Scenario sc = two_path_scenario({});
    sc.traffic.push_back(testsc::cbr_flow("f", 1000, seconds_to_ns(0.0005)));
    MetricsRecord m = run(sc);
    const FlowMetrics& f = m.flows[0];
    REQUIRE(f.sent == 1000);
    REQUIRE(f.delivered == 1000);
    REQUIRE(f.lost == 0);
    REQUIRE(f.duplicates_dropped == 1000);
    REQUIRE(f.duplicate_deliveries == 0);
    REQUIRE(m.ledger.conserved());
    REQUIRE(m.ledger.payload_mismatches == 0);
    REQUIRE(m.node_counters.at("s2").decapsulated == 1000);
    REQUIRE(m.node_counters.at("s1").protected_out == 1000);
}

TEST_CASE("identical scenario and seed reproduce byte-identical outputs") {
    testsc::TwoPathOptions o;
    o.jitter_lo_ns = 0;
    o.jitter_hi_ns = seconds_to_ns(0.004);
    o.path_b_loss = 0.05;
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 2000, seconds_to_ns(0.0004)));

    MetricsRecord a = run(sc);
    MetricsRecord b = run(sc);
    REQUIRE(flows_csv(a) == flows_csv(b));
    std::ostringstream pa, pb, sa, sb;
    write_packets_csv(a, pa);
    write_packets_csv(b, pb);
    REQUIRE(pa.str() == pb.str());
    write_summary(a, sa);
    write_summary(b, sb);
    REQUIRE(sa.str() == sb.str());

    RunOptions other;
    other.seed = 999;
    MetricsRecord c = run(sc, other);
    REQUIRE(flows_csv(a) != flows_csv(c));
}

TEST_CASE("a mid-run path failure loses nothing when protected") {
    testsc::TwoPathOptions o;
    o.duration_ns = seconds_to_ns(2.2);
    o.path_a_down = {Interval{seconds_to_ns(1.0), seconds_to_ns(2.3)}};
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 1900, seconds_to_ns(0.001), seconds_to_ns(0.05)));

    MetricsRecord prot = run(sc);
    REQUIRE(prot.flows[0].sent == 1900);
    REQUIRE(prot.flows[0].delivered == 1900);
    REQUIRE(prot.flows[0].lost == 0);
    REQUIRE(prot.ledger.conserved());
    // Copies on path A during the outage were lost on the link.
    REQUIRE(prot.ledger.link_lost > 0);

    RunOptions plain;
    plain.mode = ForwardingMode::Plain;
    MetricsRecord unprot = run(sc, plain);
    REQUIRE(unprot.flows[0].lost > 0);
    REQUIRE(unprot.flows[0].delivered + unprot.flows[0].lost == unprot.flows[0].sent);
    REQUIRE(unprot.ledger.conserved());
}

TEST_CASE("unprotected loss over a lossy link matches the loss rate") {
    testsc::TwoPathOptions o;
    o.path_a_loss = 0.1;
    o.duration_ns = seconds_to_ns(1.2);
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 10000, seconds_to_ns(0.0001)));

    RunOptions plain;
    plain.mode = ForwardingMode::Plain;
    MetricsRecord m = run(sc, plain);
    REQUIRE(m.flows[0].sent == 10000);
    double ratio = static_cast<double>(m.flows[0].delivered) / 10000.0;
    REQUIRE(ratio == Catch::Approx(0.9).margin(0.01));
    REQUIRE(m.ledger.conserved());
}

TEST_CASE("protected flows survive single-copy loss with exactly-once delivery") {
    // Jitter narrower than the send interval keeps each path in order, so
    // the lossless path alone guarantees full delivery.
    testsc::TwoPathOptions o;
    o.path_b_loss = 0.3;
    o.jitter_lo_ns = 0;
    o.jitter_hi_ns = seconds_to_ns(0.002);
    o.duration_ns = seconds_to_ns(26.0);
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 5000, seconds_to_ns(0.005)));

    MetricsRecord m = run(sc);
    REQUIRE(m.flows[0].delivered == 5000);  // path A is lossless
    REQUIRE(m.flows[0].duplicate_deliveries == 0);
    REQUIRE(m.ledger.conserved());
}

TEST_CASE("jitter wider than the interval reorders and the window drops late originals") {
    testsc::TwoPathOptions o;
    o.jitter_lo_ns = 0;
    o.jitter_hi_ns = seconds_to_ns(0.002);
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 5000, seconds_to_ns(0.0002)));

    MetricsRecord m = run(sc);
    // Late packets read as stale and are dropped: delivery is partial, but
    // never duplicated, and every copy is still accounted for.
    REQUIRE(m.flows[0].delivered < 5000);
    REQUIRE(m.flows[0].delivered > 0);
    REQUIRE(m.flows[0].duplicate_deliveries == 0);
    REQUIRE(m.ledger.conserved());
}

TEST_CASE("the forwarded copy is always the earliest arrival") {
    auto check_trace = [](const MetricsRecord& m) {
        size_t forwarded = 0;
        for (const auto& [key, entry] : m.pte_trace) {
            if (entry.accepted_at < 0) continue;
            ++forwarded;
            REQUIRE_FALSE(entry.copy_arrivals.empty());
            REQUIRE(entry.accepted_at ==
                    *std::min_element(entry.copy_arrivals.begin(), entry.copy_arrivals.end()));
        }
        return forwarded;
    };

    RunOptions opts;
    opts.trace_pte = true;

    SECTION("orderly traffic: every packet forwarded at its first arrival") {
        testsc::TwoPathOptions o;
        o.jitter_lo_ns = 0;
        o.jitter_hi_ns = seconds_to_ns(0.008);
        o.path_b_loss = 0.2;
        o.duration_ns = seconds_to_ns(11.0);
        Scenario sc = two_path_scenario(o);
        sc.traffic.push_back(testsc::cbr_flow("f", 1000, seconds_to_ns(0.01)));
        MetricsRecord m = run(sc, opts);
        REQUIRE(check_trace(m) == 1000);
        REQUIRE(m.flows[0].delivered == 1000);
    }

    SECTION("reordered traffic: whatever is forwarded was the first copy") {
        testsc::TwoPathOptions o;
        o.jitter_lo_ns = 0;
        o.jitter_hi_ns = seconds_to_ns(0.008);
        o.path_b_loss = 0.2;
        Scenario sc = two_path_scenario(o);
        sc.traffic.push_back(testsc::cbr_flow("f", 3000, seconds_to_ns(0.0003)));
        MetricsRecord m = run(sc, opts);
        size_t forwarded = check_trace(m);
        REQUIRE(forwarded > 0);
        REQUIRE(forwarded == m.flows[0].delivered);
    }
}

TEST_CASE("ping over jitter-free paths has zero rtt deviation") {
    Scenario sc = two_path_scenario({});
    sc.traffic.push_back(testsc::ping_flow("p", 500, seconds_to_ns(0.001)));
    MetricsRecord m = run(sc);
    REQUIRE(m.flows[0].delivered == 500);
    REQUIRE(m.flows[0].rtt_mad_s == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(m.flows[0].rtt_mean_s > 0.0);

    RunOptions plain;
    plain.mode = ForwardingMode::Plain;
    MetricsRecord u = run(sc, plain);
    REQUIRE(u.flows[0].rtt_mad_s == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("one jittered and one clean path: protection removes nearly all deviation") {
    testsc::TwoPathOptions o;
    o.jitter_lo_ns = 0;
    o.jitter_hi_ns = seconds_to_ns(0.01);
    o.path_b_jitter = std::make_pair<SimTime, SimTime>(0, 0);
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::ping_flow("p", 2000, seconds_to_ns(0.0004)));

    MetricsRecord prot = run(sc);
    RunOptions plain;
    plain.mode = ForwardingMode::Plain;
    MetricsRecord unprot = run(sc, plain);
    REQUIRE(unprot.flows[0].rtt_mad_s > 0.001);
    // The clean copy always wins, so protected deviation collapses to zero.
    REQUIRE(prot.flows[0].rtt_mad_s == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("symmetric jitter with a clean return pair halves the rtt deviation") {
    // Probes are paced wider than the jitter so every round trip completes.
    testsc::TwoPathOptions o;
    o.jitter_lo_ns = 0;
    o.jitter_hi_ns = seconds_to_ns(0.01);
    o.clean_reverse_pair = true;
    o.duration_ns = seconds_to_ns(482.0);
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::ping_flow("p", 40000, seconds_to_ns(0.012)));

    PingExperiment ex = ping_experiment(sc);
    REQUIRE(ex.round_trips == 40000);
    auto mc = oracle::jitter_ratio_oracle(0.01, 2'000'000, 42);
    REQUIRE(std::abs(ex.ratio / mc.ratio - 1.0) < 0.03);
    REQUIRE(ex.ratio > 0.40);
    REQUIRE(ex.ratio < 0.60);
}

TEST_CASE("validation failures surface through run") {
    Scenario sc = two_path_scenario({});
    sc.links[1].ab.loss = 1.5;
    REQUIRE_THROWS_AS(run(sc), ValidationError);
}

TEST_CASE("small sequence spaces wrap end to end") {
    testsc::TwoPathOptions o;
    o.seq = SeqParams{16, 8};
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 1000, seconds_to_ns(0.0005)));
    MetricsRecord m = run(sc);
    // 1000 packets through a 16-number space: the counter wraps dozens of
    // times and nothing is lost because arrivals stay inside the window.
    REQUIRE(m.flows[0].delivered == 1000);
    REQUIRE(m.flows[0].duplicates_dropped == 1000);
    REQUIRE(m.ledger.conserved());
}

TEST_CASE("summary numbers recompute from the packet records") {
    testsc::TwoPathOptions o;
    o.jitter_lo_ns = 0;
    o.jitter_hi_ns = seconds_to_ns(0.003);
    Scenario sc = two_path_scenario(o);
    sc.traffic.push_back(testsc::cbr_flow("f", 800, seconds_to_ns(0.001)));
    MetricsRecord m = run(sc);
    const FlowMetrics& f = m.flows[0];
    std::vector<double> delays;
    for (const auto& r : f.deliveries) delays.push_back(ns_to_seconds(r.recv_ns - r.send_ns));
    REQUIRE(f.delay_mean_s == Catch::Approx(mean_of(delays)).epsilon(1e-12));
    REQUIRE(f.delivered == delays.size());
}
