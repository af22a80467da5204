#pragma once

// Programmatic scenario construction for tests: the canonical two-host,
// two-switch topology with a pair of disjoint inter-switch paths, mirroring
// the scenario documents shipped under scenarios/.

#include <optional>
#include <string>

#include "oneplus/config.hpp"
#include "oneplus/wire.hpp"

namespace testsc {

using namespace oneplus;

constexpr uint32_t kHostA = 0x0A000001;   // 10.0.0.1
constexpr uint32_t kHostB = 0x0A000002;   // 10.0.0.2
constexpr uint32_t kSwitch1 = 0x0AFF0001; // 10.255.0.1
constexpr uint32_t kSwitch2 = 0x0AFF0002; // 10.255.0.2

struct TwoPathOptions {
    SimTime duration_ns = seconds_to_ns(1.0);
    uint64_t seed = 1;
    SimTime host_delay_ns = seconds_to_ns(0.0001);
    SimTime path_delay_ns = seconds_to_ns(0.005);
    // Inter-switch jitter, both directions of both paths (path B may differ).
    SimTime jitter_lo_ns = 0;
    SimTime jitter_hi_ns = 0;
    std::optional<std::pair<SimTime, SimTime>> path_b_jitter;
    double path_a_loss = 0.0;
    double path_b_loss = 0.0;
    std::vector<Interval> path_a_down;
    // Adds a second, jitter-free inter-switch pair for the reverse direction
    // (used by the jitter experiment).
    bool clean_reverse_pair = false;
    std::optional<SeqParams> seq;
};

inline TernaryMatch match_dst(uint32_t ip) {
    TernaryMatch m;
    m.dst_ip = TernaryField<uint32_t>::exact(ip);
    return m;
}

// Ports on each switch: 0 = host, 1 = path A, 2 = path B, 3/4 = clean pair.
inline Scenario two_path_scenario(const TwoPathOptions& o) {
    Scenario sc;
    sc.duration_ns = o.duration_ns;
    sc.seed = o.seed;
    if (o.seq) sc.seq = *o.seq;

    NodeSpec h1{"h1", true, kHostA, {}, {}, {}, {}};
    NodeSpec h2{"h2", true, kHostB, {}, {}, {}, {}};

    NodeSpec s1;
    s1.name = "s1";
    s1.ip = kSwitch1;
    s1.connections.push_back(ConnectionSpec{0, 1, kSwitch1, kSwitch2, {1, 2}});
    s1.flows.push_back(FlowSpec{match_dst(kHostB), 10, 0});
    s1.routes.push_back(Route{kHostA, 32, 0});
    s1.routes.push_back(Route{kHostB, 32, 1});
    s1.routes.push_back(Route{kSwitch2, 32, 1});

    NodeSpec s2;
    s2.name = "s2";
    s2.ip = kSwitch2;
    std::array<PortId, 2> reverse_ports = o.clean_reverse_pair ? std::array<PortId, 2>{3, 4}
                                                               : std::array<PortId, 2>{1, 2};
    s2.connections.push_back(ConnectionSpec{0, 1, kSwitch2, kSwitch1, reverse_ports});
    s2.flows.push_back(FlowSpec{match_dst(kHostA), 10, 0});
    s2.routes.push_back(Route{kHostB, 32, 0});
    s2.routes.push_back(Route{kHostA, 32, 1});
    s2.routes.push_back(Route{kSwitch1, 32, 1});

    sc.nodes = {h1, s1, s2, h2};

    DirectionModel host_dir{o.host_delay_ns, 0, 0, 0.0, 0};
    LinkSpec l0{"h1", 0, "s1", 0, host_dir, host_dir, {}};
    LinkSpec l3{"s2", 0, "h2", 0, host_dir, host_dir, {}};

    DirectionModel path_a{o.path_delay_ns, o.jitter_lo_ns, o.jitter_hi_ns, o.path_a_loss, 0};
    auto [b_lo, b_hi] = o.path_b_jitter.value_or(std::make_pair(o.jitter_lo_ns, o.jitter_hi_ns));
    DirectionModel path_b{o.path_delay_ns, b_lo, b_hi, o.path_b_loss, 0};
    LinkSpec la{"s1", 1, "s2", 1, path_a, path_a, o.path_a_down};
    LinkSpec lb{"s1", 2, "s2", 2, path_b, path_b, {}};
    sc.links = {l0, la, lb, l3};

    if (o.clean_reverse_pair) {
        DirectionModel clean{o.path_delay_ns, 0, 0, 0.0, 0};
        sc.links.push_back(LinkSpec{"s1", 3, "s2", 3, clean, clean, {}});
        sc.links.push_back(LinkSpec{"s1", 4, "s2", 4, clean, clean, {}});
    }
    return sc;
}

inline TrafficSpec cbr_flow(const std::string& name, uint64_t packets, SimTime interval_ns,
                            SimTime start_ns = 0) {
    TrafficSpec t;
    t.kind = TrafficKind::Cbr;
    t.name = name;
    t.src = "h1";
    t.dst_ip = kHostB;
    t.src_port = 5001;
    t.dst_port = 9000;
    t.interval_ns = interval_ns;
    t.payload_bytes = 64;
    t.start_ns = start_ns;
    t.stop_ns = start_ns + interval_ns * static_cast<SimTime>(packets - 1);
    return t;
}

inline TrafficSpec ping_flow(const std::string& name, uint64_t count, SimTime interval_ns,
                             SimTime start_ns = 0) {
    TrafficSpec t;
    t.kind = TrafficKind::Ping;
    t.name = name;
    t.src = "h1";
    t.dst_ip = kHostB;
    t.interval_ns = interval_ns;
    t.payload_bytes = 56;
    t.start_ns = start_ns;
    t.count = count;
    return t;
}

}  // namespace testsc
