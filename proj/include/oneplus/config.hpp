#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oneplus/forwarding.hpp"
#include "oneplus/pti.hpp"
#include "oneplus/seqwin.hpp"

namespace oneplus {

using SimTime = int64_t;  // integer nanoseconds

constexpr SimTime kNanosPerSecond = 1'000'000'000;

inline SimTime seconds_to_ns(double s) {
    return static_cast<SimTime>(s * 1e9 + (s >= 0 ? 0.5 : -0.5));
}

inline double ns_to_seconds(SimTime t) {
    return static_cast<double>(t) / 1e9;
}

// One direction of a link: fixed propagation delay, uniform jitter drawn from
// [jitter_lo, jitter_hi], loss probability, and an optional serialization
// rate (0 = no serialization delay).
struct DirectionModel {
    SimTime base_delay_ns = 0;
    SimTime jitter_lo_ns = 0;
    SimTime jitter_hi_ns = 0;
    double loss = 0.0;
    uint64_t capacity_bps = 0;
};

struct Interval {
    SimTime down_ns = 0;
    SimTime up_ns = 0;
};

// Bidirectional link between two endpoints. The failure schedule applies to
// both directions; a packet whose flight time overlaps a down interval is
// lost, including packets already in the air when the link fails.
struct LinkSpec {
    std::string a;
    PortId a_port = 0;
    std::string b;
    PortId b_port = 0;
    DirectionModel ab;
    DirectionModel ba;
    std::vector<Interval> down;
};

struct ConnectionSpec {
    uint32_t index = 0;
    uint32_t cid = 0;
    uint32_t pti_ip = 0;
    uint32_t pte_ip = 0;
    std::array<PortId, 2> ports{};
};

struct FlowSpec {
    TernaryMatch match;
    int32_t priority = 0;
    uint32_t connection = 0;  // index into the node's connections
};

struct NodeSpec {
    std::string name;
    bool is_host = false;
    uint32_t ip = 0;
    std::optional<size_t> max_connections;
    std::vector<ConnectionSpec> connections;
    std::vector<FlowSpec> flows;
    std::vector<Route> routes;
};

enum class TrafficKind : uint8_t { Cbr, Ping };

// Constant-rate UDP flow or ICMP-style request/reply probe. The first 12
// payload bytes carry the flow id and sequence number, so delivered bytes
// differ per packet.
struct TrafficSpec {
    TrafficKind kind = TrafficKind::Cbr;
    std::string name;
    std::string src;       // host node name
    uint32_t dst_ip = 0;   // owned by some host
    uint16_t src_port = 5000;
    uint16_t dst_port = 9000;
    SimTime interval_ns = 1'000'000;
    uint32_t payload_bytes = 64;
    SimTime start_ns = 0;
    std::optional<SimTime> stop_ns;    // cbr: defaults to scenario duration
    std::optional<uint64_t> count;     // ping: number of requests
};

// Complete scenario document: topology, per-node tables, link models,
// traffic, and simulation parameters.
struct Scenario {
    SimTime duration_ns = kNanosPerSecond;
    uint64_t seed = 1;
    uint8_t protect_protocol = kProtectProtocol;
    SeqParams seq;
    size_t max_connections = 1024;
    std::vector<NodeSpec> nodes;
    std::vector<LinkSpec> links;
    std::vector<TrafficSpec> traffic;
};

// Which tables apply() installs: the full protection setup, connections
// without any protected flows, or plain IPv4 forwarding only.
enum class ForwardingMode : uint8_t { Protected, Unprotected, Plain };

inline const char* to_string(ForwardingMode m) {
    switch (m) {
        case ForwardingMode::Protected: return "protected";
        case ForwardingMode::Unprotected: return "unprotected";
        case ForwardingMode::Plain: return "plain";
    }
    return "?";
}

}  // namespace oneplus
