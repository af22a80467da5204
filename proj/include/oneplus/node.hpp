#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oneplus/forwarding.hpp"
#include "oneplus/pte.hpp"
#include "oneplus/pti.hpp"

namespace oneplus {

struct NodeCounters {
    uint64_t received = 0;
    uint64_t protected_out = 0;    // packets that entered a protection connection
    uint64_t decapsulated = 0;     // protection payloads accepted and forwarded on
    uint64_t duplicates_dropped = 0;
    uint64_t unknown_cid_dropped = 0;
    uint64_t plain_forwarded = 0;
    uint64_t no_route_dropped = 0;
    uint64_t ttl_dropped = 0;
    uint64_t malformed_dropped = 0;
};

// Why a processed packet produced no output.
enum class DropReason : uint8_t {
    None,
    Duplicate,
    UnknownCid,
    NoRoute,
    TtlExpired,
    Malformed,
};

struct PipelineResult {
    std::vector<Emission> emissions;
    DropReason drop = DropReason::None;
    // Set when the packet was accepted by Decaps-P on this node (used by the
    // simulator to attribute first-copy selection), together with the hash of
    // the inner bytes right after decapsulation.
    bool decapsulated = false;
    uint64_t decapsulated_hash = 0;
};

// One protection-capable forwarding node. The ingress control flow runs
// Decaps-IP, Decaps-P, then Protect&Forward; table misses fall back to
// longest-prefix-match forwarding. A node acts as PTI, PTE, transit hop, or
// any combination, depending purely on which tables the controller filled.
class Node {
public:
    Node() = default;
    Node(std::string name, uint32_t ip, size_t max_connections = 1024)
        : name_(std::move(name)), ip_(ip), pte_(max_connections) {}

    const std::string& name() const { return name_; }
    uint32_t ip() const { return ip_; }

    uint8_t protect_protocol() const { return protect_proto_; }
    void set_protect_protocol(uint8_t proto) { protect_proto_ = proto; }

    const SeqParams& seq_params() const { return seq_params_; }
    void set_seq_params(const SeqParams& p) {
        check_seq_params(p);
        seq_params_ = p;
    }

    FlowTable& flows() { return flows_; }
    const FlowTable& flows() const { return flows_; }
    LpmTable& routes() { return routes_; }
    const LpmTable& routes() const { return routes_; }
    PteTable& pte() { return pte_; }
    const PteTable& pte() const { return pte_; }
    NodeCounters& counters() { return counters_; }
    const NodeCounters& counters() const { return counters_; }

    // Uniqueness contract: one connection per index, and one (cid, pte_ip)
    // pair per node.
    void add_connection(const ProtectionConnection& c) {
        for (const auto& e : connections_) {
            if (e.index == c.index) {
                throw ConflictError("connection index " + std::to_string(c.index) +
                                    " already configured on " + name_);
            }
            if (e.cid == c.cid && e.pte_ip == c.pte_ip) {
                throw ConflictError("connection (cid " + std::to_string(c.cid) + ", pte " +
                                    format_ipv4(c.pte_ip) + ") already configured on " + name_);
            }
        }
        connections_.push_back(c);
    }

    ProtectionConnection* find_connection(uint32_t index) {
        for (auto& c : connections_) {
            if (c.index == index) return &c;
        }
        return nullptr;
    }
    const std::vector<ProtectionConnection>& connections() const { return connections_; }

    // Full ingress pipeline for one received packet. Undecodable tunnel
    // payloads are a counted drop, not an error.
    PipelineResult process(const Packet& received) {
        ++counters_.received;
        try {
            return process_inner(received);
        } catch (const MalformedPacket&) {
            ++counters_.malformed_dropped;
            PipelineResult result;
            result.drop = DropReason::Malformed;
            return result;
        }
    }

private:
    PipelineResult process_inner(const Packet& received) {
        PipelineResult result;
        DecapsIpResult d = decaps_ip(received, ip_, protect_proto_);
        Packet current = std::move(d.packet);

        if (d.kind == DecapsIpResult::Kind::ToDecapsP) {
            DecapsPResult pr = decaps_p(current, pte_, protect_proto_);
            switch (pr.kind) {
                case DecapsPResult::Kind::Forwarded:
                    ++counters_.decapsulated;
                    result.decapsulated = true;
                    result.decapsulated_hash = fnv1a64(pr.packet->bytes);
                    current = std::move(*pr.packet);
                    break;
                case DecapsPResult::Kind::DuplicateDrop:
                    ++counters_.duplicates_dropped;
                    result.drop = DropReason::Duplicate;
                    return result;
                case DecapsPResult::Kind::UnknownCid:
                    ++counters_.unknown_cid_dropped;
                    result.drop = DropReason::UnknownCid;
                    return result;
            }
        }

        // Protect&Forward applies to plain traffic, including traffic that
        // just left a tunnel; protected transit packets skip straight to
        // plain forwarding.
        if (current.stack == StackTag::Plain || current.stack == StackTag::IpOnly) {
            if (const FlowRule* rule = classify(current, flows_)) {
                ProtectionConnection* conn = find_connection(rule->action.index);
                if (!conn) {
                    throw ValidationError("rule references missing connection index " +
                                          std::to_string(rule->action.index) + " on " + name_);
                }
                auto copies = protect_and_forward(current, *conn, seq_params_, protect_proto_);
                ++counters_.protected_out;
                result.emissions.assign(std::make_move_iterator(copies.begin()),
                                        std::make_move_iterator(copies.end()));
                return result;
            }
        }

        // Standard IPv4 forwarding.
        if (!decrement_ttl(current)) {
            ++counters_.ttl_dropped;
            result.drop = DropReason::TtlExpired;
            return result;
        }
        auto port = routes_.lookup(current.forwarding_dst());
        if (!port) {
            ++counters_.no_route_dropped;
            result.drop = DropReason::NoRoute;
            return result;
        }
        ++counters_.plain_forwarded;
        result.emissions.push_back(Emission{std::move(current), *port});
        return result;
    }

    std::string name_;
    uint32_t ip_ = 0;
    uint8_t protect_proto_ = kProtectProtocol;
    SeqParams seq_params_;
    FlowTable flows_;
    std::vector<ProtectionConnection> connections_;
    PteTable pte_;
    LpmTable routes_;
    NodeCounters counters_;
};

}  // namespace oneplus
