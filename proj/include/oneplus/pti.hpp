#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "oneplus/errors.hpp"
#include "oneplus/seqwin.hpp"
#include "oneplus/wire.hpp"

namespace oneplus {

using PortId = uint32_t;

// One ternary field: a packet value f matches when (f & mask) == value.
// An all-zero mask is a wildcard.
template <typename T>
struct TernaryField {
    T value = 0;
    T mask = 0;

    static TernaryField exact(T v) { return {v, static_cast<T>(~T{0})}; }
    static TernaryField any() { return {0, 0}; }

    bool matches(T field) const { return (field & mask) == value; }
    bool operator==(const TernaryField&) const = default;
};

struct TernaryMatch {
    TernaryField<uint32_t> src_ip;
    TernaryField<uint32_t> dst_ip;
    TernaryField<uint16_t> src_port;
    TernaryField<uint16_t> dst_port;
    TernaryField<uint8_t> protocol;

    bool matches(const FiveTuple& t) const {
        return src_ip.matches(t.src_ip) && dst_ip.matches(t.dst_ip) &&
               src_port.matches(t.src_port) && dst_port.matches(t.dst_port) &&
               protocol.matches(t.protocol);
    }
    bool operator==(const TernaryMatch&) const = default;
};

// Parameters handed to the protect action on a match. They mirror the bound
// protection connection; index selects the connection's sequence counter.
struct ProtectActionParams {
    uint32_t index = 0;
    uint32_t cid = 0;
    uint32_t src_ip = 0;           // this node (tunnel ingress)
    uint32_t dst_ip = 0;           // tunnel egress
    std::array<PortId, 2> egress_ports{};

    bool operator==(const ProtectActionParams&) const = default;
};

struct FlowRule {
    TernaryMatch match;
    int32_t priority = 0;
    ProtectActionParams action;

    bool operator==(const FlowRule&) const = default;
};

template <typename T>
inline void check_ternary_field(const TernaryField<T>& f, const std::string& where) {
    if ((f.value & static_cast<T>(~f.mask)) != 0) {
        throw ValidationError(where + ": ternary value has bits outside its mask");
    }
}

inline void check_flow_rule(const FlowRule& r, const std::string& where = "flow rule") {
    check_ternary_field(r.match.src_ip, where + ".src_ip");
    check_ternary_field(r.match.dst_ip, where + ".dst_ip");
    check_ternary_field(r.match.src_port, where + ".src_port");
    check_ternary_field(r.match.dst_port, where + ".dst_port");
    check_ternary_field(r.match.protocol, where + ".protocol");
}

// Match-action table with ternary matching. Lookup returns the matching rule
// of highest priority; between equal priorities the earlier-installed rule
// wins. Internally the rules are kept presorted so lookup is a first-match
// scan in (priority desc, install order asc) order.
class FlowTable {
public:
    // Throws ConflictError when an identical (match, priority) pair exists.
    void install(const FlowRule& r) {
        check_flow_rule(r);
        for (const auto& e : rules_) {
            if (e.rule.match == r.match && e.rule.priority == r.priority) {
                throw ConflictError("duplicate flow rule (same match and priority)");
            }
        }
        rules_.push_back(Entry{r, next_order_++});
        std::stable_sort(rules_.begin(), rules_.end(), [](const Entry& a, const Entry& b) {
            if (a.rule.priority != b.rule.priority) return a.rule.priority > b.rule.priority;
            return a.order < b.order;
        });
    }

    const FlowRule* classify(const FiveTuple& t) const {
        for (const auto& e : rules_) {
            if (e.rule.match.matches(t)) return &e.rule;
        }
        return nullptr;
    }

    size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

    // In installation order, for state dumps.
    std::vector<FlowRule> rules_in_install_order() const {
        std::vector<Entry> copy = rules_;
        std::sort(copy.begin(), copy.end(),
                  [](const Entry& a, const Entry& b) { return a.order < b.order; });
        std::vector<FlowRule> out;
        out.reserve(copy.size());
        for (auto& e : copy) out.push_back(e.rule);
        return out;
    }

private:
    struct Entry {
        FlowRule rule;
        uint64_t order = 0;
    };
    std::vector<Entry> rules_;
    uint64_t next_order_ = 0;
};

// Returns the rule a Plain or IpOnly packet's five-tuple selects, or nullptr
// on a table miss.
inline const FlowRule* classify(const Packet& p, const FlowTable& table) {
    return table.classify(p.tuple);
}

// Ingress-side state of one protection connection.
struct ProtectionConnection {
    uint32_t index = 0;
    uint32_t cid = 0;
    uint32_t pti_ip = 0;
    uint32_t pte_ip = 0;
    std::array<PortId, 2> egress_ports{};
    SnCounter counter;
};

struct Emission {
    Packet packet;
    PortId port = 0;
};

// The protect action: advance the connection's sequence counter, encapsulate,
// and emit two byte-identical copies on the connection's two egress ports.
inline std::array<Emission, 2> protect_and_forward(const Packet& p, ProtectionConnection& conn,
                                                   const SeqParams& params,
                                                   uint8_t protect_proto = kProtectProtocol) {
    uint64_t sn = conn.counter.next(params);
    ProtectionHeader h{conn.cid, static_cast<uint32_t>(sn), kProtoIpv4};
    Packet enc = encapsulate(p, h, conn.pti_ip, conn.pte_ip, protect_proto);
    return {Emission{enc, conn.egress_ports[0]}, Emission{std::move(enc), conn.egress_ports[1]}};
}

}  // namespace oneplus
