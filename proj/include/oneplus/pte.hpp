#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oneplus/errors.hpp"
#include "oneplus/seqwin.hpp"
#include "oneplus/wire.hpp"

namespace oneplus {

// Egress-side state of one protection connection, indexed by CID.
struct PteConnectionState {
    uint32_t cid = 0;
    SeqParams params;
    AcceptState accept;
    uint64_t accepted = 0;
    uint64_t duplicates_dropped = 0;
};

// Dense per-CID connection table. The CID doubles as the table index, so the
// table is bounded by a configured maximum connection count.
class PteTable {
public:
    explicit PteTable(size_t max_connections = 1024) : slots_(max_connections) {}

    void add_connection(uint32_t cid, const SeqParams& params) {
        if (cid >= slots_.size()) {
            throw ValidationError("cid " + std::to_string(cid) + " outside table of " +
                                  std::to_string(slots_.size()) + " connections");
        }
        if (slots_[cid].has_value()) {
            throw ConflictError("cid " + std::to_string(cid) + " already configured");
        }
        check_seq_params(params);
        PteConnectionState st;
        st.cid = cid;
        st.params = params;
        slots_[cid] = st;
    }

    PteConnectionState* find(uint32_t cid) {
        if (cid >= slots_.size() || !slots_[cid]) return nullptr;
        return &*slots_[cid];
    }
    const PteConnectionState* find(uint32_t cid) const {
        if (cid >= slots_.size() || !slots_[cid]) return nullptr;
        return &*slots_[cid];
    }

    size_t capacity() const { return slots_.size(); }
    uint64_t unknown_cid() const { return unknown_cid_; }
    void count_unknown_cid() { ++unknown_cid_; }

    std::vector<const PteConnectionState*> connections() const {
        std::vector<const PteConnectionState*> out;
        for (const auto& s : slots_) {
            if (s) out.push_back(&*s);
        }
        return out;
    }

private:
    std::vector<std::optional<PteConnectionState>> slots_;
    uint64_t unknown_cid_ = 0;
};

// Decaps-IP outcome: where the packet goes next in the ingress control flow.
struct DecapsIpResult {
    enum class Kind : uint8_t {
        ToDecapsP,         // outer stripped; packet begins with a protection header
        ToProtectForward,  // outer stripped; decapsulated packet re-enters classification
        PassThrough,       // not addressed to this node or not a tunnel; unchanged
    };
    Kind kind = Kind::PassThrough;
    Packet packet;
};

// Strips the outer IP header of tunnel packets addressed to this node.
// Protection-tunnel payloads are handed to Decaps-P; other tunnel payloads
// (IP-in-IP) re-enter Protect&Forward. Everything else passes through.
inline DecapsIpResult decaps_ip(const Packet& p, uint32_t my_ip,
                                uint8_t protect_proto = kProtectProtocol) {
    if (!p.outer || p.outer->dst != my_ip) {
        return {DecapsIpResult::Kind::PassThrough, p};
    }
    if (p.outer->protocol == protect_proto && p.prot.has_value()) {
        return {DecapsIpResult::Kind::ToDecapsP, strip_outer_ip(p, protect_proto)};
    }
    if (p.outer->protocol == kProtoIpv4) {
        return {DecapsIpResult::Kind::ToProtectForward, strip_outer_ip(p, protect_proto)};
    }
    return {DecapsIpResult::Kind::PassThrough, p};
}

struct DecapsPResult {
    enum class Kind : uint8_t {
        Forwarded,      // first copy: protection header stripped, inner returned
        DuplicateDrop,  // window rejected the sequence number
        UnknownCid,     // no connection configured for this CID
    };
    Kind kind = Kind::DuplicateDrop;
    std::optional<Packet> packet;  // set only for Forwarded
    uint32_t cid = 0;
    uint64_t sn = 0;
};

// Decaps-P: look up the connection by CID, run the acceptance window, and
// forward exactly the first copy of each sequence number. Duplicates and
// unknown CIDs are dropped and counted. A payload that cannot be forwarded
// (next protocol not IPv4, or inner bytes undecodable) is rejected before the
// window is consulted, so garbage never advances connection state.
inline DecapsPResult decaps_p(const Packet& p, PteTable& table,
                              uint8_t protect_proto = kProtectProtocol) {
    if (p.stack != StackTag::ProtPayload || !p.prot) {
        throw WrongLayer("decaps-p needs a packet that begins with a protection header");
    }
    if (p.prot->next_protocol != kProtoIpv4 || !p.inner) {
        throw MalformedPacket("protection payload is not a parsable ipv4 packet");
    }
    DecapsPResult r;
    r.cid = p.prot->cid;
    r.sn = p.prot->sn;
    PteConnectionState* st = table.find(r.cid);
    if (!st) {
        table.count_unknown_cid();
        r.kind = DecapsPResult::Kind::UnknownCid;
        return r;
    }
    if (accept(st->accept, r.sn, st->params) == Decision::Accept) {
        ++st->accepted;
        r.kind = DecapsPResult::Kind::Forwarded;
        r.packet = strip_protection(p, protect_proto);
    } else {
        ++st->duplicates_dropped;
        r.kind = DecapsPResult::Kind::DuplicateDrop;
    }
    return r;
}

}  // namespace oneplus
