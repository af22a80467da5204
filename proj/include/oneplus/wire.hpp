#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oneplus/bytes.hpp"
#include "oneplus/errors.hpp"

namespace oneplus {

// Outer IP protocol number used for protection tunnels. 253 is the RFC 3692
// experimentation value; reconfigurable through the scenario document.
constexpr uint8_t kProtectProtocol = 253;

constexpr uint8_t kProtoIcmp = 1;
constexpr uint8_t kProtoIpv4 = 4;  // IP-in-IP
constexpr uint8_t kProtoTcp = 6;
constexpr uint8_t kProtoUdp = 17;

constexpr size_t kIpv4HeaderSize = 20;  // no options
constexpr size_t kUdpHeaderSize = 8;
constexpr size_t kTcpHeaderSize = 20;
constexpr size_t kProtectionHeaderSize = 8;
// One encapsulation adds an outer IPv4 header plus the protection header.
constexpr size_t kEncapOverhead = kIpv4HeaderSize + kProtectionHeaderSize;

constexpr uint32_t kMaxCid = (1u << 24) - 1;
constexpr uint8_t kTunnelTtl = 64;

// On-wire record identifying a protection connection and ordering its packets.
// Layout: CID (3 bytes) | SN (4 bytes) | next protocol (1 byte), network order.
struct ProtectionHeader {
    uint32_t cid = 0;  // 24-bit
    uint32_t sn = 0;
    uint8_t next_protocol = kProtoIpv4;

    bool operator==(const ProtectionHeader&) const = default;
};

inline std::array<uint8_t, kProtectionHeaderSize> serialize_protection_header(const ProtectionHeader& h) {
    if (h.cid > kMaxCid) {
        throw RangeError("protection header cid " + std::to_string(h.cid) + " exceeds 24 bits");
    }
    std::array<uint8_t, kProtectionHeaderSize> out{};
    write_be24(out, 0, h.cid);
    write_be32(out, 3, h.sn);
    out[7] = h.next_protocol;
    return out;
}

inline ProtectionHeader parse_protection_header(std::span<const uint8_t> b) {
    if (b.size() < kProtectionHeaderSize) {
        throw MalformedPacket("truncated protection header");
    }
    return ProtectionHeader{read_be24(b, 0), read_be32(b, 3), b[7]};
}

// The IPv4 fields this stack reads and writes. Serialized headers are always
// 20 bytes (version 4, IHL 5, zero TOS/ID/fragment fields) with a freshly
// computed checksum; parse keeps the checksum seen on the wire.
struct Ipv4Header {
    uint32_t src = 0;
    uint32_t dst = 0;
    uint8_t protocol = 0;
    uint8_t ttl = kTunnelTtl;
    uint16_t total_length = kIpv4HeaderSize;
    uint16_t header_checksum = 0;

    bool operator==(const Ipv4Header&) const = default;
};

// RFC 1071 ones-complement sum over a 20-byte header, checksum field zeroed.
inline uint16_t ipv4_checksum(std::span<const uint8_t> header) {
    uint32_t sum = 0;
    for (size_t i = 0; i < kIpv4HeaderSize; i += 2) {
        if (i == 10) continue;  // checksum field
        sum += read_be16(header, i);
    }
    while (sum > 0xFFFF) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<uint16_t>(~sum & 0xFFFF);
}

inline bool ipv4_checksum_ok(std::span<const uint8_t> header) {
    return ipv4_checksum(header) == read_be16(header, 10);
}

inline std::array<uint8_t, kIpv4HeaderSize> serialize_ipv4_header(const Ipv4Header& h) {
    std::array<uint8_t, kIpv4HeaderSize> out{};
    out[0] = 0x45;  // version 4, IHL 5
    write_be16(out, 2, h.total_length);
    out[8] = h.ttl;
    out[9] = h.protocol;
    write_be32(out, 12, h.src);
    write_be32(out, 16, h.dst);
    write_be16(out, 10, ipv4_checksum(out));
    return out;
}

inline Ipv4Header parse_ipv4_header(std::span<const uint8_t> b) {
    if (b.size() < kIpv4HeaderSize) {
        throw MalformedPacket("truncated ipv4 header");
    }
    if ((b[0] >> 4) != 4) {
        throw MalformedPacket("ip version " + std::to_string(b[0] >> 4) + " is not 4");
    }
    if ((b[0] & 0x0F) != 5) {
        throw MalformedPacket("ipv4 header length " + std::to_string((b[0] & 0x0F) * 4) +
                              " unsupported (options)");
    }
    Ipv4Header h;
    h.total_length = read_be16(b, 2);
    h.ttl = b[8];
    h.protocol = b[9];
    h.header_checksum = read_be16(b, 10);
    h.src = read_be32(b, 12);
    h.dst = read_be32(b, 16);
    if (h.total_length < kIpv4HeaderSize) {
        throw MalformedPacket("ipv4 total length " + std::to_string(h.total_length) +
                              " below header size");
    }
    if (h.total_length > b.size()) {
        throw MalformedPacket("ipv4 total length " + std::to_string(h.total_length) +
                              " exceeds available " + std::to_string(b.size()) + " bytes");
    }
    return h;
}

// Flow key for ternary classification. Ports are 0 when the packet carries
// no parsed transport header.
struct FiveTuple {
    uint32_t src_ip = 0;
    uint32_t dst_ip = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t protocol = 0;

    bool operator==(const FiveTuple&) const = default;
};

enum class StackTag : uint8_t {
    Plain,        // IP/TP
    Protected,    // IP/P/IP/TP
    IpOnly,       // parsed only up to the IP header
    ProtPayload,  // bytes begin with a protection header (outer IP already removed)
};

inline const char* to_string(StackTag t) {
    switch (t) {
        case StackTag::Plain: return "plain";
        case StackTag::Protected: return "protected";
        case StackTag::IpOnly: return "ip-only";
        case StackTag::ProtPayload: return "prot-payload";
    }
    return "?";
}

// Raw bytes plus the parsed view of the supported header stacks. All
// constructors go through parse, so views are always consistent with bytes.
struct Packet {
    std::vector<uint8_t> bytes;
    StackTag stack = StackTag::IpOnly;
    std::optional<Ipv4Header> outer;        // absent for ProtPayload
    std::optional<ProtectionHeader> prot;   // present when a protection header parsed
    std::optional<Ipv4Header> inner;        // present when prot carries IPv4
    FiveTuple tuple;                        // outermost IP, ports when Plain
    bool outer_checksum_ok = true;

    size_t size() const { return bytes.size(); }

    // Destination the forwarding plane routes on: the outermost IP header's.
    uint32_t forwarding_dst() const {
        if (outer) return outer->dst;
        if (inner) return inner->dst;
        return 0;
    }

    bool operator==(const Packet& other) const { return bytes == other.bytes; }
};

namespace detail {

inline FiveTuple transport_tuple(const Ipv4Header& ip, std::span<const uint8_t> transport) {
    FiveTuple t{ip.src, ip.dst, 0, 0, ip.protocol};
    size_t need = ip.protocol == kProtoUdp ? kUdpHeaderSize
                : ip.protocol == kProtoTcp ? kTcpHeaderSize
                                           : 0;
    if (need != 0 && transport.size() >= need) {
        t.src_port = read_be16(transport, 0);
        t.dst_port = read_be16(transport, 2);
    }
    return t;
}

inline bool has_full_transport(const Ipv4Header& ip, size_t payload_len) {
    if (ip.protocol == kProtoUdp) return payload_len >= kUdpHeaderSize;
    if (ip.protocol == kProtoTcp) return payload_len >= kTcpHeaderSize;
    return false;
}

}  // namespace detail

// Parses one of the supported stacks: IP/TP (Plain), IP/P/IP/TP (Protected),
// or anything else with a valid leading IPv4 header (IpOnly). A bad outer
// checksum is flagged, not an error. Throws MalformedPacket on truncated or
// inconsistent headers.
inline Packet parse_packet(std::vector<uint8_t> bytes, uint8_t protect_proto = kProtectProtocol) {
    Packet p;
    p.outer = parse_ipv4_header(bytes);
    p.outer_checksum_ok = ipv4_checksum_ok(bytes);
    p.stack = StackTag::IpOnly;

    std::span<const uint8_t> payload(bytes);
    payload = payload.subspan(kIpv4HeaderSize, p.outer->total_length - kIpv4HeaderSize);

    if (p.outer->protocol == protect_proto && payload.size() >= kProtectionHeaderSize) {
        p.prot = parse_protection_header(payload);
        auto innerspan = payload.subspan(kProtectionHeaderSize);
        if (p.prot->next_protocol == kProtoIpv4) {
            try {
                p.inner = parse_ipv4_header(innerspan);
                p.stack = StackTag::Protected;
            } catch (const MalformedPacket&) {
                p.inner.reset();  // inner bytes stay opaque; stack stays IpOnly
            }
        }
    } else if (detail::has_full_transport(*p.outer, payload.size())) {
        p.stack = StackTag::Plain;
    }

    p.tuple = detail::transport_tuple(
        *p.outer, p.stack == StackTag::Plain ? payload : std::span<const uint8_t>{});
    p.bytes = std::move(bytes);
    return p;
}

namespace detail {

// Builds the ProtPayload view for bytes that begin with a protection header.
inline Packet parse_prot_payload(std::vector<uint8_t> bytes) {
    Packet p;
    p.prot = parse_protection_header(bytes);
    p.stack = StackTag::ProtPayload;
    if (p.prot->next_protocol == kProtoIpv4) {
        std::span<const uint8_t> rest(bytes);
        rest = rest.subspan(kProtectionHeaderSize);
        try {
            p.inner = parse_ipv4_header(rest);
            size_t transport_len = p.inner->total_length - kIpv4HeaderSize;
            p.tuple = transport_tuple(*p.inner, rest.subspan(kIpv4HeaderSize, transport_len));
        } catch (const MalformedPacket&) {
            p.inner.reset();
        }
    }
    p.bytes = std::move(bytes);
    return p;
}

}  // namespace detail

// Wraps a Plain or IpOnly packet into IP/P/<original>: new outer IPv4 header
// (tunnel protocol, TTL 64) followed by the protection header; the original
// bytes appear verbatim as the suffix.
inline Packet encapsulate(const Packet& p, const ProtectionHeader& h, uint32_t outer_src,
                          uint32_t outer_dst, uint8_t protect_proto = kProtectProtocol) {
    if (p.stack == StackTag::Protected) {
        throw AlreadyProtected("packet already carries a protection header");
    }
    if (p.stack == StackTag::ProtPayload) {
        throw WrongLayer("cannot encapsulate a bare protection payload");
    }
    if (p.bytes.size() + kEncapOverhead > 0xFFFF) {
        throw RangeError("encapsulated packet would exceed the ipv4 length field");
    }
    Ipv4Header outer;
    outer.src = outer_src;
    outer.dst = outer_dst;
    outer.protocol = protect_proto;
    outer.ttl = kTunnelTtl;
    outer.total_length = static_cast<uint16_t>(p.bytes.size() + kEncapOverhead);

    std::vector<uint8_t> bytes;
    bytes.reserve(outer.total_length);
    auto oh = serialize_ipv4_header(outer);
    bytes.insert(bytes.end(), oh.begin(), oh.end());
    auto ph = serialize_protection_header(h);
    bytes.insert(bytes.end(), ph.begin(), ph.end());
    bytes.insert(bytes.end(), p.bytes.begin(), p.bytes.end());
    return parse_packet(std::move(bytes), protect_proto);
}

// Removes the outer IPv4 header. On a Protected packet the result is a
// ProtPayload; on an IP-in-IP or tunnel-protocol IpOnly packet the result is
// the re-parsed inner packet.
inline Packet strip_outer_ip(const Packet& p, uint8_t protect_proto = kProtectProtocol) {
    if (p.stack == StackTag::Plain || p.stack == StackTag::ProtPayload || !p.outer) {
        throw WrongLayer("no outer ip layer to strip");
    }
    std::vector<uint8_t> rest(p.bytes.begin() + kIpv4HeaderSize,
                              p.bytes.begin() + p.outer->total_length);
    if (p.stack == StackTag::Protected ||
        (p.outer->protocol == protect_proto && p.prot.has_value())) {
        return detail::parse_prot_payload(std::move(rest));
    }
    if (p.outer->protocol == kProtoIpv4) {
        return parse_packet(std::move(rest), protect_proto);
    }
    throw WrongLayer("outer protocol " + std::to_string(p.outer->protocol) +
                     " is not a supported tunnel layer");
}

// Removes exactly one protection header. On a ProtPayload the remainder is
// re-parsed as the inner packet; on a full Protected packet the outer header
// is rewritten in place (protocol := next protocol, length -8, new checksum),
// yielding a plain IP-in-IP packet.
inline Packet strip_protection(const Packet& p, uint8_t protect_proto = kProtectProtocol) {
    if (p.stack == StackTag::ProtPayload) {
        if (p.prot->next_protocol != kProtoIpv4) {
            throw MalformedPacket("protection payload is not ipv4 (next protocol " +
                                  std::to_string(p.prot->next_protocol) + ")");
        }
        std::vector<uint8_t> rest(p.bytes.begin() + kProtectionHeaderSize, p.bytes.end());
        return parse_packet(std::move(rest), protect_proto);
    }
    if (p.stack == StackTag::Protected) {
        Ipv4Header outer = *p.outer;
        outer.protocol = p.prot->next_protocol;
        outer.total_length = static_cast<uint16_t>(outer.total_length - kProtectionHeaderSize);
        std::vector<uint8_t> bytes;
        bytes.reserve(p.bytes.size() - kProtectionHeaderSize);
        auto oh = serialize_ipv4_header(outer);
        bytes.insert(bytes.end(), oh.begin(), oh.end());
        bytes.insert(bytes.end(), p.bytes.begin() + kEncapOverhead, p.bytes.end());
        return parse_packet(std::move(bytes), protect_proto);
    }
    throw WrongLayer("packet carries no protection header");
}

// Standard forwarding TTL handling on the outermost header. Returns false
// (packet unchanged) when the TTL is already <= 1 and the packet must drop.
inline bool decrement_ttl(Packet& p) {
    if (!p.outer) throw WrongLayer("no ip header for ttl handling");
    if (p.outer->ttl <= 1) return false;
    p.outer->ttl--;
    p.bytes[8] = p.outer->ttl;
    write_be16(p.bytes, 10, ipv4_checksum(p.bytes));
    p.outer->header_checksum = read_be16(p.bytes, 10);
    p.outer_checksum_ok = true;
    return true;
}

// Assembly helpers for tests and traffic generators.

inline Packet make_udp_packet(uint32_t src, uint32_t dst, uint16_t src_port, uint16_t dst_port,
                              std::span<const uint8_t> payload, uint8_t ttl = kTunnelTtl) {
    Ipv4Header ip;
    ip.src = src;
    ip.dst = dst;
    ip.protocol = kProtoUdp;
    ip.ttl = ttl;
    ip.total_length = static_cast<uint16_t>(kIpv4HeaderSize + kUdpHeaderSize + payload.size());
    std::vector<uint8_t> bytes;
    bytes.reserve(ip.total_length);
    auto h = serialize_ipv4_header(ip);
    bytes.insert(bytes.end(), h.begin(), h.end());
    append_be16(bytes, src_port);
    append_be16(bytes, dst_port);
    append_be16(bytes, static_cast<uint16_t>(kUdpHeaderSize + payload.size()));
    append_be16(bytes, 0);  // checksum optional in ipv4
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    return parse_packet(std::move(bytes));
}

inline Packet make_tcp_packet(uint32_t src, uint32_t dst, uint16_t src_port, uint16_t dst_port,
                              std::span<const uint8_t> payload, uint8_t ttl = kTunnelTtl) {
    Ipv4Header ip;
    ip.src = src;
    ip.dst = dst;
    ip.protocol = kProtoTcp;
    ip.ttl = ttl;
    ip.total_length = static_cast<uint16_t>(kIpv4HeaderSize + kTcpHeaderSize + payload.size());
    std::vector<uint8_t> bytes;
    bytes.reserve(ip.total_length);
    auto h = serialize_ipv4_header(ip);
    bytes.insert(bytes.end(), h.begin(), h.end());
    append_be16(bytes, src_port);
    append_be16(bytes, dst_port);
    append_be32(bytes, 1);  // seq
    append_be32(bytes, 0);  // ack
    bytes.push_back(5 << 4);
    bytes.push_back(0x10);  // ACK
    append_be16(bytes, 1024);
    append_be16(bytes, 0);
    append_be16(bytes, 0);
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    return parse_packet(std::move(bytes));
}

inline Packet make_ip_packet(uint32_t src, uint32_t dst, uint8_t protocol,
                             std::span<const uint8_t> payload, uint8_t ttl = kTunnelTtl) {
    Ipv4Header ip;
    ip.src = src;
    ip.dst = dst;
    ip.protocol = protocol;
    ip.ttl = ttl;
    ip.total_length = static_cast<uint16_t>(kIpv4HeaderSize + payload.size());
    std::vector<uint8_t> bytes;
    bytes.reserve(ip.total_length);
    auto h = serialize_ipv4_header(ip);
    bytes.insert(bytes.end(), h.begin(), h.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    return parse_packet(std::move(bytes));
}

// Dotted-quad helpers used by configs and tests.
inline uint32_t ipv4_address(uint8_t a, uint8_t b, uint8_t c, uint8_t d) {
    return (static_cast<uint32_t>(a) << 24) | (static_cast<uint32_t>(b) << 16) |
           (static_cast<uint32_t>(c) << 8) | d;
}

inline std::string format_ipv4(uint32_t ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xFF) + "." +
           std::to_string((ip >> 8) & 0xFF) + "." + std::to_string(ip & 0xFF);
}

}  // namespace oneplus
