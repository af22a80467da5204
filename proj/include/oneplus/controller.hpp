#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "oneplus/config.hpp"
#include "oneplus/errors.hpp"
#include "oneplus/node.hpp"

namespace oneplus {

// ---------------------------------------------------------------------------
// Address helpers

inline std::optional<uint32_t> parse_ipv4_string(const std::string& s) {
    uint32_t parts[4];
    size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        if (pos >= s.size() || !isdigit(static_cast<unsigned char>(s[pos]))) return std::nullopt;
        uint32_t v = 0;
        size_t digits = 0;
        while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) {
            v = v * 10 + (s[pos] - '0');
            ++pos;
            if (++digits > 3 || v > 255) return std::nullopt;
        }
        parts[i] = v;
        if (i < 3) {
            if (pos >= s.size() || s[pos] != '.') return std::nullopt;
            ++pos;
        }
    }
    if (pos != s.size()) return std::nullopt;
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3];
}

// "a.b.c.d/len"
inline std::optional<std::pair<uint32_t, uint8_t>> parse_prefix_string(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) return std::nullopt;
    auto ip = parse_ipv4_string(s.substr(0, slash));
    if (!ip) return std::nullopt;
    const std::string lenpart = s.substr(slash + 1);
    if (lenpart.empty() || lenpart.size() > 2 ||
        !std::all_of(lenpart.begin(), lenpart.end(),
                     [](char c) { return isdigit(static_cast<unsigned char>(c)); })) {
        return std::nullopt;
    }
    int len = std::stoi(lenpart);
    if (len < 0 || len > 32) return std::nullopt;
    return std::make_pair(*ip, static_cast<uint8_t>(len));
}

// ---------------------------------------------------------------------------
// Document parsing (JSON). Every error names the offending field path.

namespace cfg {

using json = nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ParseError(path + ": " + msg);
}

inline const json* opt_member(const json& j, const char* key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return nullptr;
    return &*it;
}

inline const json& req_member(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) fail(path, "missing required field '" + std::string(key) + "'");
    return *it;
}

inline double num(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

inline uint64_t uint(const json& j, const std::string& path) {
    if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return j.get<uint64_t>();
}

inline std::string str(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

inline uint32_t ip_addr(const json& j, const std::string& path) {
    auto v = parse_ipv4_string(str(j, path));
    if (!v) fail(path, "expected a dotted IPv4 address");
    return *v;
}

inline TernaryField<uint32_t> ternary_ip(const json& j, const std::string& path) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (auto pref = parse_prefix_string(s)) {
            return {pref->first, prefix_mask(pref->second)};
        }
        if (auto ip = parse_ipv4_string(s)) {
            return TernaryField<uint32_t>::exact(*ip);
        }
        fail(path, "expected 'a.b.c.d', 'a.b.c.d/len', or {value, mask}");
    }
    if (j.is_object()) {
        uint32_t value = ip_addr(req_member(j, "value", path), path + ".value");
        uint32_t mask = ip_addr(req_member(j, "mask", path), path + ".mask");
        return {value, mask};
    }
    fail(path, "expected 'a.b.c.d', 'a.b.c.d/len', or {value, mask}");
}

inline TernaryField<uint16_t> ternary_port(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) {
        uint64_t v = j.get<uint64_t>();
        if (v > 0xFFFF) fail(path, "port exceeds 16 bits");
        return TernaryField<uint16_t>::exact(static_cast<uint16_t>(v));
    }
    if (j.is_object()) {
        uint64_t v = uint(req_member(j, "value", path), path + ".value");
        uint64_t m = uint(req_member(j, "mask", path), path + ".mask");
        if (v > 0xFFFF || m > 0xFFFF) fail(path, "port field exceeds 16 bits");
        return {static_cast<uint16_t>(v), static_cast<uint16_t>(m)};
    }
    fail(path, "expected a port number or {value, mask}");
}

inline TernaryField<uint8_t> ternary_protocol(const json& j, const std::string& path) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "udp") return TernaryField<uint8_t>::exact(kProtoUdp);
        if (s == "tcp") return TernaryField<uint8_t>::exact(kProtoTcp);
        if (s == "icmp") return TernaryField<uint8_t>::exact(kProtoIcmp);
        fail(path, "unknown protocol name '" + s + "'");
    }
    if (j.is_number_unsigned()) {
        uint64_t v = j.get<uint64_t>();
        if (v > 0xFF) fail(path, "protocol exceeds 8 bits");
        return TernaryField<uint8_t>::exact(static_cast<uint8_t>(v));
    }
    if (j.is_object()) {
        uint64_t v = uint(req_member(j, "value", path), path + ".value");
        uint64_t m = uint(req_member(j, "mask", path), path + ".mask");
        if (v > 0xFF || m > 0xFF) fail(path, "protocol field exceeds 8 bits");
        return {static_cast<uint8_t>(v), static_cast<uint8_t>(m)};
    }
    fail(path, "expected a protocol number, name, or {value, mask}");
}

inline TernaryMatch match_spec(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected a match object");
    static const std::set<std::string> known{"src_ip", "dst_ip", "src_port", "dst_port",
                                             "protocol"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) fail(path + "." + it.key(), "unknown match field");
    }
    TernaryMatch m;
    if (const json* f = opt_member(j, "src_ip")) m.src_ip = ternary_ip(*f, path + ".src_ip");
    if (const json* f = opt_member(j, "dst_ip")) m.dst_ip = ternary_ip(*f, path + ".dst_ip");
    if (const json* f = opt_member(j, "src_port")) m.src_port = ternary_port(*f, path + ".src_port");
    if (const json* f = opt_member(j, "dst_port")) m.dst_port = ternary_port(*f, path + ".dst_port");
    if (const json* f = opt_member(j, "protocol")) m.protocol = ternary_protocol(*f, path + ".protocol");
    return m;
}

// Jitter forms: a number J (half-width, [-J, +J] around the base delay) or a
// range [lo, hi] of additive offsets.
inline std::pair<SimTime, SimTime> jitter_spec(const json& j, const std::string& path) {
    if (j.is_number()) {
        double half = j.get<double>();
        if (half < 0) fail(path, "jitter half-width must be >= 0");
        return {seconds_to_ns(-half), seconds_to_ns(half)};
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {seconds_to_ns(j[0].get<double>()), seconds_to_ns(j[1].get<double>())};
    }
    fail(path, "expected a jitter half-width or [lo, hi] range");
}

inline void direction_fields(const json& j, const std::string& path, DirectionModel& m) {
    if (const json* f = opt_member(j, "delay_s")) {
        m.base_delay_ns = seconds_to_ns(num(*f, path + ".delay_s"));
    }
    if (const json* f = opt_member(j, "jitter_s")) {
        auto [lo, hi] = jitter_spec(*f, path + ".jitter_s");
        m.jitter_lo_ns = lo;
        m.jitter_hi_ns = hi;
    }
    if (const json* f = opt_member(j, "loss")) m.loss = num(*f, path + ".loss");
    if (const json* f = opt_member(j, "capacity_bps")) m.capacity_bps = uint(*f, path + ".capacity_bps");
}

}  // namespace cfg

// Parses a scenario document. Structural problems throw ParseError with the
// field path; cross-reference problems are reported by validate().
inline Scenario load_config(const std::string& text) {
    cfg::json root;
    try {
        root = cfg::json::parse(text);
    } catch (const cfg::json::parse_error& e) {
        size_t line = 1;
        for (size_t i = 0; i < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') ++line;
        }
        throw ParseError("json syntax error at line " + std::to_string(line) + ": " + e.what());
    }
    if (!root.is_object()) throw ParseError("document: expected a top-level object");

    Scenario sc;
    sc.duration_ns = seconds_to_ns(cfg::num(cfg::req_member(root, "duration_s", "document"),
                                            "duration_s"));
    if (const auto* f = cfg::opt_member(root, "seed")) sc.seed = cfg::uint(*f, "seed");
    if (const auto* f = cfg::opt_member(root, "protect_protocol")) {
        uint64_t v = cfg::uint(*f, "protect_protocol");
        if (v > 0xFF) cfg::fail("protect_protocol", "exceeds 8 bits");
        sc.protect_protocol = static_cast<uint8_t>(v);
    }
    if (const auto* f = cfg::opt_member(root, "sn_space")) {
        sc.seq.sn_space = cfg::uint(*f, "sn_space");
        sc.seq.window = sc.seq.sn_space / 2;
    }
    if (const auto* f = cfg::opt_member(root, "window")) sc.seq.window = cfg::uint(*f, "window");
    if (const auto* f = cfg::opt_member(root, "max_connections")) {
        sc.max_connections = cfg::uint(*f, "max_connections");
    }

    const cfg::json& nodes = cfg::req_member(root, "nodes", "document");
    if (!nodes.is_array()) cfg::fail("nodes", "expected an array");
    for (size_t i = 0; i < nodes.size(); ++i) {
        const cfg::json& nj = nodes[i];
        const std::string path = "nodes[" + std::to_string(i) + "]";
        NodeSpec n;
        n.name = cfg::str(cfg::req_member(nj, "name", path), path + ".name");
        const std::string kind = cfg::str(cfg::req_member(nj, "kind", path), path + ".kind");
        if (kind == "host") {
            n.is_host = true;
        } else if (kind != "switch") {
            cfg::fail(path + ".kind", "expected 'host' or 'switch'");
        }
        n.ip = cfg::ip_addr(cfg::req_member(nj, "ip", path), path + ".ip");
        if (const auto* f = cfg::opt_member(nj, "max_connections")) {
            n.max_connections = cfg::uint(*f, path + ".max_connections");
        }
        if (const auto* cj = cfg::opt_member(nj, "connections")) {
            if (!cj->is_array()) cfg::fail(path + ".connections", "expected an array");
            for (size_t k = 0; k < cj->size(); ++k) {
                const std::string cpath = path + ".connections[" + std::to_string(k) + "]";
                const cfg::json& c = (*cj)[k];
                ConnectionSpec conn;
                conn.index = static_cast<uint32_t>(cfg::uint(cfg::req_member(c, "index", cpath), cpath + ".index"));
                conn.cid = static_cast<uint32_t>(cfg::uint(cfg::req_member(c, "cid", cpath), cpath + ".cid"));
                conn.pti_ip = cfg::ip_addr(cfg::req_member(c, "pti", cpath), cpath + ".pti");
                conn.pte_ip = cfg::ip_addr(cfg::req_member(c, "pte", cpath), cpath + ".pte");
                const cfg::json& ports = cfg::req_member(c, "ports", cpath);
                if (!ports.is_array() || ports.size() != 2) {
                    cfg::fail(cpath + ".ports", "expected exactly two egress ports");
                }
                conn.ports[0] = static_cast<PortId>(cfg::uint(ports[0], cpath + ".ports[0]"));
                conn.ports[1] = static_cast<PortId>(cfg::uint(ports[1], cpath + ".ports[1]"));
                n.connections.push_back(conn);
            }
        }
        if (const auto* fj = cfg::opt_member(nj, "flows")) {
            if (!fj->is_array()) cfg::fail(path + ".flows", "expected an array");
            for (size_t k = 0; k < fj->size(); ++k) {
                const std::string fpath = path + ".flows[" + std::to_string(k) + "]";
                const cfg::json& f = (*fj)[k];
                FlowSpec flow;
                flow.match = cfg::match_spec(cfg::req_member(f, "match", fpath), fpath + ".match");
                if (const auto* p = cfg::opt_member(f, "priority")) {
                    if (!p->is_number_integer()) cfg::fail(fpath + ".priority", "expected an integer");
                    flow.priority = p->get<int32_t>();
                }
                flow.connection = static_cast<uint32_t>(
                    cfg::uint(cfg::req_member(f, "connection", fpath), fpath + ".connection"));
                n.flows.push_back(flow);
            }
        }
        if (const auto* rj = cfg::opt_member(nj, "routes")) {
            if (!rj->is_array()) cfg::fail(path + ".routes", "expected an array");
            for (size_t k = 0; k < rj->size(); ++k) {
                const std::string rpath = path + ".routes[" + std::to_string(k) + "]";
                const cfg::json& r = (*rj)[k];
                const std::string prefix =
                    cfg::str(cfg::req_member(r, "prefix", rpath), rpath + ".prefix");
                auto parsed = parse_prefix_string(prefix);
                if (!parsed) cfg::fail(rpath + ".prefix", "expected 'a.b.c.d/len'");
                Route route;
                route.prefix = parsed->first;
                route.prefix_len = parsed->second;
                route.port = static_cast<PortId>(
                    cfg::uint(cfg::req_member(r, "port", rpath), rpath + ".port"));
                n.routes.push_back(route);
            }
        }
        sc.nodes.push_back(std::move(n));
    }

    const cfg::json& links = cfg::req_member(root, "links", "document");
    if (!links.is_array()) cfg::fail("links", "expected an array");
    for (size_t i = 0; i < links.size(); ++i) {
        const cfg::json& lj = links[i];
        const std::string path = "links[" + std::to_string(i) + "]";
        LinkSpec l;
        l.a = cfg::str(cfg::req_member(lj, "a", path), path + ".a");
        l.b = cfg::str(cfg::req_member(lj, "b", path), path + ".b");
        l.a_port = static_cast<PortId>(cfg::uint(cfg::req_member(lj, "a_port", path), path + ".a_port"));
        l.b_port = static_cast<PortId>(cfg::uint(cfg::req_member(lj, "b_port", path), path + ".b_port"));
        DirectionModel shared;
        cfg::direction_fields(lj, path, shared);
        l.ab = shared;
        l.ba = shared;
        if (const auto* d = cfg::opt_member(lj, "ab")) cfg::direction_fields(*d, path + ".ab", l.ab);
        if (const auto* d = cfg::opt_member(lj, "ba")) cfg::direction_fields(*d, path + ".ba", l.ba);
        if (const auto* dj = cfg::opt_member(lj, "down")) {
            if (!dj->is_array()) cfg::fail(path + ".down", "expected an array of [down, up] pairs");
            for (size_t k = 0; k < dj->size(); ++k) {
                const cfg::json& iv = (*dj)[k];
                const std::string ipath = path + ".down[" + std::to_string(k) + "]";
                if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
                    cfg::fail(ipath, "expected [down_s, up_s]");
                }
                l.down.push_back(Interval{seconds_to_ns(iv[0].get<double>()),
                                          seconds_to_ns(iv[1].get<double>())});
            }
        }
        sc.links.push_back(std::move(l));
    }

    if (const auto* tj = cfg::opt_member(root, "traffic")) {
        if (!tj->is_array()) cfg::fail("traffic", "expected an array");
        for (size_t i = 0; i < tj->size(); ++i) {
            const cfg::json& t = (*tj)[i];
            const std::string path = "traffic[" + std::to_string(i) + "]";
            TrafficSpec ts;
            const std::string kind = cfg::str(cfg::req_member(t, "kind", path), path + ".kind");
            if (kind == "cbr") {
                ts.kind = TrafficKind::Cbr;
            } else if (kind == "ping") {
                ts.kind = TrafficKind::Ping;
            } else {
                cfg::fail(path + ".kind", "expected 'cbr' or 'ping'");
            }
            ts.name = cfg::str(cfg::req_member(t, "name", path), path + ".name");
            ts.src = cfg::str(cfg::req_member(t, "src", path), path + ".src");
            ts.dst_ip = cfg::ip_addr(cfg::req_member(t, "dst_ip", path), path + ".dst_ip");
            if (const auto* f = cfg::opt_member(t, "src_port")) {
                ts.src_port = static_cast<uint16_t>(cfg::uint(*f, path + ".src_port"));
            }
            if (const auto* f = cfg::opt_member(t, "dst_port")) {
                ts.dst_port = static_cast<uint16_t>(cfg::uint(*f, path + ".dst_port"));
            }
            ts.interval_ns = seconds_to_ns(
                cfg::num(cfg::req_member(t, "interval_s", path), path + ".interval_s"));
            if (const auto* f = cfg::opt_member(t, "payload_bytes")) {
                ts.payload_bytes = static_cast<uint32_t>(cfg::uint(*f, path + ".payload_bytes"));
            }
            if (const auto* f = cfg::opt_member(t, "start_s")) {
                ts.start_ns = seconds_to_ns(cfg::num(*f, path + ".start_s"));
            }
            if (const auto* f = cfg::opt_member(t, "stop_s")) {
                ts.stop_ns = seconds_to_ns(cfg::num(*f, path + ".stop_s"));
            }
            if (const auto* f = cfg::opt_member(t, "count")) {
                ts.count = cfg::uint(*f, path + ".count");
            }
            sc.traffic.push_back(std::move(ts));
        }
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Cross-reference validation

namespace detail {

inline const NodeSpec* find_node(const Scenario& sc, const std::string& name) {
    for (const auto& n : sc.nodes) {
        if (n.name == name) return &n;
    }
    return nullptr;
}

inline const NodeSpec* find_node_by_ip(const Scenario& sc, uint32_t ip) {
    for (const auto& n : sc.nodes) {
        if (n.ip == ip) return &n;
    }
    return nullptr;
}

}  // namespace detail

// Structural validation of a whole scenario. Throws ValidationError naming
// the offending field.
inline void validate(const Scenario& sc) {
    auto fail = [](const std::string& path, const std::string& msg) {
        throw ValidationError(path + ": " + msg);
    };

    if (sc.duration_ns <= 0) fail("duration_s", "must be positive");
    try {
        check_seq_params(sc.seq);
    } catch (const ParamError& e) {
        fail("sn_space/window", e.what());
    }
    if (sc.protect_protocol == kProtoIpv4 || sc.protect_protocol == kProtoTcp ||
        sc.protect_protocol == kProtoUdp || sc.protect_protocol == kProtoIcmp) {
        fail("protect_protocol", "collides with a parsed IP protocol");
    }
    if (sc.max_connections == 0) fail("max_connections", "must be at least 1");
    if (sc.nodes.empty()) fail("nodes", "at least one node is required");

    std::unordered_set<std::string> names;
    std::unordered_map<uint32_t, std::string> ips;
    for (size_t i = 0; i < sc.nodes.size(); ++i) {
        const NodeSpec& n = sc.nodes[i];
        const std::string path = "nodes[" + std::to_string(i) + "](" + n.name + ")";
        if (n.name.empty()) fail(path + ".name", "must not be empty");
        if (!names.insert(n.name).second) fail(path + ".name", "duplicate node name");
        if (n.ip == 0) fail(path + ".ip", "must not be 0.0.0.0");
        if (auto [it, fresh] = ips.emplace(n.ip, n.name); !fresh) {
            fail(path + ".ip", "address already used by node '" + it->second + "'");
        }
        if (n.is_host && !(n.connections.empty() && n.flows.empty() && n.routes.empty())) {
            fail(path, "hosts cannot carry switch tables");
        }
    }

    // Port attachment map, also used to check table references below.
    std::map<std::pair<std::string, PortId>, size_t> attached;
    for (size_t i = 0; i < sc.links.size(); ++i) {
        const LinkSpec& l = sc.links[i];
        const std::string path = "links[" + std::to_string(i) + "]";
        for (const auto* end : {&l.a, &l.b}) {
            if (!detail::find_node(sc, *end)) fail(path, "unknown node '" + *end + "'");
        }
        if (l.a == l.b) fail(path, "link endpoints must differ");
        if (!attached.emplace(std::make_pair(l.a, l.a_port), i).second) {
            fail(path + ".a_port", "port already attached to another link");
        }
        if (!attached.emplace(std::make_pair(l.b, l.b_port), i).second) {
            fail(path + ".b_port", "port already attached to another link");
        }
        for (const auto* dir : {&l.ab, &l.ba}) {
            const std::string dpath = path + (dir == &l.ab ? ".ab" : ".ba");
            if (dir->base_delay_ns < 0) fail(dpath + ".delay_s", "must be >= 0");
            if (dir->jitter_lo_ns > dir->jitter_hi_ns) fail(dpath + ".jitter_s", "lo exceeds hi");
            if (dir->base_delay_ns + dir->jitter_lo_ns < 0) {
                fail(dpath + ".jitter_s", "delay plus jitter can go negative");
            }
            if (dir->loss < 0.0 || dir->loss > 1.0) fail(dpath + ".loss", "must be within [0, 1]");
        }
        SimTime prev_up = -1;
        for (size_t k = 0; k < l.down.size(); ++k) {
            const std::string ipath = path + ".down[" + std::to_string(k) + "]";
            if (l.down[k].down_ns >= l.down[k].up_ns) fail(ipath, "down must precede up");
            if (l.down[k].down_ns < prev_up) fail(ipath, "intervals must be sorted and disjoint");
            prev_up = l.down[k].up_ns;
        }
    }

    for (size_t i = 0; i < sc.nodes.size(); ++i) {
        const NodeSpec& n = sc.nodes[i];
        const std::string path = "nodes[" + std::to_string(i) + "](" + n.name + ")";
        if (n.is_host) {
            size_t count = 0;
            for (const auto& [key, idx] : attached) {
                if (key.first == n.name) ++count;
            }
            if (count != 1) fail(path, "a host needs exactly one attached link");
            continue;
        }
        std::unordered_set<uint32_t> indexes;
        std::set<std::pair<uint32_t, uint32_t>> cid_pte;
        for (size_t k = 0; k < n.connections.size(); ++k) {
            const ConnectionSpec& c = n.connections[k];
            const std::string cpath = path + ".connections[" + std::to_string(k) + "]";
            if (c.cid > kMaxCid) fail(cpath + ".cid", "exceeds 24 bits");
            if (!indexes.insert(c.index).second) fail(cpath + ".index", "duplicate index");
            if (!cid_pte.insert({c.cid, c.pte_ip}).second) {
                fail(cpath, "duplicate (cid, pte) pair on this node");
            }
            if (c.pti_ip != n.ip) fail(cpath + ".pti", "must equal the owning node's address");
            const NodeSpec* pte = detail::find_node_by_ip(sc, c.pte_ip);
            if (!pte || pte->is_host) fail(cpath + ".pte", "must address a switch node");
            if (pte->name == n.name) fail(cpath + ".pte", "cannot point at the node itself");
            size_t pte_max = pte->max_connections.value_or(sc.max_connections);
            if (c.cid >= pte_max) {
                fail(cpath + ".cid", "outside the egress node's connection table");
            }
            if (c.ports[0] == c.ports[1]) fail(cpath + ".ports", "the two paths must differ");
            for (PortId p : c.ports) {
                if (!attached.contains({n.name, p})) {
                    fail(cpath + ".ports", "port " + std::to_string(p) + " has no link");
                }
            }
        }
        std::set<std::pair<uint32_t, uint32_t>> route_keys;
        for (size_t k = 0; k < n.routes.size(); ++k) {
            const Route& r = n.routes[k];
            const std::string rpath = path + ".routes[" + std::to_string(k) + "]";
            if (r.prefix_len > 32) fail(rpath + ".prefix", "length exceeds 32");
            if ((r.prefix & ~prefix_mask(r.prefix_len)) != 0) {
                fail(rpath + ".prefix", "prefix has bits beyond its length");
            }
            if (!route_keys.insert({r.prefix, r.prefix_len}).second) {
                fail(rpath + ".prefix", "duplicate route");
            }
            if (!attached.contains({n.name, r.port})) {
                fail(rpath + ".port", "port " + std::to_string(r.port) + " has no link");
            }
        }
        for (size_t k = 0; k < n.flows.size(); ++k) {
            const FlowSpec& f = n.flows[k];
            const std::string fpath = path + ".flows[" + std::to_string(k) + "]";
            if (!indexes.contains(f.connection)) {
                fail(fpath + ".connection", "no connection with index " +
                                                std::to_string(f.connection));
            }
            try {
                check_flow_rule(FlowRule{f.match, f.priority, {}}, fpath + ".match");
            } catch (const ValidationError& e) {
                fail(fpath, e.what());
            }
            for (size_t j = 0; j < k; ++j) {
                if (n.flows[j].match == f.match && n.flows[j].priority == f.priority) {
                    fail(fpath, "duplicate (match, priority) on this node");
                }
            }
        }
    }

    // CIDs must be unique per egress node across every ingress that targets it.
    std::map<std::pair<std::string, uint32_t>, std::string> pte_cids;
    for (const auto& n : sc.nodes) {
        for (const auto& c : n.connections) {
            const NodeSpec* pte = detail::find_node_by_ip(sc, c.pte_ip);
            if (!pte) continue;  // reported above
            auto key = std::make_pair(pte->name, c.cid);
            auto [it, fresh] = pte_cids.emplace(key, n.name);
            if (!fresh) {
                throw ValidationError("nodes(" + n.name + ").connections: cid " +
                                      std::to_string(c.cid) + " already used at egress '" +
                                      pte->name + "' by node '" + it->second + "'");
            }
        }
    }

    std::unordered_set<std::string> traffic_names;
    for (size_t i = 0; i < sc.traffic.size(); ++i) {
        const TrafficSpec& t = sc.traffic[i];
        const std::string path = "traffic[" + std::to_string(i) + "](" + t.name + ")";
        if (t.name.empty()) fail(path + ".name", "must not be empty");
        if (!traffic_names.insert(t.name).second) fail(path + ".name", "duplicate traffic name");
        const NodeSpec* src = detail::find_node(sc, t.src);
        if (!src || !src->is_host) fail(path + ".src", "must name a host node");
        const NodeSpec* dst = detail::find_node_by_ip(sc, t.dst_ip);
        if (!dst || !dst->is_host) fail(path + ".dst_ip", "must address a host node");
        if (dst->name == src->name) fail(path + ".dst_ip", "source and destination coincide");
        if (t.interval_ns <= 0) fail(path + ".interval_s", "must be positive");
        if (t.payload_bytes < 12 || t.payload_bytes > 1400) {
            fail(path + ".payload_bytes", "must be within [12, 1400]");
        }
        if (t.start_ns < 0) fail(path + ".start_s", "must be >= 0");
        if (t.stop_ns && *t.stop_ns <= t.start_ns) fail(path + ".stop_s", "must follow start_s");
        if (t.kind == TrafficKind::Ping && t.count.value_or(1) == 0) {
            fail(path + ".count", "must be at least 1");
        }
    }
}

// ---------------------------------------------------------------------------
// Applying a document to a network of nodes

struct Network {
    std::vector<Node> switches;

    Node* find(const std::string& name) {
        for (auto& n : switches) {
            if (n.name() == name) return &n;
        }
        return nullptr;
    }
    const Node* find(const std::string& name) const {
        for (auto& n : switches) {
            if (n.name() == name) return &n;
        }
        return nullptr;
    }
    Node* find_by_ip(uint32_t ip) {
        for (auto& n : switches) {
            if (n.ip() == ip) return &n;
        }
        return nullptr;
    }
};

// Creates the switch nodes with empty tables (registers zero-initialized).
inline Network build_network(const Scenario& sc) {
    Network net;
    for (const auto& n : sc.nodes) {
        if (n.is_host) continue;
        Node node(n.name, n.ip, n.max_connections.value_or(sc.max_connections));
        node.set_protect_protocol(sc.protect_protocol);
        node.set_seq_params(sc.seq);
        net.switches.push_back(std::move(node));
    }
    return net;
}

// Installs the document's tables. Protection connections register their CID
// at the egress node; flows bind to the ingress connection's parameters.
// Routes are installed in every mode; flows only in Protected mode;
// connections in Protected and Unprotected modes. Re-applying onto already
// populated tables raises ConflictError.
inline void apply(const Scenario& sc, Network& net,
                  ForwardingMode mode = ForwardingMode::Protected) {
    for (const auto& spec : sc.nodes) {
        if (spec.is_host) continue;
        Node* node = net.find(spec.name);
        if (!node) {
            throw ValidationError("nodes(" + spec.name + "): network has no such switch");
        }
        for (const auto& r : spec.routes) node->routes().insert(r);
        if (mode == ForwardingMode::Plain) continue;

        for (const auto& c : spec.connections) {
            ProtectionConnection conn;
            conn.index = c.index;
            conn.cid = c.cid;
            conn.pti_ip = c.pti_ip;
            conn.pte_ip = c.pte_ip;
            conn.egress_ports = c.ports;
            node->add_connection(conn);
            Node* pte = net.find_by_ip(c.pte_ip);
            if (!pte) {
                throw ValidationError("nodes(" + spec.name + ").connections: egress " +
                                      format_ipv4(c.pte_ip) + " is not a switch");
            }
            pte->pte().add_connection(c.cid, sc.seq);
        }
        if (mode == ForwardingMode::Protected) {
            for (const auto& f : spec.flows) {
                const ConnectionSpec* c = nullptr;
                for (const auto& cand : spec.connections) {
                    if (cand.index == f.connection) {
                        c = &cand;
                        break;
                    }
                }
                if (!c) {
                    throw ValidationError("nodes(" + spec.name + ").flows: no connection index " +
                                          std::to_string(f.connection));
                }
                FlowRule rule;
                rule.match = f.match;
                rule.priority = f.priority;
                rule.action = ProtectActionParams{c->index, c->cid, c->pti_ip, c->pte_ip, c->ports};
                node->flows().install(rule);
            }
        }
    }
}

// Reads the installed tables back out of a network, in canonical order.
inline std::vector<NodeSpec> dump_tables(const Network& net) {
    std::vector<NodeSpec> out;
    for (const auto& node : net.switches) {
        NodeSpec spec;
        spec.name = node.name();
        spec.ip = node.ip();
        spec.max_connections = node.pte().capacity();
        for (const auto& c : node.connections()) {
            spec.connections.push_back(
                ConnectionSpec{c.index, c.cid, c.pti_ip, c.pte_ip, c.egress_ports});
        }
        std::sort(spec.connections.begin(), spec.connections.end(),
                  [](const ConnectionSpec& x, const ConnectionSpec& y) { return x.index < y.index; });
        for (const auto& r : node.flows().rules_in_install_order()) {
            spec.flows.push_back(FlowSpec{r.match, r.priority, r.action.index});
        }
        spec.routes = node.routes().routes();
        std::sort(spec.routes.begin(), spec.routes.end(), [](const Route& x, const Route& y) {
            return std::tie(x.prefix_len, x.prefix) < std::tie(y.prefix_len, y.prefix);
        });
        out.push_back(std::move(spec));
    }
    return out;
}

// Replaces the switch table sections of a scenario with live network state.
inline Scenario dump(const Network& net, const Scenario& topology) {
    Scenario out = topology;
    auto dumped = dump_tables(net);
    for (auto& n : out.nodes) {
        if (n.is_host) continue;
        for (auto& d : dumped) {
            if (d.name == n.name) {
                n.connections = d.connections;
                n.flows = d.flows;
                n.routes = d.routes;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical JSON emission

namespace cfg {

inline json ternary_ip_json(const TernaryField<uint32_t>& f) {
    return json{{"value", format_ipv4(f.value)}, {"mask", format_ipv4(f.mask)}};
}

template <typename T>
json ternary_num_json(const TernaryField<T>& f) {
    return json{{"value", f.value}, {"mask", f.mask}};
}

inline json match_json(const TernaryMatch& m) {
    json j = json::object();
    if (m.src_ip.mask != 0) j["src_ip"] = ternary_ip_json(m.src_ip);
    if (m.dst_ip.mask != 0) j["dst_ip"] = ternary_ip_json(m.dst_ip);
    if (m.src_port.mask != 0) j["src_port"] = ternary_num_json(m.src_port);
    if (m.dst_port.mask != 0) j["dst_port"] = ternary_num_json(m.dst_port);
    if (m.protocol.mask != 0) j["protocol"] = ternary_num_json(m.protocol);
    return j;
}

inline json direction_json(const DirectionModel& m) {
    json j = json::object();
    j["delay_s"] = ns_to_seconds(m.base_delay_ns);
    j["jitter_s"] = json::array({ns_to_seconds(m.jitter_lo_ns), ns_to_seconds(m.jitter_hi_ns)});
    j["loss"] = m.loss;
    j["capacity_bps"] = m.capacity_bps;
    return j;
}

}  // namespace cfg

inline std::string scenario_to_json(const Scenario& sc) {
    using cfg::json;
    json root;
    root["duration_s"] = ns_to_seconds(sc.duration_ns);
    root["seed"] = sc.seed;
    root["protect_protocol"] = sc.protect_protocol;
    root["sn_space"] = sc.seq.sn_space;
    root["window"] = sc.seq.window;
    root["max_connections"] = sc.max_connections;
    root["nodes"] = json::array();
    for (const auto& n : sc.nodes) {
        json nj;
        nj["name"] = n.name;
        nj["kind"] = n.is_host ? "host" : "switch";
        nj["ip"] = format_ipv4(n.ip);
        if (n.max_connections) nj["max_connections"] = *n.max_connections;
        if (!n.connections.empty()) {
            nj["connections"] = json::array();
            for (const auto& c : n.connections) {
                nj["connections"].push_back(json{{"index", c.index},
                                                 {"cid", c.cid},
                                                 {"pti", format_ipv4(c.pti_ip)},
                                                 {"pte", format_ipv4(c.pte_ip)},
                                                 {"ports", json::array({c.ports[0], c.ports[1]})}});
            }
        }
        if (!n.flows.empty()) {
            nj["flows"] = json::array();
            for (const auto& f : n.flows) {
                nj["flows"].push_back(json{{"match", cfg::match_json(f.match)},
                                           {"priority", f.priority},
                                           {"connection", f.connection}});
            }
        }
        if (!n.routes.empty()) {
            nj["routes"] = json::array();
            for (const auto& r : n.routes) {
                nj["routes"].push_back(
                    json{{"prefix", format_ipv4(r.prefix) + "/" + std::to_string(r.prefix_len)},
                         {"port", r.port}});
            }
        }
        root["nodes"].push_back(std::move(nj));
    }
    root["links"] = json::array();
    for (const auto& l : sc.links) {
        json lj;
        lj["a"] = l.a;
        lj["a_port"] = l.a_port;
        lj["b"] = l.b;
        lj["b_port"] = l.b_port;
        lj["ab"] = cfg::direction_json(l.ab);
        lj["ba"] = cfg::direction_json(l.ba);
        if (!l.down.empty()) {
            lj["down"] = cfg::json::array();
            for (const auto& iv : l.down) {
                lj["down"].push_back(
                    cfg::json::array({ns_to_seconds(iv.down_ns), ns_to_seconds(iv.up_ns)}));
            }
        }
        root["links"].push_back(std::move(lj));
    }
    root["traffic"] = json::array();
    for (const auto& t : sc.traffic) {
        json tj;
        tj["kind"] = t.kind == TrafficKind::Cbr ? "cbr" : "ping";
        tj["name"] = t.name;
        tj["src"] = t.src;
        tj["dst_ip"] = format_ipv4(t.dst_ip);
        tj["src_port"] = t.src_port;
        tj["dst_port"] = t.dst_port;
        tj["interval_s"] = ns_to_seconds(t.interval_ns);
        tj["payload_bytes"] = t.payload_bytes;
        tj["start_s"] = ns_to_seconds(t.start_ns);
        if (t.stop_ns) tj["stop_s"] = ns_to_seconds(*t.stop_ns);
        if (t.count) tj["count"] = *t.count;
        root["traffic"].push_back(std::move(tj));
    }
    return root.dump(2) + "\n";
}

// Rules that can never win: the witness packet built from the rule's own
// match values classifies to a different rule. Used by configuration checks.
inline std::vector<FlowRule> unreachable_rules(const Node& node) {
    std::vector<FlowRule> out;
    for (const auto& rule : node.flows().rules_in_install_order()) {
        FiveTuple witness{rule.match.src_ip.value, rule.match.dst_ip.value,
                          rule.match.src_port.value, rule.match.dst_port.value,
                          rule.match.protocol.value};
        const FlowRule* winner = node.flows().classify(witness);
        if (winner == nullptr || !(*winner == rule)) out.push_back(rule);
    }
    return out;
}

}  // namespace oneplus
