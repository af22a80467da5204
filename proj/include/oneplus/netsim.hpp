#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "oneplus/controller.hpp"
#include "oneplus/rng.hpp"

namespace oneplus {

// ---------------------------------------------------------------------------
// Metrics

struct PacketRecord {
    uint64_t seq = 0;
    SimTime send_ns = 0;
    SimTime recv_ns = 0;
};

struct FlowMetrics {
    std::string name;
    TrafficKind kind = TrafficKind::Cbr;
    uint64_t sent = 0;
    uint64_t delivered = 0;  // cbr: packets at the sink; ping: completed round trips
    uint64_t lost = 0;       // sent - delivered
    uint64_t duplicates_dropped = 0;   // window rejections attributed to this flow
    uint64_t duplicate_deliveries = 0; // same original seen twice downstream (must stay 0)
    uint64_t copies_lost_link = 0;
    std::vector<PacketRecord> deliveries;  // cbr one-way records
    std::vector<PacketRecord> rtts;        // ping round-trip records
    double delay_min_s = 0, delay_mean_s = 0, delay_max_s = 0;
    double rtt_mean_s = 0, rtt_mad_s = 0;
};

// Copy-level accounting: every packet instance the simulation creates ends up
// in exactly one of these buckets.
struct SimLedger {
    uint64_t created = 0;
    uint64_t delivered_to_host = 0;
    uint64_t misdelivered = 0;
    uint64_t duplicates_dropped = 0;
    uint64_t unknown_cid_dropped = 0;
    uint64_t no_route_dropped = 0;
    uint64_t ttl_dropped = 0;
    uint64_t malformed_dropped = 0;
    uint64_t link_lost = 0;
    uint64_t unattached_dropped = 0;
    uint64_t payload_mismatches = 0;  // decapsulated bytes differed from the original

    uint64_t disposed() const {
        return delivered_to_host + misdelivered + duplicates_dropped + unknown_cid_dropped +
               no_route_dropped + ttl_dropped + malformed_dropped + link_lost +
               unattached_dropped;
    }
    bool conserved() const { return created == disposed(); }
};

// Per-sequence-number record of protected copies at their egress node.
struct PteTraceEntry {
    std::vector<SimTime> copy_arrivals;
    SimTime accepted_at = -1;
};

struct MetricsRecord {
    ForwardingMode mode = ForwardingMode::Protected;
    uint64_t seed = 0;
    SimTime end_ns = 0;
    std::vector<FlowMetrics> flows;
    SimLedger ledger;
    std::map<std::string, NodeCounters> node_counters;
    // Populated when RunOptions::trace_pte is set; key is (flow*2 + reply, seq).
    std::map<std::pair<uint64_t, uint64_t>, PteTraceEntry> pte_trace;
};

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Mean absolute deviation from the mean.
inline double mad_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double m = mean_of(xs);
    double s = 0;
    for (double x : xs) s += std::abs(x - m);
    return s / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------
// Event queue: strict (time, insertion order) dequeue ordering.

namespace sim {

struct PacketMeta {
    int32_t flow = -1;
    uint64_t seq = 0;
    SimTime origin_ns = 0;  // send time of the original request
    bool reply = false;
    uint64_t payload_hash = 0;  // fnv of the bytes as generated
};

struct Event {
    SimTime at = 0;
    uint64_t order = 0;
    enum class Kind : uint8_t { Arrival, Fire } kind = Kind::Fire;
    // Arrival
    int link = -1;
    int to_side = 0;
    Packet pkt;
    PacketMeta meta;
    // Fire
    int traffic = -1;
    uint64_t k = 0;
};

class EventQueue {
public:
    void push(Event e) {
        e.order = next_order_++;
        heap_.push(std::move(e));
    }
    bool empty() const { return heap_.empty(); }
    Event pop() {
        Event e = heap_.top();
        heap_.pop();
        return e;
    }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.order > b.order;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    uint64_t next_order_ = 0;
};

}  // namespace sim

struct RunOptions {
    ForwardingMode mode = ForwardingMode::Protected;
    std::optional<uint64_t> seed;  // overrides the scenario seed
    bool trace_pte = false;
};

// ---------------------------------------------------------------------------
// Simulation engine

namespace sim {

class Simulation {
public:
    Simulation(const Scenario& sc, const RunOptions& opts)
        : sc_(sc), opts_(opts), seed_(opts.seed.value_or(sc.seed)) {
        net_ = build_network(sc_);
        apply(sc_, net_, opts_.mode);
        for (auto& node : net_.switches) switch_by_name_[node.name()] = &node;
        for (size_t i = 0; i < sc_.nodes.size(); ++i) {
            if (sc_.nodes[i].is_host) host_by_name_[sc_.nodes[i].name] = i;
        }
        for (size_t i = 0; i < sc_.links.size(); ++i) {
            const LinkSpec& l = sc_.links[i];
            attach_[{l.a, l.a_port}] = {static_cast<int>(i), 0};
            attach_[{l.b, l.b_port}] = {static_cast<int>(i), 1};
            rngs_.push_back(Rng::stream(seed_, i));
        }
        metrics_.mode = opts_.mode;
        metrics_.seed = seed_;
        metrics_.flows.resize(sc_.traffic.size());
        for (size_t i = 0; i < sc_.traffic.size(); ++i) {
            metrics_.flows[i].name = sc_.traffic[i].name;
            metrics_.flows[i].kind = sc_.traffic[i].kind;
        }
        seen_.resize(sc_.traffic.size());
    }

    MetricsRecord run() {
        for (size_t i = 0; i < sc_.traffic.size(); ++i) {
            if (sc_.traffic[i].start_ns <= sc_.duration_ns) {
                Event e;
                e.at = sc_.traffic[i].start_ns;
                e.kind = Event::Kind::Fire;
                e.traffic = static_cast<int>(i);
                e.k = 0;
                q_.push(std::move(e));
            }
        }
        while (!q_.empty()) {
            Event e = q_.pop();
            metrics_.end_ns = e.at;
            if (e.kind == Event::Kind::Fire) {
                fire(e.traffic, e.k, e.at);
            } else {
                arrive(e, e.at);
            }
        }
        finalize();
        return std::move(metrics_);
    }

private:
    struct Attachment {
        int link = -1;
        int side = 0;
    };
    struct SeenSets {
        std::unordered_set<uint64_t> data;     // cbr deliveries / ping requests at target
        std::unordered_set<uint64_t> replies;  // ping replies at origin
    };

    void fire(int ti, uint64_t k, SimTime now) {
        const TrafficSpec& t = sc_.traffic[static_cast<size_t>(ti)];
        FlowMetrics& fm = metrics_.flows[static_cast<size_t>(ti)];
        SimTime stop = std::min(t.stop_ns.value_or(sc_.duration_ns), sc_.duration_ns);
        if (now > stop) return;
        if (t.kind == TrafficKind::Ping && k >= t.count.value_or(1)) return;

        const NodeSpec& src = *detail::find_node(sc_, t.src);
        std::vector<uint8_t> payload = make_payload(static_cast<uint32_t>(ti), k, t.payload_bytes);
        Packet pkt = t.kind == TrafficKind::Cbr
                         ? make_udp_packet(src.ip, t.dst_ip, t.src_port, t.dst_port, payload)
                         : make_ip_packet(src.ip, t.dst_ip, kProtoIcmp, payload);
        PacketMeta meta;
        meta.flow = ti;
        meta.seq = k;
        meta.origin_ns = now;
        meta.payload_hash = fnv1a64(pkt.bytes);
        ++fm.sent;
        ++metrics_.ledger.created;
        send_from(t.src, std::move(pkt), meta, now);

        SimTime next = now + t.interval_ns;
        bool more = t.kind == TrafficKind::Ping ? (k + 1 < t.count.value_or(1)) : true;
        if (more && next <= stop) {
            Event e;
            e.at = next;
            e.kind = Event::Kind::Fire;
            e.traffic = ti;
            e.k = k + 1;
            q_.push(std::move(e));
        }
    }

    static std::vector<uint8_t> make_payload(uint32_t flow, uint64_t seq, uint32_t size) {
        std::vector<uint8_t> p(size);
        write_be32(p, 0, flow);
        write_be32(p, 4, static_cast<uint32_t>(seq >> 32));
        write_be32(p, 8, static_cast<uint32_t>(seq));
        for (uint32_t i = 12; i < size; ++i) {
            p[i] = static_cast<uint8_t>(seq * 131 + i * 31 + flow * 17 + 7);
        }
        return p;
    }

    void send_from(const std::string& node_name, Packet pkt, const PacketMeta& meta, SimTime now) {
        // Hosts have exactly one attachment; emitting switches pass a port.
        for (const auto& [key, att] : attach_) {
            if (key.first == node_name) {
                transmit(att, std::move(pkt), meta, now);
                return;
            }
        }
        ++metrics_.ledger.unattached_dropped;
    }

    void transmit(const Attachment& att, Packet pkt, const PacketMeta& meta, SimTime now) {
        const LinkSpec& l = sc_.links[static_cast<size_t>(att.link)];
        const DirectionModel& dir = att.side == 0 ? l.ab : l.ba;
        Rng& rng = rngs_[static_cast<size_t>(att.link)];

        SimTime latency = dir.base_delay_ns;
        if (dir.jitter_hi_ns > dir.jitter_lo_ns) {
            latency += static_cast<SimTime>(std::llround(
                rng.uniform(static_cast<double>(dir.jitter_lo_ns),
                            static_cast<double>(dir.jitter_hi_ns))));
        } else {
            latency += dir.jitter_lo_ns;
        }
        if (dir.capacity_bps > 0) {
            latency += static_cast<SimTime>(static_cast<uint64_t>(pkt.bytes.size()) * 8u *
                                            1'000'000'000u / dir.capacity_bps);
        }
        SimTime arrive_at = now + latency;

        bool lost = false;
        for (const Interval& iv : l.down) {
            if (iv.down_ns < arrive_at && iv.up_ns > now) {
                lost = true;
                break;
            }
        }
        if (!lost && dir.loss > 0.0 && rng.bernoulli(dir.loss)) lost = true;
        if (lost) {
            ++metrics_.ledger.link_lost;
            if (meta.flow >= 0) ++metrics_.flows[static_cast<size_t>(meta.flow)].copies_lost_link;
            return;
        }

        Event e;
        e.at = arrive_at;
        e.kind = Event::Kind::Arrival;
        e.link = att.link;
        e.to_side = 1 - att.side;
        e.pkt = std::move(pkt);
        e.meta = meta;
        q_.push(std::move(e));
    }

    void arrive(Event& e, SimTime now) {
        const LinkSpec& l = sc_.links[static_cast<size_t>(e.link)];
        const std::string& name = e.to_side == 0 ? l.a : l.b;
        if (auto it = switch_by_name_.find(name); it != switch_by_name_.end()) {
            node_receive(*it->second, e, now);
        } else {
            host_receive(sc_.nodes[host_by_name_.at(name)], e, now);
        }
    }

    void node_receive(Node& node, Event& e, SimTime now) {
        if (opts_.trace_pte && e.pkt.stack == StackTag::Protected && e.pkt.outer &&
            e.pkt.outer->dst == node.ip() && e.meta.flow >= 0) {
            trace_key(e.meta).copy_arrivals.push_back(now);
        }
        PipelineResult r = node.process(e.pkt);
        if (r.decapsulated) {
            if (r.decapsulated_hash != e.meta.payload_hash) {
                ++metrics_.ledger.payload_mismatches;
            }
            if (opts_.trace_pte && e.meta.flow >= 0) trace_key(e.meta).accepted_at = now;
        }
        if (r.emissions.empty()) {
            switch (r.drop) {
                case DropReason::Duplicate:
                    ++metrics_.ledger.duplicates_dropped;
                    if (e.meta.flow >= 0) {
                        ++metrics_.flows[static_cast<size_t>(e.meta.flow)].duplicates_dropped;
                    }
                    break;
                case DropReason::UnknownCid: ++metrics_.ledger.unknown_cid_dropped; break;
                case DropReason::NoRoute: ++metrics_.ledger.no_route_dropped; break;
                case DropReason::TtlExpired: ++metrics_.ledger.ttl_dropped; break;
                case DropReason::Malformed: ++metrics_.ledger.malformed_dropped; break;
                case DropReason::None: ++metrics_.ledger.no_route_dropped; break;
            }
            return;
        }
        metrics_.ledger.created += r.emissions.size() - 1;
        for (auto& em : r.emissions) {
            auto it = attach_.find({node.name(), em.port});
            if (it == attach_.end()) {
                ++metrics_.ledger.unattached_dropped;
                continue;
            }
            transmit(it->second, std::move(em.packet), e.meta, now);
        }
    }

    void host_receive(const NodeSpec& host, Event& e, SimTime now) {
        if (e.pkt.forwarding_dst() != host.ip || e.meta.flow < 0) {
            ++metrics_.ledger.misdelivered;
            return;
        }
        ++metrics_.ledger.delivered_to_host;
        const size_t fi = static_cast<size_t>(e.meta.flow);
        const TrafficSpec& t = sc_.traffic[fi];
        FlowMetrics& fm = metrics_.flows[fi];
        SeenSets& seen = seen_[fi];

        if (t.kind == TrafficKind::Cbr) {
            if (host.ip != t.dst_ip) {
                return;  // counted as delivered_to_host; not this flow's sink
            }
            if (!seen.data.insert(e.meta.seq).second) {
                ++fm.duplicate_deliveries;
                return;
            }
            ++fm.delivered;
            fm.deliveries.push_back(PacketRecord{e.meta.seq, e.meta.origin_ns, now});
            return;
        }

        // Ping: the target answers every distinct request; the origin closes
        // the round trip.
        if (!e.meta.reply && host.ip == t.dst_ip) {
            if (!seen.data.insert(e.meta.seq).second) {
                ++fm.duplicate_deliveries;
                return;
            }
            PacketMeta meta = e.meta;
            meta.reply = true;
            std::vector<uint8_t> payload = make_payload(static_cast<uint32_t>(fi), e.meta.seq,
                                                        t.payload_bytes);
            Packet reply = make_ip_packet(host.ip, e.pkt.outer->src, kProtoIcmp, payload);
            meta.payload_hash = fnv1a64(reply.bytes);
            ++metrics_.ledger.created;
            send_from(host.name, std::move(reply), meta, now);
            return;
        }
        if (e.meta.reply) {
            if (!seen.replies.insert(e.meta.seq).second) {
                ++fm.duplicate_deliveries;
                return;
            }
            ++fm.delivered;
            fm.rtts.push_back(PacketRecord{e.meta.seq, e.meta.origin_ns, now});
        }
    }

    PteTraceEntry& trace_key(const PacketMeta& meta) {
        return metrics_.pte_trace[{static_cast<uint64_t>(meta.flow) * 2 + (meta.reply ? 1 : 0),
                                   meta.seq}];
    }

    void finalize() {
        for (auto& fm : metrics_.flows) {
            fm.lost = fm.sent - fm.delivered;
            std::vector<double> delays;
            delays.reserve(fm.deliveries.size());
            for (const auto& r : fm.deliveries) delays.push_back(ns_to_seconds(r.recv_ns - r.send_ns));
            if (!delays.empty()) {
                fm.delay_min_s = *std::min_element(delays.begin(), delays.end());
                fm.delay_max_s = *std::max_element(delays.begin(), delays.end());
                fm.delay_mean_s = mean_of(delays);
            }
            std::vector<double> rtts;
            rtts.reserve(fm.rtts.size());
            for (const auto& r : fm.rtts) rtts.push_back(ns_to_seconds(r.recv_ns - r.send_ns));
            if (!rtts.empty()) {
                fm.rtt_mean_s = mean_of(rtts);
                fm.rtt_mad_s = mad_of(rtts);
            }
        }
        for (const auto& node : net_.switches) {
            metrics_.node_counters[node.name()] = node.counters();
        }
    }

    const Scenario& sc_;
    RunOptions opts_;
    uint64_t seed_;
    Network net_;
    std::unordered_map<std::string, Node*> switch_by_name_;
    std::unordered_map<std::string, size_t> host_by_name_;
    std::map<std::pair<std::string, PortId>, Attachment> attach_;
    std::vector<Rng> rngs_;
    EventQueue q_;
    MetricsRecord metrics_;
    std::vector<SeenSets> seen_;
};

}  // namespace sim

// Validates and executes a scenario to completion (all traffic drained) and
// returns the collected metrics. Identical scenario, mode, and seed give an
// identical record.
inline MetricsRecord run(const Scenario& sc, const RunOptions& opts = {}) {
    validate(sc);
    sim::Simulation s(sc, opts);
    return s.run();
}

struct PingExperiment {
    double unprotected_mad = 0;
    double protected_mad = 0;
    double ratio = 0;
    uint64_t round_trips = 0;
};

// Runs the scenario's first ping flow once over a single path (no protected
// flows installed) and once protected, and compares mean absolute RTT
// deviations.
inline PingExperiment ping_experiment(const Scenario& sc) {
    int ping_idx = -1;
    for (size_t i = 0; i < sc.traffic.size(); ++i) {
        if (sc.traffic[i].kind == TrafficKind::Ping) {
            ping_idx = static_cast<int>(i);
            break;
        }
    }
    if (ping_idx < 0) throw ValidationError("traffic: ping experiment needs a ping flow");

    RunOptions unprot;
    unprot.mode = ForwardingMode::Unprotected;
    MetricsRecord mu = run(sc, unprot);
    RunOptions prot;
    prot.mode = ForwardingMode::Protected;
    MetricsRecord mp = run(sc, prot);

    PingExperiment out;
    out.unprotected_mad = mu.flows[static_cast<size_t>(ping_idx)].rtt_mad_s;
    out.protected_mad = mp.flows[static_cast<size_t>(ping_idx)].rtt_mad_s;
    out.ratio = out.unprotected_mad > 0 ? out.protected_mad / out.unprotected_mad : 0.0;
    out.round_trips = mp.flows[static_cast<size_t>(ping_idx)].delivered;
    return out;
}

// ---------------------------------------------------------------------------
// Output formats (schemas documented in the README)

namespace detail {

inline std::string fixed9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

}  // namespace detail

inline void write_flows_csv(const MetricsRecord& m, std::ostream& os) {
    os << "flow,kind,sent,delivered,lost,duplicates_dropped,duplicate_deliveries,"
          "copies_lost_link,delay_min_s,delay_mean_s,delay_max_s,rtt_count,rtt_mean_s,rtt_mad_s\n";
    for (const auto& f : m.flows) {
        os << f.name << ',' << (f.kind == TrafficKind::Cbr ? "cbr" : "ping") << ',' << f.sent
           << ',' << f.delivered << ',' << f.lost << ',' << f.duplicates_dropped << ','
           << f.duplicate_deliveries << ',' << f.copies_lost_link << ','
           << detail::fixed9(f.delay_min_s) << ',' << detail::fixed9(f.delay_mean_s) << ','
           << detail::fixed9(f.delay_max_s) << ',' << f.rtts.size() << ','
           << detail::fixed9(f.rtt_mean_s) << ',' << detail::fixed9(f.rtt_mad_s) << '\n';
    }
}

inline void write_packets_csv(const MetricsRecord& m, std::ostream& os) {
    os << "flow,event,seq,send_s,recv_s,value_s\n";
    for (const auto& f : m.flows) {
        for (const auto& r : f.deliveries) {
            os << f.name << ",delivery," << r.seq << ',' << detail::fixed9(ns_to_seconds(r.send_ns))
               << ',' << detail::fixed9(ns_to_seconds(r.recv_ns)) << ','
               << detail::fixed9(ns_to_seconds(r.recv_ns - r.send_ns)) << '\n';
        }
        for (const auto& r : f.rtts) {
            os << f.name << ",rtt," << r.seq << ',' << detail::fixed9(ns_to_seconds(r.send_ns))
               << ',' << detail::fixed9(ns_to_seconds(r.recv_ns)) << ','
               << detail::fixed9(ns_to_seconds(r.recv_ns - r.send_ns)) << '\n';
        }
    }
}

inline void write_summary(const MetricsRecord& m, std::ostream& os) {
    os << "mode " << to_string(m.mode) << " seed " << m.seed << " end_s "
       << detail::fixed9(ns_to_seconds(m.end_ns)) << "\n";
    for (const auto& f : m.flows) {
        os << "flow " << f.name << ": sent " << f.sent << " delivered " << f.delivered << " lost "
           << f.lost << " duplicates_dropped " << f.duplicates_dropped;
        if (f.kind == TrafficKind::Ping && !f.rtts.empty()) {
            os << " rtt_mean_s " << detail::fixed9(f.rtt_mean_s) << " rtt_mad_s "
               << detail::fixed9(f.rtt_mad_s);
        }
        if (!f.deliveries.empty()) {
            os << " delay_mean_s " << detail::fixed9(f.delay_mean_s);
        }
        os << "\n";
    }
    const SimLedger& g = m.ledger;
    os << "copies: created " << g.created << " delivered " << g.delivered_to_host << " link_lost "
       << g.link_lost << " duplicates_dropped " << g.duplicates_dropped << " unknown_cid "
       << g.unknown_cid_dropped << " no_route " << g.no_route_dropped << " ttl "
       << g.ttl_dropped << " malformed " << g.malformed_dropped << " misdelivered "
       << g.misdelivered << " conserved " << (g.conserved() ? "yes" : "NO") << "\n";
    for (const auto& [name, c] : m.node_counters) {
        os << "node " << name << ": received " << c.received << " protected_out "
           << c.protected_out << " decapsulated " << c.decapsulated << " duplicates_dropped "
           << c.duplicates_dropped << " plain_forwarded " << c.plain_forwarded << " no_route "
           << c.no_route_dropped << " ttl " << c.ttl_dropped << " unknown_cid "
           << c.unknown_cid_dropped << "\n";
    }
}

}  // namespace oneplus
