#pragma once

#include <cstdint>
#include <string>

#include "oneplus/errors.hpp"

namespace oneplus {

constexpr uint64_t kDefaultSnSpace = uint64_t{1} << 32;

// Sequence-number space N and acceptance window W. SN_max is N - 1. The
// reformulated decision additionally requires W == N/2.
struct SeqParams {
    uint64_t sn_space = kDefaultSnSpace;
    uint64_t window = kDefaultSnSpace / 2;

    uint64_t sn_max() const { return sn_space - 1; }

    bool operator==(const SeqParams&) const = default;
};

inline void check_seq_params(const SeqParams& p) {
    if (p.sn_space < 2 || (p.sn_space & (p.sn_space - 1)) != 0) {
        throw ParamError("sequence space must be a power of two >= 2, got " +
                         std::to_string(p.sn_space));
    }
    if (p.window == 0 || p.window >= p.sn_space) {
        throw ParamError("window must satisfy 0 < W < N, got W=" + std::to_string(p.window) +
                         " N=" + std::to_string(p.sn_space));
    }
}

// Sender-side counter. Starts at zero, so the first stamped packet carries
// sequence number 1.
struct SnCounter {
    uint64_t last = 0;

    uint64_t next(const SeqParams& p) {
        last = (last + 1) & (p.sn_space - 1);
        return last;
    }
};

// Receiver-side state: the sequence number of the last accepted packet.
struct AcceptState {
    uint64_t last = 0;
};

enum class Decision : uint8_t { Accept, Reject };

namespace detail {

inline void check_sn(uint64_t sn, const SeqParams& p) {
    if (sn >= p.sn_space) {
        throw RangeError("sequence number " + std::to_string(sn) + " outside space " +
                         std::to_string(p.sn_space));
    }
}

}  // namespace detail

// General acceptance-window decision for any 0 < W < N. A sequence number is
// new when it lies within the W numbers after the last accepted one, wrapping
// at SN_max. The regime split follows whether the window reaches the top of
// the sequence space:
//   SN_last + W <  SN_max: accept iff SN_last < SN <= SN_last + W
//   SN_last + W >= SN_max: accept iff SN_last < SN, or SN < SN_last + W - SN_max
// Accepting stores SN; rejecting leaves the state untouched.
inline Decision accept_general(AcceptState& st, uint64_t sn, const SeqParams& p) {
    detail::check_sn(sn, p);
    bool accept;
    if (st.last + p.window < p.sn_max()) {
        accept = st.last < sn && sn <= st.last + p.window;
    } else {
        accept = (st.last < sn) || (sn + p.sn_max() < st.last + p.window);
    }
    if (accept) st.last = sn;
    return accept ? Decision::Accept : Decision::Reject;
}

// Two-branch reformulation of the same decision, valid only for W == N/2.
// Branching on whether SN has its top bit set keeps every comparison on
// plain unsigned values with no wraparound inside the arithmetic:
//   W <= SN: accept iff SN_last < SN and SN - SN_last <= W
//   SN <  W: accept iff SN_last < SN or  W <= SN_last - SN
inline Decision accept_reformulated(AcceptState& st, uint64_t sn, const SeqParams& p) {
    detail::check_sn(sn, p);
    if (p.window * 2 != p.sn_space) {
        throw ParamError("reformulated acceptance requires W == N/2, got W=" +
                         std::to_string(p.window) + " N=" + std::to_string(p.sn_space));
    }
    bool accept;
    if (p.window <= sn) {
        accept = st.last < sn && sn - st.last <= p.window;
    } else {
        accept = st.last < sn || p.window <= st.last - sn;
    }
    if (accept) st.last = sn;
    return accept ? Decision::Accept : Decision::Reject;
}

// Dispatch used by the egress data path: the reformulated check when the
// parameters allow it, the general form otherwise.
inline Decision accept(AcceptState& st, uint64_t sn, const SeqParams& p) {
    if (p.window * 2 == p.sn_space) return accept_reformulated(st, sn, p);
    return accept_general(st, sn, p);
}

// Largest path-delay difference the window tolerates before a late copy can
// be mistaken for a new packet: the time SN_max - W sequence numbers take to
// send at the given packet size and line rate.
inline double max_compensable_delay(const SeqParams& p, double packet_bits,
                                    double line_rate_bps) {
    if (line_rate_bps <= 0) {
        throw ParamError("line rate must be positive");
    }
    double slack = p.window >= p.sn_space ? 0.0 : static_cast<double>(p.sn_space - p.window);
    return slack * packet_bits / line_rate_bps;
}

}  // namespace oneplus
