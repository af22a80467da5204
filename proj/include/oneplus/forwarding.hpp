#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "oneplus/errors.hpp"
#include "oneplus/pti.hpp"

namespace oneplus {

struct Route {
    uint32_t prefix = 0;
    uint8_t prefix_len = 0;  // 0..32
    PortId port = 0;

    bool operator==(const Route&) const = default;
};

inline uint32_t prefix_mask(uint8_t len) {
    return len == 0 ? 0 : ~uint32_t{0} << (32 - len);
}

// Longest-prefix-match table: one exact-match map per prefix length, probed
// from /32 down. At most one entry may exist per (prefix, prefix_len).
class LpmTable {
public:
    void insert(const Route& r) {
        if (r.prefix_len > 32) {
            throw ValidationError("prefix length " + std::to_string(r.prefix_len) +
                                  " exceeds 32");
        }
        if ((r.prefix & ~prefix_mask(r.prefix_len)) != 0) {
            throw ValidationError("route " + format_ipv4(r.prefix) + "/" +
                                  std::to_string(r.prefix_len) + " has bits beyond its length");
        }
        auto& m = by_len_[r.prefix_len];
        if (m.contains(r.prefix)) {
            throw ConflictError("duplicate route " + format_ipv4(r.prefix) + "/" +
                                std::to_string(r.prefix_len));
        }
        m.emplace(r.prefix, r.port);
        ++size_;
    }

    std::optional<PortId> lookup(uint32_t dst) const {
        for (int len = 32; len >= 0; --len) {
            const auto& m = by_len_[len];
            if (m.empty()) continue;
            auto it = m.find(dst & prefix_mask(static_cast<uint8_t>(len)));
            if (it != m.end()) return it->second;
        }
        return std::nullopt;
    }

    size_t size() const { return size_; }

    std::vector<Route> routes() const {
        std::vector<Route> out;
        out.reserve(size_);
        for (int len = 0; len <= 32; ++len) {
            for (const auto& [prefix, port] : by_len_[len]) {
                out.push_back(Route{prefix, static_cast<uint8_t>(len), port});
            }
        }
        return out;
    }

private:
    std::array<std::unordered_map<uint32_t, PortId>, 33> by_len_;
    size_t size_ = 0;
};

}  // namespace oneplus
