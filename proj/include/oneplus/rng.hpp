#pragma once

#include <cstdint>
#include <random>

namespace oneplus {

// Seeded mt19937_64 with hand-rolled value extraction. The standard pins the
// generator's output sequence but not the distributions', so uniforms and
// Bernoulli draws are derived here to keep runs identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // Independent stream i for a scenario-level seed (splitmix64 of the pair).
    static Rng stream(uint64_t seed, uint64_t index) {
        uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

    uint64_t bits() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + unit() * (hi - lo); }

    bool bernoulli(double p) { return unit() < p; }

    // Uniform integer in [0, n) by rejection, bias-free.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = ~uint64_t{0} - ~uint64_t{0} % n;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace oneplus
