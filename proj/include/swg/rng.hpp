#pragma once

#include <cstdint>
#include <string_view>

namespace swg {

// Counter-based generator. The n-th draw of a stream is
//   splitmix64_mix(key + (n + 1) * 0x9E3779B97F4A7C15)
// so a stream is fully described by (key, counter) and any draw can be
// recomputed without replaying the ones before it.
class CounterRng {
public:
    explicit CounterRng(uint64_t key = 0, uint64_t counter = 0) : key_(key), counter_(counter) {}

    uint64_t next_u64();
    // Uniform in [0, 1) from the top 53 bits.
    double uniform();
    // Uniform integer in [0, n). Uses rejection so the result is unbiased.
    uint64_t below(uint64_t n);
    // Standard normal via Box-Muller; consumes exactly two draws.
    double normal();

    uint64_t key() const { return key_; }
    uint64_t counter() const { return counter_; }

private:
    uint64_t key_;
    uint64_t counter_;
};

uint64_t splitmix64_mix(uint64_t z);

// Child key for a named consumer of a root seed:
//   derive_seed(root, name, index) = mix(mix(root ^ fnv1a(name)) + index)
// Every random consumer in the library gets its stream this way.
uint64_t derive_seed(uint64_t root, std::string_view name, uint64_t index = 0);

uint64_t fnv1a64(std::string_view bytes);

} // namespace swg
