#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string_view>
#include <vector>

// Deterministic seed streams.
//
// Every random decision in the engine is drawn from a stream derived as
//   stream(seed, tag, indices...) = SplitMix64(FNV-1a(seed || tag || indices))
// so that any stream can be re-created from the run seed alone. Checkpoint
// restore therefore never needs saved PRNG state: rolling back to slice r and
// retraining forward re-derives exactly the streams the original run used.

namespace sisa {

inline constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

inline uint64_t fnv1a_bytes(const void* data, size_t len, uint64_t h = kFnvOffsetBasis) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a_u64(uint64_t value, uint64_t h = kFnvOffsetBasis) {
    // Little-endian byte order, explicitly, so the hash is platform-independent.
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<unsigned char>(value >> (8 * i));
        h *= kFnvPrime;
    }
    return h;
}

// stream(seed, tag, indices...) -> 64-bit stream seed.
inline uint64_t derive_stream(uint64_t seed, std::string_view tag,
                              std::initializer_list<uint64_t> indices = {}) {
    uint64_t h = fnv1a_u64(seed);
    h = fnv1a_bytes(tag.data(), tag.size(), h);
    for (uint64_t idx : indices) {
        h = fnv1a_u64(idx, h);
    }
    return h;
}

class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bits of precision.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, bound). Lemire's multiply-shift; deterministic, unbiased.
    uint64_t next_below(uint64_t bound) {
        while (true) {
            uint64_t x = next();
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            uint64_t lo = static_cast<uint64_t>(m);
            if (lo >= bound || lo >= static_cast<uint64_t>(-bound) % bound) {
                return static_cast<uint64_t>(m >> 64);
            }
        }
    }

    float next_uniform(float lo, float hi) {
        return static_cast<float>(lo + next_unit() * (static_cast<double>(hi) - lo));
    }

private:
    uint64_t state_;
};

// Fisher-Yates permutation of 0..n-1 drawn from the given stream seed.
inline std::vector<size_t> random_permutation(size_t n, uint64_t stream_seed) {
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    SplitMix64 rng(stream_seed);
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace sisa
