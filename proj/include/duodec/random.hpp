#pragma once

#include <cstdint>

namespace duodec {

// Counter-based uniform stream (splitmix64). The i-th draw is a pure function
// of (seed, i), so replaying a run with the same seed yields the same values
// no matter how work is scheduled across workers. Each stream is owned by
// exactly one role (draft or verify) at a time.
class RandomStream {
  public:
    RandomStream() = default;
    explicit RandomStream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1), 53 bits of precision.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

// Stateless seed derivation for independent sub-streams (one per sample in
// the fidelity harness).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + (index + 1) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace duodec
