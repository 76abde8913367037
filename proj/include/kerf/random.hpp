#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kerf {

// Counter-based splittable generator (SplitMix64 core).  A source is fully
// identified by (seed, stream): the same pair always yields the same value
// sequence, and split() derives decorrelated child streams without touching
// the parent's state.  This is what makes tree construction, data generation
// and experiment repetitions reproducible under any thread schedule: worker j
// always receives split(j), never a share of a common sequence.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream),
          counter_(mix(seed + 0x9e3779b97f4a7c15ull) ^
                   mix(mix(stream) + 0xbf58476d1ce4e5b9ull)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Independent child source; derived from (seed, stream, index) only, so
    // splitting commutes with any draws already made on *this.
    RandomSource split(std::uint64_t index) const {
        return RandomSource(seed_, mix(stream_ + 0x94d049bb133111ebull) + index);
    }

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ull;
        return mix(counter_);
    }

    // Uniform on [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + next_double() * (hi - lo);
    }

    // Uniform on (0, 1); rejects the single value 0.
    double next_double_open() {
        double u = next_double();
        while (u == 0.0) u = next_double();
        return u;
    }

    // Uniform integer in [0, n), n >= 1.  Rejection keeps it exactly uniform.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Box-Muller; the second variate of each pair is cached.
    double normal(double mean = 0.0, double sd = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sd * spare_;
        }
        const double u1 = 1.0 - next_double();   // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + sd * r * std::cos(a);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace kerf
