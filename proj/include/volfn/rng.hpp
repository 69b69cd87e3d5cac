#pragma once
#include <cmath>
#include <cstdint>

namespace volfn {

// Counter-style splitmix64 streams. Stream (seed, index) is a pure function of
// its arguments, so replication r of a Monte Carlo run draws identical numbers
// no matter which thread executes it or in what order.

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_index = 0) {
        // Fold the stream index into the seed through two mixing rounds so
        // that adjacent indices give unrelated state.
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s = a ^ (0x9e3779b97f4a7c15ULL * (stream_index + 1));
        (void)splitmix64(s);
        state_ = s;
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform on (0,1), never exactly 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; second value of each pair is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double next_exponential(double rate) {
        return -std::log(next_uniform()) / rate;
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace volfn
