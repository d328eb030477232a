#pragma once
#include <cstdint>
#include <cmath>

namespace ebal {

/* splitmix64 generator with Box-Muller normals.
 *
 * All randomness in the library flows through this class so that results are
 * bit-identical across platforms and thread counts. Substreams for bootstrap
 * replicates / Monte-Carlo replicates are derived by hashing a stream index
 * into the master seed, so replicate r sees the same draws no matter which
 * worker thread runs it. */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng stream(std::uint64_t master, std::uint64_t idx) {
        return Rng(mix(master ^ mix(0x9e3779b97f4a7c15ULL + idx)));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // in (0, 1)
    double uniform01() {
        double u = double(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(), u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692528676655900577 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // uniform integer in [0, n), n > 0
    std::uint64_t below(std::uint64_t n) {
        return (std::uint64_t)(((unsigned __int128)next_u64() * n) >> 64);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ebal
