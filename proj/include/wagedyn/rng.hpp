#pragma once

#include <cmath>
#include <cstdint>

namespace wagedyn {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based generator. A stream is fully determined by its seed, so
/// per-person streams derived from (master seed, person id) are independent
/// of worker count and scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    static Rng for_person(std::uint64_t master_seed, long person_id) {
        return Rng(splitmix64(master_seed) ^ splitmix64(0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(person_id)));
    }

    static Rng for_replication(std::uint64_t master_seed, int rep) {
        return Rng(splitmix64(master_seed ^ 0xda3e39cb94b95bdbULL) + static_cast<std::uint64_t>(rep));
    }

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    std::uint64_t derive(std::uint64_t salt) { return splitmix64(state_ ^ splitmix64(salt)); }

    /// Uniform in (0, 1); never returns 0 or 1 exactly.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal via Box-Muller; deterministic across platforms.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Index into a discrete distribution given by non-negative weights.
    template <typename Vec>
    int discrete(const Vec& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        int last = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            last = static_cast<int>(i);
            if (u < acc) return last;
        }
        return last;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace wagedyn
