#pragma once

#include <cstdint>
#include <cmath>
#include <span>
#include <vector>

namespace dwrl {

// Splittable counter-based stream (splitmix64 core). Child streams are keyed,
// so draws depend only on (seed, key path), never on scheduling order.
// Distributions are hand-rolled: std::normal_distribution and friends are not
// bit-stable across standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

    Rng child(std::uint64_t key) const {
        return Rng(FromState{}, mix(state_ ^ mix(key + kGolden)));
    }

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // standard normal, Box-Muller (one draw per call, no cached spare)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        u1 = u1 > 0.0 ? u1 : 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // index sampled from an unnormalized nonnegative weight vector
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = uniform() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            cum += weights[i];
            if (u < cum) return i;
        }
        return weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    struct FromState {};
    Rng(FromState, std::uint64_t s) : state_(s) {}

    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace dwrl
