#pragma once

// Seed derivation and the small set of sampling primitives used across the
// library. Every stochastic decision is drawn from an Rng constructed from a
// seed derived with derive_seed(), so results never depend on call order or
// thread scheduling.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace maskverify {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based split: the child seed for stream (a, b, ...) of `base`.
template <typename... Counters>
constexpr std::uint64_t derive_seed(std::uint64_t base, Counters... counters) noexcept {
    std::uint64_t h = mix64(base);
    ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(counters) + 0x632be59bd9b4e019ULL))), ...);
    return h;
}

// Seed domains, so that e.g. the verifier stream of candidate 3 never collides
// with the decoder stream of candidate 3.
enum class Stream : std::uint64_t {
    candidate = 1,
    verify    = 2,
    tie       = 3,
    planted   = 4,
    corrupt   = 5,
    token     = 6,
    gumbel    = 7,
    mask      = 8,
    ratio     = 9,
    suite     = 10,
    shuffle   = 11,
    prompt    = 12,
    outcome   = 13,
    question  = 14,
};

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}

    // SplitMix64 stream: cheap to seed, which matters because the decoder
    // opens a fresh generator per (step, position).
    std::uint64_t next() {
        const std::uint64_t s = state_;
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(s);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1); safe for log().
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    // Integer in [lo, hi] inclusive.
    int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

    bool bernoulli(double p) { return uniform() < p; }

    double gumbel() { return -std::log(-std::log(uniform_open())); }

    template <typename T> void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    template <typename T> void shuffle(std::vector<T> & items) { shuffle(std::span<T>(items)); }

    // Index drawn from unnormalized non-negative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        double u = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (u < weights[i]) {
                return i;
            }
            u -= weights[i];
        }
        // rounding: fall back to the last positive weight
        for (std::size_t i = weights.size(); i > 0; --i) {
            if (weights[i - 1] > 0.0) {
                return i - 1;
            }
        }
        return 0;
    }

  private:
    std::uint64_t state_;
};

}  // namespace maskverify
