#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace dpo {

/// Counter-based generator (SplitMix64 output function over a Weyl counter).
///
/// Streams are split by hashing a parent seed with integer keys, so that any
/// stochastic step can be given its own replayable stream, e.g.
/// `Rng(seed).derive({episode, state, action})`. The value produced by a
/// derived stream never depends on how many numbers other streams consumed.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

    /// Independent child stream keyed by `keys`; does not advance this stream.
    Rng derive(std::initializer_list<std::uint64_t> keys) const {
        std::uint64_t h = key_;
        for (auto k : keys) h = mix(h ^ mix(k + kGolden));
        Rng child;
        child.key_ = h;
        return child;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn proportionally to `weights` (need not be normalized).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            last_positive = i;
            if (u < weights[i]) return i;
            u -= weights[i];
        }
        return last_positive;
    }

    /// Standard normal via Box-Muller (one value per call, the other is dropped).
    double normal();

    /// Gamma(shape, 1) variate (Marsaglia-Tsang).
    double gamma(double shape);

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace dpo
