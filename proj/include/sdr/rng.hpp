#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace sdr {

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Seeded generator. Uniform bits come from std::mt19937_64 (bit-exact across
/// standard libraries); uniforms and normals are derived here rather than with
/// <random> distributions, whose algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double normal();

    /// Unbiased integer in [0, n).
    std::size_t uniform_index(std::size_t n);

    /// Independent stream derived from this generator's seed (not its state).
    Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// n i.i.d. standard normal draws; n must be >= 1.
std::vector<double> sample_standard_normal(Rng& rng, std::size_t n);

}  // namespace sdr
