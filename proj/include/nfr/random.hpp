#pragma once

#include <cstdint>
#include <random>

namespace nfr {

/// Mixes a master seed and a stream index into an independent child seed
/// (splitmix64 finalizer). Used to give folds, subjects and attackers their
/// own reproducible streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Randomness for template negation and experiments. Seeded mode replays
/// the same stream for the same seed; entropy mode seeds from the OS.
class RandomSource {
public:
    static RandomSource seeded(std::uint64_t seed);
    static RandomSource from_entropy();

    bool is_seeded() const { return seeded_; }
    std::mt19937_64& engine() { return engine_; }

private:
    RandomSource(std::uint64_t seed, bool seeded) : engine_(seed), seeded_(seeded) {}

    std::mt19937_64 engine_;
    bool seeded_;
};

}  // namespace nfr
