#include "nfr/random.hpp"

namespace nfr {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

RandomSource RandomSource::seeded(std::uint64_t seed) { return RandomSource(seed, true); }

RandomSource RandomSource::from_entropy() {
    std::random_device device;
    std::uint64_t seed = (static_cast<std::uint64_t>(device()) << 32) | device();
    return RandomSource(seed, false);
}

}  // namespace nfr
