#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nfr/types.hpp"

namespace nfr {

struct AttributeSpec {
    std::string name;
    std::size_t classes = 2;
    /// Signal strength in [0, 1]; 0 makes the attribute independent of the
    /// embeddings.
    double signal = 0.0;
};

/// Gaussian identity-cluster model. A subject's mean is
/// sigma_between * g (g ~ N(0, I)) plus, for every attribute,
/// signal * attribute_scale * sigma_between * u_c where u_c is the unit
/// direction of the subject's class. Captures add N(0, sigma_within^2 I)
/// and are unit-normalized. All class directions are mutually orthonormal.
struct SynthConfig {
    std::size_t subjects = 100;
    std::size_t captures = 5;
    std::size_t dimension = 64;
    double sigma_within = 1.0 / 6.0;
    double sigma_between = 1.0;
    double attribute_scale = 3.0;
    std::vector<AttributeSpec> attributes;
    std::uint64_t seed = 0;

    /// 100 subjects x 5 captures, d = 64, sigma_between / sigma_within = 6,
    /// one binary attribute "a0" with signal 0.8.
    static SynthConfig standard(std::uint64_t seed);
};

/// Deterministic for a given config. Subjects get balanced class
/// assignments per attribute. Subject ids are "s0000", capture ids
/// "s0000_c0".
std::vector<Embedding> generate(const SynthConfig& config);

}  // namespace nfr
