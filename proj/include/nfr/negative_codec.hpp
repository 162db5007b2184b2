#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "nfr/random.hpp"
#include "nfr/types.hpp"

namespace nfr {

/// Replaces every label with one drawn uniformly from the other k-1 labels.
/// Throws ValidationError when k < 2.
NegativeTemplate negate(const PositiveTemplate& positive, RandomSource& rng);

/// Number of positions where the two templates carry the same label.
std::size_t collisions(const PositiveTemplate& positive, const NegativeTemplate& negative);

/// Comparison score 1 - collisions/L. Genuine pairs score high: a probe
/// compared with its own negative template scores exactly 1.
double nhd(const PositiveTemplate& positive, const NegativeTemplate& negative);

/// Plain Hamming distance: positions where a and b differ.
std::size_t positive_hd(const PositiveTemplate& a, const PositiveTemplate& b);

/// nhd of the probe against every gallery entry.
std::map<std::string, double> batch_score(const PositiveTemplate& probe, const Gallery& gallery);

}  // namespace nfr
