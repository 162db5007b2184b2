#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace nfr {

/// Distribution of the non-collision count D' between a negative template
/// and a probe whose positive template sits at Hamming distance D from the
/// reference positive template. The L-D agreeing positions never collide;
/// each of the D differing positions collides with probability 1/(k-1), so
/// D' = L - D + mu with mu ~ Binomial(D, (k-2)/(k-1)).
struct NegativeDistancePmf {
    std::size_t length = 0;
    std::size_t distance = 0;
    int k = 0;
    /// probabilities[mu] = Pr[D' = L - D + mu], mu = 0..D.
    std::vector<double> probabilities;

    std::size_t min_support() const { return length - distance; }
    std::size_t max_support() const { return length; }
    /// Zero outside [L-D, L].
    double probability(std::size_t d_prime) const;
    double mean() const;
    double variance() const;
    /// Most probable D' (smallest on ties).
    std::size_t mode() const;
};

/// Log-space evaluation (log-gamma coefficients), renormalized so the
/// masses sum to one. Stable for L up to 10^6.
NegativeDistancePmf pmf(std::size_t length, std::size_t distance, int k);

using Rational = boost::multiprecision::cpp_rational;

/// Exact masses C(D, mu) (k-2)^mu / (k-1)^D, indexed by mu.
std::vector<Rational> pmf_exact(std::size_t length, std::size_t distance, int k);

/// (L - D + D (k-2)/(k-1)) / L.
double expected_nhd(std::size_t length, std::size_t distance, int k);

/// Probability mass over NHD scores D'/L for D' = 0..L.
struct ScoreDistribution {
    std::size_t length = 0;
    std::vector<double> probabilities;

    double score(std::size_t d_prime) const { return static_cast<double>(d_prime) / static_cast<double>(length); }
    double total() const;
    /// Sums mass into `bins` equal-width bins over [0, 1]; score 1 falls in
    /// the last bin.
    std::vector<double> binned(std::size_t bins) const;
    /// CSV with header `score,probability`, one row per D' with nonzero
    /// mass.
    std::string to_csv() const;
};

/// Predicted negative-domain score distribution: the equal-weight mixture
/// of pmf(L, D, k) over the given positive-domain distances.
ScoreDistribution transform_score_distribution(std::span<const std::size_t> distances, std::size_t length, int k);

/// Shortcut that maps each distance to the mode of its pmf instead of the
/// full mixture.
ScoreDistribution transform_score_modes(std::span<const std::size_t> distances, std::size_t length, int k);

/// Normalized histogram of observed non-collision counts.
ScoreDistribution empirical_distribution(std::span<const std::size_t> non_collisions, std::size_t length);

/// Half the L1 distance between two probability vectors of equal size.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace nfr
