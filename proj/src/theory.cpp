#include "nfr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nfr/error.hpp"

namespace nfr {
namespace {

void check_params(std::size_t length, std::size_t distance, int k) {
    if (length < 1) throw ValidationError("L must be at least 1");
    if (distance > length)
        throw ValidationError("distance " + std::to_string(distance) + " exceeds L = " + std::to_string(length));
    if (k < 2) throw ValidationError("k must be at least 2");
}

}  // namespace

double NegativeDistancePmf::probability(std::size_t d_prime) const {
    if (d_prime < min_support() || d_prime > max_support()) return 0.0;
    return probabilities[d_prime - min_support()];
}

double NegativeDistancePmf::mean() const {
    double m = 0.0;
    for (std::size_t mu = 0; mu < probabilities.size(); ++mu)
        m += probabilities[mu] * static_cast<double>(min_support() + mu);
    return m;
}

double NegativeDistancePmf::variance() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t mu = 0; mu < probabilities.size(); ++mu) {
        const double x = static_cast<double>(min_support() + mu) - m;
        v += probabilities[mu] * x * x;
    }
    return v;
}

std::size_t NegativeDistancePmf::mode() const {
    auto it = std::max_element(probabilities.begin(), probabilities.end());
    return min_support() + static_cast<std::size_t>(it - probabilities.begin());
}

NegativeDistancePmf pmf(std::size_t length, std::size_t distance, int k) {
    check_params(length, distance, k);
    NegativeDistancePmf out{length, distance, k, std::vector<double>(distance + 1, 0.0)};
    if (k == 2 || distance == 0) {
        out.probabilities[0] = 1.0;
        return out;
    }
    const double d = static_cast<double>(distance);
    const double log_flip = std::log(static_cast<double>(k - 2)) - std::log(static_cast<double>(k - 1));
    const double log_collide = -std::log(static_cast<double>(k - 1));
    std::vector<double> logs(distance + 1);
    for (std::size_t mu = 0; mu <= distance; ++mu) {
        const double m = static_cast<double>(mu);
        logs[mu] = std::lgamma(d + 1.0) - std::lgamma(m + 1.0) - std::lgamma(d - m + 1.0) + m * log_flip +
                   (d - m) * log_collide;
    }
    const double peak = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (std::size_t mu = 0; mu <= distance; ++mu) sum += out.probabilities[mu] = std::exp(logs[mu] - peak);
    for (auto& p : out.probabilities) p /= sum;
    return out;
}

std::vector<Rational> pmf_exact(std::size_t length, std::size_t distance, int k) {
    check_params(length, distance, k);
    using boost::multiprecision::cpp_int;
    const cpp_int denominator = boost::multiprecision::pow(cpp_int(k - 1), static_cast<unsigned>(distance));
    std::vector<Rational> out;
    cpp_int binom = 1;
    for (std::size_t mu = 0; mu <= distance; ++mu) {
        if (mu > 0) binom = binom * static_cast<unsigned long long>(distance - mu + 1) / static_cast<unsigned long long>(mu);
        const cpp_int flips = boost::multiprecision::pow(cpp_int(k - 2), static_cast<unsigned>(mu));
        out.emplace_back(binom * flips, denominator);
    }
    return out;
}

double expected_nhd(std::size_t length, std::size_t distance, int k) {
    check_params(length, distance, k);
    const double l = static_cast<double>(length);
    const double d = static_cast<double>(distance);
    return (l - d + d * static_cast<double>(k - 2) / static_cast<double>(k - 1)) / l;
}

double ScoreDistribution::total() const {
    double s = 0.0;
    for (double p : probabilities) s += p;
    return s;
}

std::vector<double> ScoreDistribution::binned(std::size_t bins) const {
    if (bins == 0) throw ValidationError("bin count must be positive");
    std::vector<double> out(bins, 0.0);
    for (std::size_t d = 0; d < probabilities.size(); ++d) {
        // Integer arithmetic keeps bin boundaries identical for every caller.
        const std::size_t b = std::min(bins - 1, d * bins / length);
        out[b] += probabilities[d];
    }
    return out;
}

std::string ScoreDistribution::to_csv() const {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "score,probability\n";
    for (std::size_t d = 0; d < probabilities.size(); ++d)
        if (probabilities[d] > 0.0) out << score(d) << ',' << probabilities[d] << '\n';
    return out.str();
}

ScoreDistribution transform_score_distribution(std::span<const std::size_t> distances, std::size_t length, int k) {
    if (distances.empty()) throw ValidationError("no positive-domain distances given");
    // Group equal distances so each pmf is evaluated once.
    std::vector<std::size_t> counts(length + 1, 0);
    for (auto d : distances) {
        check_params(length, d, k);
        ++counts[d];
    }
    ScoreDistribution out{length, std::vector<double>(length + 1, 0.0)};
    const double total = static_cast<double>(distances.size());
    for (std::size_t d = 0; d <= length; ++d) {
        if (counts[d] == 0) continue;
        const auto p = pmf(length, d, k);
        const double w = static_cast<double>(counts[d]) / total;
        for (std::size_t mu = 0; mu < p.probabilities.size(); ++mu)
            out.probabilities[p.min_support() + mu] += w * p.probabilities[mu];
    }
    return out;
}

ScoreDistribution transform_score_modes(std::span<const std::size_t> distances, std::size_t length, int k) {
    if (distances.empty()) throw ValidationError("no positive-domain distances given");
    ScoreDistribution out{length, std::vector<double>(length + 1, 0.0)};
    const double w = 1.0 / static_cast<double>(distances.size());
    for (auto d : distances) out.probabilities[pmf(length, d, k).mode()] += w;
    return out;
}

ScoreDistribution empirical_distribution(std::span<const std::size_t> non_collisions, std::size_t length) {
    if (non_collisions.empty()) throw ValidationError("no observations");
    std::vector<std::size_t> counts(length + 1, 0);
    for (auto d : non_collisions) {
        if (d > length) throw ValidationError("observation exceeds L");
        ++counts[d];
    }
    ScoreDistribution out{length, std::vector<double>(length + 1, 0.0)};
    const double total = static_cast<double>(non_collisions.size());
    for (std::size_t d = 0; d <= length; ++d) out.probabilities[d] = static_cast<double>(counts[d]) / total;
    return out;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ValidationError("distributions differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

}  // namespace nfr
