#include "nfr/negative_codec.hpp"

#include <random>

#include "nfr/error.hpp"

namespace nfr {
namespace {

template <typename A, typename B>
void check_compatible(const A& a, const B& b) {
    if (a.length() != b.length())
        throw ValidationError("template length mismatch: " + std::to_string(a.length()) + " vs " +
                              std::to_string(b.length()));
    if (a.k != b.k)
        throw ValidationError("template k mismatch: " + std::to_string(a.k) + " vs " + std::to_string(b.k));
}

}  // namespace

NegativeTemplate negate(const PositiveTemplate& positive, RandomSource& rng) {
    const int k = positive.k;
    if (k < 2 || k > kMaxBins) throw ValidationError("negation needs 2 <= k <= 255, got " + std::to_string(k));
    NegativeTemplate out;
    out.k = k;
    out.subject_id = positive.subject_id;
    out.labels.resize(positive.labels.size());
    std::uniform_int_distribution<int> draw(1, k - 1);
    auto& engine = rng.engine();
    for (std::size_t i = 0; i < positive.labels.size(); ++i) {
        const int own = positive.labels[i];
        if (own < 1 || own > k) throw ValidationError("label out of range at position " + std::to_string(i));
        // Draw from {1..k-1} and skip over the own label.
        const int r = draw(engine);
        out.labels[i] = static_cast<Label>(r < own ? r : r + 1);
    }
    return out;
}

std::size_t collisions(const PositiveTemplate& positive, const NegativeTemplate& negative) {
    check_compatible(positive, negative);
    std::size_t same = 0;
    const auto* a = positive.labels.data();
    const auto* b = negative.labels.data();
    for (std::size_t i = 0, n = positive.labels.size(); i < n; ++i) same += a[i] == b[i];
    return same;
}

double nhd(const PositiveTemplate& positive, const NegativeTemplate& negative) {
    const auto same = collisions(positive, negative);
    if (positive.labels.empty()) throw ValidationError("empty templates");
    return 1.0 - static_cast<double>(same) / static_cast<double>(positive.labels.size());
}

std::size_t positive_hd(const PositiveTemplate& a, const PositiveTemplate& b) {
    check_compatible(a, b);
    std::size_t diff = 0;
    for (std::size_t i = 0, n = a.labels.size(); i < n; ++i) diff += a.labels[i] != b.labels[i];
    return diff;
}

std::map<std::string, double> batch_score(const PositiveTemplate& probe, const Gallery& gallery) {
    const auto& m = gallery.metadata();
    if (probe.k != m.k || probe.length() != m.length)
        throw ValidationError("probe (k=" + std::to_string(probe.k) + ", L=" + std::to_string(probe.length()) +
                              ") does not match gallery (k=" + std::to_string(m.k) + ", L=" +
                              std::to_string(m.length) + ")");
    std::map<std::string, double> scores;
    for (const auto& [id, t] : gallery.entries()) scores.emplace(id, nhd(probe, t));
    return scores;
}

}  // namespace nfr
