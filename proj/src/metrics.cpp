#include "nfr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "nfr/error.hpp"

namespace nfr {
namespace {

void check(const ScoreSet& s) {
    if (s.genuine.empty() || s.imposter.empty()) throw ValidationError("score set needs genuine and imposter scores");
    for (double v : s.genuine)
        if (std::isnan(v)) throw ValidationError("NaN genuine score");
    for (double v : s.imposter)
        if (std::isnan(v)) throw ValidationError("NaN imposter score");
}

// Counts at each candidate threshold: genuine rejected (< t) and imposter
// accepted (>= t).
struct Sweep {
    std::vector<double> thresholds;
    std::vector<std::size_t> rejected_genuine;
    std::vector<std::size_t> accepted_imposter;
};

Sweep sweep(const ScoreSet& s) {
    check(s);
    auto gen = s.genuine;
    auto imp = s.imposter;
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());
    std::vector<double> merged;
    merged.reserve(gen.size() + imp.size() + 1);
    std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(merged));
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    merged.push_back(std::numeric_limits<double>::infinity());

    Sweep out;
    out.thresholds = merged;
    std::size_t g = 0, i = 0;
    for (double t : merged) {
        while (g < gen.size() && gen[g] < t) ++g;
        while (i < imp.size() && imp[i] < t) ++i;
        out.rejected_genuine.push_back(g);
        out.accepted_imposter.push_back(imp.size() - i);
    }
    return out;
}

}  // namespace

std::vector<RocPoint> roc(const ScoreSet& scores) {
    const auto sw = sweep(scores);
    const double ng = static_cast<double>(scores.genuine.size());
    const double ni = static_cast<double>(scores.imposter.size());
    std::vector<RocPoint> out;
    for (std::size_t j = 0; j < sw.thresholds.size(); ++j)
        out.push_back({sw.thresholds[j], static_cast<double>(sw.accepted_imposter[j]) / ni,
                       static_cast<double>(sw.rejected_genuine[j]) / ng});
    return out;
}

EerResult eer_point(const ScoreSet& scores) {
    const auto sw = sweep(scores);
    const auto ng = static_cast<std::int64_t>(scores.genuine.size());
    const auto ni = static_cast<std::int64_t>(scores.imposter.size());
    // Compare |FMR - FNMR| exactly via cross-multiplication.
    std::size_t best = 0;
    std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
    for (std::size_t j = 0; j < sw.thresholds.size(); ++j) {
        const auto fm = static_cast<std::int64_t>(sw.accepted_imposter[j]) * ng;
        const auto fn = static_cast<std::int64_t>(sw.rejected_genuine[j]) * ni;
        const auto gap = fm > fn ? fm - fn : fn - fm;
        if (gap < best_gap) {
            best_gap = gap;
            best = j;
        }
    }
    const double fmr = static_cast<double>(sw.accepted_imposter[best]) / static_cast<double>(ni);
    const double fnmr = static_cast<double>(sw.rejected_genuine[best]) / static_cast<double>(ng);
    return {(fmr + fnmr) / 2.0, sw.thresholds[best], fmr, fnmr};
}

double eer(const ScoreSet& scores) { return eer_point(scores).eer; }

double threshold_at_fmr(const ScoreSet& scores, double target_fmr) {
    if (!(target_fmr > 0.0 && target_fmr < 1.0)) throw ValidationError("target FMR must lie in (0, 1)");
    const auto sw = sweep(scores);
    const double ni = static_cast<double>(scores.imposter.size());
    for (std::size_t j = 0; j < sw.thresholds.size(); ++j)
        if (static_cast<double>(sw.accepted_imposter[j]) / ni <= target_fmr) return sw.thresholds[j];
    return sw.thresholds.back();
}

double fnmr_at_fmr(const ScoreSet& scores, double target_fmr) {
    const double t = threshold_at_fmr(scores, target_fmr);
    std::size_t rejected = 0;
    for (double g : scores.genuine) rejected += g < t;
    return static_cast<double>(rejected) / static_cast<double>(scores.genuine.size());
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) return {};
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - m) * (v - m);
    return {m, std::sqrt(var / static_cast<double>(values.size()))};
}

std::string roc_csv(const std::vector<RocPoint>& points) {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "threshold,fmr,fnmr\n";
    for (const auto& p : points) out << p.threshold << ',' << p.fmr << ',' << p.fnmr << '\n';
    return out.str();
}

}  // namespace nfr
