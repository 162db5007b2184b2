#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nfr {

/// Comparison scores with higher-is-genuine polarity. A comparison is
/// accepted at threshold t when score >= t.
struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> imposter;
};

struct RocPoint {
    double threshold;
    double fmr;
    double fnmr;
};

/// Error rates at every distinct score plus +infinity, in ascending
/// threshold order (FMR non-increasing, FNMR non-decreasing).
std::vector<RocPoint> roc(const ScoreSet& scores);

struct EerResult {
    double eer;
    double threshold;
    double fmr;
    double fnmr;
};

/// Sweeps the merged score support and reports (FMR + FNMR) / 2 at the
/// threshold that minimizes |FMR - FNMR| (lowest such threshold on ties).
EerResult eer_point(const ScoreSet& scores);
double eer(const ScoreSet& scores);

/// FNMR at the smallest threshold whose empirical FMR is <= target.
double fnmr_at_fmr(const ScoreSet& scores, double target_fmr);
/// The threshold used by fnmr_at_fmr.
double threshold_at_fmr(const ScoreSet& scores, double target_fmr);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Population standard deviation.
MeanStd mean_std(const std::vector<double>& values);

std::string roc_csv(const std::vector<RocPoint>& points);

}  // namespace nfr
