#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfr/attack.hpp"
#include "nfr/metrics.hpp"
#include "nfr/pipeline.hpp"
#include "nfr/random.hpp"
#include "nfr/theory.hpp"
#include "nfr/types.hpp"

namespace nfr {

enum class PairingPolicy { all_pairs, sampled_pairs };
std::string to_string(PairingPolicy p);

/// Comparison protocol: the first capture of every subject is enrolled as
/// its negative reference and every capture is used as a probe. The
/// enrolled capture is never compared with its own reference.
struct PairingConfig {
    PairingPolicy policy = PairingPolicy::all_pairs;
    /// Imposter comparisons kept under sampled_pairs.
    std::size_t imposter_pairs = 10000;
    std::uint64_t seed = 0;
    /// Check L - D <= D' <= L on every comparison.
    bool verify_distance_range = false;
};

struct CollectedScores {
    ScoreSet scores;
    PairingConfig pairing;
    /// Positive-domain distance D and realized non-collision count D' per
    /// comparison, aligned with the score lists.
    std::vector<std::size_t> genuine_distance;
    std::vector<std::size_t> genuine_non_collisions;
    std::vector<std::size_t> imposter_distance;
    std::vector<std::size_t> imposter_non_collisions;
};

/// Enrolls one negative template per subject with `rng` and scores probes
/// with nhd. Throws ValidationError for fewer than two subjects or when no
/// subject has a second capture, and ComputationError when the distance
/// range check fails.
CollectedScores collect_scores(std::span<const Embedding> embeddings, const Pipeline& pipeline,
                               const PairingConfig& pairing, RandomSource& rng);

/// Cosine similarity of raw embeddings under the same protocol.
ScoreSet cosine_scores(std::span<const Embedding> embeddings, const PairingConfig& pairing);

struct FoldResult {
    std::size_t fold = 0;
    std::size_t train_subjects = 0;
    std::size_t test_subjects = 0;
    std::size_t genuine_count = 0;
    std::size_t imposter_count = 0;
    EerResult eer{};
    double fnmr_at_1e2 = 0.0;
    double fnmr_at_1e3 = 0.0;
    /// Raw cosine baseline on the same test subjects.
    double raw_eer = 0.0;
    ScoreSet scores;
};

struct VerificationReport {
    PipelineConfig config;
    PairingConfig pairing;
    std::vector<FoldResult> folds;
    MeanStd eer;
    MeanStd fnmr_at_1e2;
    MeanStd fnmr_at_1e3;
    MeanStd raw_eer;
    /// ROC of all folds' scores pooled.
    std::vector<RocPoint> roc;
    std::vector<std::string> warnings;

    /// One row per fold plus mean and std rows.
    std::string to_csv() const;
    std::string to_table() const;
};

/// Per fold: builds the pipeline on the training subjects, enrolls and
/// verifies the test subjects, and computes metrics. Seeded end to end.
VerificationReport run_verification_experiment(std::span<const Embedding> embeddings, const PipelineConfig& config,
                                               const DatasetSplit& split, const PairingConfig& pairing = {});

struct TheoryValidationConfig {
    /// Fresh negations of each reference per comparison pair.
    std::size_t negation_draws = 5;
    /// Cap on ordered cross-subject capture pairs.
    std::size_t max_imposter_pairs = 20000;
    std::size_t bins = 100;
    std::uint64_t seed = 0;
};

struct TheoryValidationReport {
    std::size_t length = 0;
    int k = 0;
    std::size_t bins = 0;
    std::size_t genuine_comparisons = 0;
    std::size_t imposter_comparisons = 0;
    ScoreDistribution genuine_predicted;
    ScoreDistribution genuine_empirical;
    ScoreDistribution imposter_predicted;
    ScoreDistribution imposter_empirical;
    double genuine_tv = 0.0;
    double imposter_tv = 0.0;
    /// Comparisons with D' outside [L - D, L]; always zero for a correct
    /// codec.
    std::size_t range_violations = 0;
    std::vector<std::string> warnings;

    /// Binned predicted and empirical masses per class.
    std::string to_csv() const;
    std::string to_table() const;
};

/// Builds the pipeline on all embeddings, compares every ordered pair of
/// captures (same subject: genuine; sampled cross-subject: imposter) with a
/// freshly negated reference, and measures the total-variation distance
/// between the predicted and the observed score histograms.
TheoryValidationReport validate_theory(std::span<const Embedding> embeddings, const PipelineConfig& config,
                                       const TheoryValidationConfig& validation = {});

struct SweepGrid {
    std::vector<int> ks = {3};
    std::vector<std::size_t> lengths = {64, 256, 1024};
    std::vector<std::uint64_t> seeds = {0};
    std::size_t folds = 5;
    /// Attribute to attack at every grid point; empty skips the attack.
    std::string attribute;
};

struct SweepRow {
    int k = 0;
    std::size_t length = 0;
    /// Mean over seeds of the fold-mean value, and the spread over seeds.
    MeanStd eer;
    MeanStd fnmr_at_1e2;
    /// Per attacker: mean negative-template accuracy and suppression
    /// against positive templates.
    std::vector<std::string> attackers;
    std::vector<double> negative_accuracy;
    std::vector<double> suppression;
};

struct SweepReport {
    std::vector<SweepRow> rows;

    const SweepRow& row(int k, std::size_t length) const;
    std::string to_csv() const;
};

/// Runs the verification experiment (and optionally the attack) at every
/// (k, L) grid point for every seed. `base` supplies the enlargement mode
/// and training recipe; its k, length and seed are overridden.
SweepReport parameter_sweep(std::span<const Embedding> embeddings, const PipelineConfig& base, const SweepGrid& grid);

}  // namespace nfr
