#include "nfr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "nfr/error.hpp"
#include "nfr/folds.hpp"
#include "nfr/negative_codec.hpp"

namespace nfr {
namespace {

struct Pair {
    std::size_t probe;
    std::size_t reference;  // index of the reference capture
};

struct Protocol {
    std::vector<Pair> genuine;
    std::vector<Pair> imposter;
    std::vector<std::size_t> references;  // one capture index per subject
};

// References are each subject's first capture in data order.
Protocol make_protocol(std::span<const Embedding> embeddings, const PairingConfig& pairing) {
    std::map<std::string, std::size_t> first;
    for (std::size_t i = 0; i < embeddings.size(); ++i) first.try_emplace(embeddings[i].subject_id, i);
    if (first.size() < 2)
        throw ValidationError("score collection needs at least 2 subjects, got " + std::to_string(first.size()));

    Protocol p;
    for (const auto& [id, idx] : first) p.references.push_back(idx);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        for (auto r : p.references) {
            if (r == i) continue;
            if (embeddings[r].subject_id == embeddings[i].subject_id)
                p.genuine.push_back({i, r});
            else
                p.imposter.push_back({i, r});
        }
    }
    if (p.genuine.empty()) throw ValidationError("no genuine pairs: every subject has a single capture");
    if (pairing.policy == PairingPolicy::sampled_pairs && p.imposter.size() > pairing.imposter_pairs) {
        std::vector<Pair> kept;
        std::mt19937_64 rng(pairing.seed);
        std::sample(p.imposter.begin(), p.imposter.end(), std::back_inserter(kept), pairing.imposter_pairs, rng);
        p.imposter = std::move(kept);
    }
    return p;
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dimension() != b.dimension()) throw ValidationError("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += static_cast<double>(a.values[i]) * b.values[i];
        na += static_cast<double>(a.values[i]) * a.values[i];
        nb += static_cast<double>(b.values[i]) * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::ostringstream csv_stream() {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    return out;
}

}  // namespace

std::string to_string(PairingPolicy p) { return p == PairingPolicy::all_pairs ? "all_pairs" : "sampled_pairs"; }

CollectedScores collect_scores(std::span<const Embedding> embeddings, const Pipeline& pipeline,
                               const PairingConfig& pairing, RandomSource& rng) {
    const auto protocol = make_protocol(embeddings, pairing);
    const auto positives = pipeline.positives(embeddings);
    std::map<std::size_t, NegativeTemplate> stored;
    for (auto r : protocol.references) stored.emplace(r, negate(positives[r], rng));

    const std::size_t length = pipeline.length();
    CollectedScores out;
    out.pairing = pairing;
    auto score = [&](const Pair& p, std::vector<double>& scores, std::vector<std::size_t>& dist,
                     std::vector<std::size_t>& non_coll) {
        const auto& probe = positives[p.probe];
        const auto& reference = stored.at(p.reference);
        const auto d = positive_hd(probe, positives[p.reference]);
        const auto dp = length - collisions(probe, reference);
        if (pairing.verify_distance_range && (dp + d < length || dp > length))
            throw ComputationError("distance range violated for probe '" + probe.capture_id + "': D=" +
                                   std::to_string(d) + ", D'=" + std::to_string(dp));
        scores.push_back(nhd(probe, reference));
        dist.push_back(d);
        non_coll.push_back(dp);
    };
    for (const auto& p : protocol.genuine)
        score(p, out.scores.genuine, out.genuine_distance, out.genuine_non_collisions);
    for (const auto& p : protocol.imposter)
        score(p, out.scores.imposter, out.imposter_distance, out.imposter_non_collisions);
    return out;
}

ScoreSet cosine_scores(std::span<const Embedding> embeddings, const PairingConfig& pairing) {
    const auto protocol = make_protocol(embeddings, pairing);
    ScoreSet out;
    for (const auto& p : protocol.genuine) out.genuine.push_back(cosine(embeddings[p.probe], embeddings[p.reference]));
    for (const auto& p : protocol.imposter)
        out.imposter.push_back(cosine(embeddings[p.probe], embeddings[p.reference]));
    return out;
}

// ---------------------------------------------------------------------------
// Verification experiment

VerificationReport run_verification_experiment(std::span<const Embedding> embeddings, const PipelineConfig& config,
                                               const DatasetSplit& split, const PairingConfig& pairing) {
    if (split.fold_count < 2) throw ValidationError("fold split needs at least 2 folds");
    VerificationReport report;
    report.config = config;
    report.pairing = pairing;
    ScoreSet pooled;
    std::vector<double> eers, f2, f3, raw;
    for (std::size_t fold = 0; fold < split.fold_count; ++fold) {
        const auto part = partition_fold(embeddings, split, fold);
        if (part.train.empty() || part.test.empty())
            throw ValidationError("fold " + std::to_string(fold) + " has an empty train or test portion");
        const auto pipe = Pipeline::build(part.train, config.for_fold(fold));
        auto rng = RandomSource::seeded(config.negation_seed(fold));
        auto fold_pairing = pairing;
        fold_pairing.seed = derive_seed(pairing.seed, fold);
        const auto collected = collect_scores(part.test, pipe, fold_pairing, rng);
        const auto& s = collected.scores;

        FoldResult r;
        r.fold = fold;
        r.train_subjects = distinct_subjects(part.train).size();
        r.test_subjects = distinct_subjects(part.test).size();
        r.genuine_count = s.genuine.size();
        r.imposter_count = s.imposter.size();
        r.eer = eer_point(s);
        r.fnmr_at_1e2 = fnmr_at_fmr(s, 1e-2);
        r.fnmr_at_1e3 = fnmr_at_fmr(s, 1e-3);
        r.raw_eer = eer(cosine_scores(part.test, fold_pairing));
        if (r.imposter_count < 1000)
            report.warnings.push_back("fold " + std::to_string(fold) + ": " + std::to_string(r.imposter_count) +
                                      " imposter scores resolve FMR only down to " +
                                      std::to_string(1.0 / static_cast<double>(r.imposter_count)));
        eers.push_back(r.eer.eer);
        f2.push_back(r.fnmr_at_1e2);
        f3.push_back(r.fnmr_at_1e3);
        raw.push_back(r.raw_eer);
        pooled.genuine = concat(std::move(pooled.genuine), s.genuine);
        pooled.imposter = concat(std::move(pooled.imposter), s.imposter);
        r.scores = s;
        report.folds.push_back(std::move(r));
    }
    report.eer = mean_std(eers);
    report.fnmr_at_1e2 = mean_std(f2);
    report.fnmr_at_1e3 = mean_std(f3);
    report.raw_eer = mean_std(raw);
    report.roc = roc(pooled);
    return report;
}

std::string VerificationReport::to_csv() const {
    auto out = csv_stream();
    out << "fold,train_subjects,test_subjects,genuine,imposter,eer,eer_threshold,fnmr_at_fmr_1e-2,fnmr_at_fmr_1e-3,"
           "raw_cosine_eer\n";
    for (const auto& f : folds)
        out << f.fold << ',' << f.train_subjects << ',' << f.test_subjects << ',' << f.genuine_count << ','
            << f.imposter_count << ',' << f.eer.eer << ',' << f.eer.threshold << ',' << f.fnmr_at_1e2 << ','
            << f.fnmr_at_1e3 << ',' << f.raw_eer << '\n';
    out << "mean,,,,," << eer.mean << ",," << fnmr_at_1e2.mean << ',' << fnmr_at_1e3.mean << ',' << raw_eer.mean
        << '\n';
    out << "std,,,,," << eer.stddev << ",," << fnmr_at_1e2.stddev << ',' << fnmr_at_1e3.stddev << ','
        << raw_eer.stddev << '\n';
    return out.str();
}

std::string VerificationReport::to_table() const {
    std::ostringstream out;
    out << "verification over " << folds.size() << " folds (k=" << config.k << ", L=" << config.length
        << ", pairing " << to_string(pairing.policy) << ")\n";
    out << std::fixed << std::setprecision(4);
    out << "  EER            " << eer.mean << " +- " << eer.stddev << '\n';
    out << "  FNMR@FMR=1e-2  " << fnmr_at_1e2.mean << " +- " << fnmr_at_1e2.stddev << '\n';
    out << "  FNMR@FMR=1e-3  " << fnmr_at_1e3.mean << " +- " << fnmr_at_1e3.stddev << '\n';
    out << "  raw cosine EER " << raw_eer.mean << " +- " << raw_eer.stddev << '\n';
    for (const auto& w : warnings) out << "  warning: " << w << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Theory validation

TheoryValidationReport validate_theory(std::span<const Embedding> embeddings, const PipelineConfig& config,
                                       const TheoryValidationConfig& validation) {
    if (validation.negation_draws == 0) throw ValidationError("negation_draws must be positive");
    if (validation.bins == 0) throw ValidationError("bin count must be positive");
    const auto subjects = distinct_subjects(embeddings);
    if (subjects.size() < 2) throw ValidationError("theory validation needs at least 2 subjects");

    const auto pipe = Pipeline::build(embeddings, config);
    const auto positives = pipe.positives(embeddings);
    const std::size_t length = pipe.length();

    std::vector<Pair> genuine, imposter;
    for (std::size_t r = 0; r < embeddings.size(); ++r)
        for (std::size_t p = 0; p < embeddings.size(); ++p) {
            if (p == r) continue;
            (embeddings[r].subject_id == embeddings[p].subject_id ? genuine : imposter).push_back({p, r});
        }
    if (genuine.empty()) throw ValidationError("no genuine pairs: every subject has a single capture");
    std::mt19937_64 sampler(derive_seed(validation.seed, 0x5a));
    if (imposter.size() > validation.max_imposter_pairs) {
        std::vector<Pair> kept;
        std::sample(imposter.begin(), imposter.end(), std::back_inserter(kept), validation.max_imposter_pairs,
                    sampler);
        imposter = std::move(kept);
    }

    TheoryValidationReport report;
    report.length = length;
    report.k = pipe.k();
    report.bins = validation.bins;
    auto rng = RandomSource::seeded(derive_seed(validation.seed, 0x4e));
    auto run = [&](const std::vector<Pair>& pairs, ScoreDistribution& predicted, ScoreDistribution& empirical) {
        std::vector<std::size_t> distances, non_collisions;
        distances.reserve(pairs.size() * validation.negation_draws);
        non_collisions.reserve(distances.capacity());
        for (const auto& pair : pairs) {
            const auto& probe = positives[pair.probe];
            const auto& reference = positives[pair.reference];
            const auto d = positive_hd(probe, reference);
            for (std::size_t draw = 0; draw < validation.negation_draws; ++draw) {
                const auto dp = length - collisions(probe, negate(reference, rng));
                if (dp + d < length || dp > length) ++report.range_violations;
                distances.push_back(d);
                non_collisions.push_back(dp);
            }
        }
        predicted = transform_score_distribution(distances, length, pipe.k());
        empirical = empirical_distribution(non_collisions, length);
        return distances.size();
    };
    report.genuine_comparisons = run(genuine, report.genuine_predicted, report.genuine_empirical);
    report.imposter_comparisons = run(imposter, report.imposter_predicted, report.imposter_empirical);
    report.genuine_tv = total_variation(report.genuine_predicted.binned(validation.bins),
                                        report.genuine_empirical.binned(validation.bins));
    report.imposter_tv = total_variation(report.imposter_predicted.binned(validation.bins),
                                         report.imposter_empirical.binned(validation.bins));
    for (auto [name, n] : {std::pair{"genuine", report.genuine_comparisons},
                           std::pair{"imposter", report.imposter_comparisons}})
        if (n < 1000)
            report.warnings.push_back(std::string("small sample: only ") + std::to_string(n) + " " + name +
                                      " comparisons, total variation is noisy");
    return report;
}

std::string TheoryValidationReport::to_csv() const {
    const auto gp = genuine_predicted.binned(bins), ge = genuine_empirical.binned(bins);
    const auto ip = imposter_predicted.binned(bins), ie = imposter_empirical.binned(bins);
    auto out = csv_stream();
    out << "bin_low,bin_high,genuine_predicted,genuine_empirical,imposter_predicted,imposter_empirical\n";
    for (std::size_t b = 0; b < bins; ++b)
        out << static_cast<double>(b) / static_cast<double>(bins) << ','
            << static_cast<double>(b + 1) / static_cast<double>(bins) << ',' << gp[b] << ',' << ge[b] << ','
            << ip[b] << ',' << ie[b] << '\n';
    return out.str();
}

std::string TheoryValidationReport::to_table() const {
    std::ostringstream out;
    out << "theory vs pipeline (k=" << k << ", L=" << length << ", " << bins << " bins)\n";
    out << std::fixed << std::setprecision(4);
    out << "  genuine:  " << genuine_comparisons << " comparisons, total variation " << genuine_tv << '\n';
    out << "  imposter: " << imposter_comparisons << " comparisons, total variation " << imposter_tv << '\n';
    out << "  range violations: " << range_violations << '\n';
    for (const auto& w : warnings) out << "  warning: " << w << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Sweep

const SweepRow& SweepReport::row(int k, std::size_t length) const {
    for (const auto& r : rows)
        if (r.k == k && r.length == length) return r;
    throw ValidationError("no sweep row for k=" + std::to_string(k) + ", L=" + std::to_string(length));
}

std::string SweepReport::to_csv() const {
    auto out = csv_stream();
    out << "k,L,eer_mean,eer_std,fnmr_at_fmr_1e-2_mean,fnmr_at_fmr_1e-2_std";
    if (!rows.empty())
        for (const auto& a : rows.front().attackers)
            out << ',' << a << "_negative_accuracy," << a << "_suppression_vs_positive";
    out << '\n';
    for (const auto& r : rows) {
        out << r.k << ',' << r.length << ',' << r.eer.mean << ',' << r.eer.stddev << ',' << r.fnmr_at_1e2.mean << ','
            << r.fnmr_at_1e2.stddev;
        for (std::size_t a = 0; a < r.attackers.size(); ++a)
            out << ',' << r.negative_accuracy[a] << ',' << r.suppression[a];
        out << '\n';
    }
    return out.str();
}

SweepReport parameter_sweep(std::span<const Embedding> embeddings, const PipelineConfig& base, const SweepGrid& grid) {
    if (grid.ks.empty() || grid.lengths.empty() || grid.seeds.empty()) throw ValidationError("empty sweep grid");
    SweepReport report;
    for (int k : grid.ks)
        for (auto length : grid.lengths) {
            SweepRow row;
            row.k = k;
            row.length = length;
            std::vector<double> eers, fnmrs;
            std::map<std::string, std::vector<double>> neg_acc, supp;
            for (auto seed : grid.seeds) {
                auto config = base;
                config.k = k;
                config.length = length;
                config.seed = seed;
                const auto split = make_subject_disjoint_folds(embeddings, grid.folds, seed);
                const auto v = run_verification_experiment(embeddings, config, split);
                eers.push_back(v.eer.mean);
                fnmrs.push_back(v.fnmr_at_1e2.mean);
                if (grid.attribute.empty()) continue;
                const auto a = run_attack(embeddings, config, grid.attribute, split, AttackConfig::builtin(seed));
                for (const auto& name : a.attackers()) {
                    neg_acc[name].push_back(a.accuracy(name, Representation::negative));
                    supp[name].push_back(a.suppression(name, Representation::positive, Representation::negative));
                }
            }
            row.eer = mean_std(eers);
            row.fnmr_at_1e2 = mean_std(fnmrs);
            for (const auto& [name, acc] : neg_acc) {
                row.attackers.push_back(name);
                row.negative_accuracy.push_back(mean_std(acc).mean);
                row.suppression.push_back(mean_std(supp[name]).mean);
            }
            report.rows.push_back(std::move(row));
        }
    return report;
}

}  // namespace nfr
