// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "nfr/attack.hpp"
#include "nfr/enlargement.hpp"
#include "nfr/experiment.hpp"
#include "nfr/folds.hpp"
#include "nfr/io.hpp"
#include "nfr/negative_codec.hpp"
#include "nfr/synth.hpp"
#include "nfr/theory.hpp"

namespace fs = std::filesystem;
using namespace nfr;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

PositiveTemplate random_positive(std::size_t length, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> draw(1, k);
    PositiveTemplate t;
    t.k = k;
    t.labels.resize(length);
    for (auto& l : t.labels) l = static_cast<Label>(draw(rng));
    return t;
}

PipelineConfig random_pipeline(int k, std::size_t length, std::uint64_t seed) {
    PipelineConfig c;
    c.k = k;
    c.length = length;
    c.enlargement = EnlargementMode::random;
    c.seed = seed;
    return c;
}

// Walks every tuple of complement choices at the D differing positions.
// Choice 0 is the one that equals the probe label (a collision); the other
// k-2 choices leave the position non-colliding.
std::vector<Rational> enumerate_complements(std::size_t D, int k) {
    const std::size_t base = static_cast<std::size_t>(k - 1);
    std::vector<std::uint64_t> counts(D + 1, 0);
    std::vector<std::size_t> digits(D, 0);
    std::uint64_t total = 0;
    while (true) {
        std::size_t misses = 0;
        for (auto dgt : digits) misses += dgt != 0;
        ++counts[misses];
        ++total;
        std::size_t i = 0;
        while (i < D && ++digits[i] == base) digits[i++] = 0;
        if (i == D) break;
    }
    std::vector<Rational> out;
    for (auto c : counts) out.emplace_back(Rational(c, total));
    return out;
}

Outcome criterion1() {
    std::size_t cases = 0;
    for (std::size_t L = 1; L <= 12; ++L)
        for (int k : {2, 3, 4})
            for (std::size_t D = 0; D <= L; ++D) {
                const auto exact = pmf_exact(L, D, k);
                if (exact != enumerate_complements(D, k))
                    return {false, fmt::format("mismatch at L={} D={} k={}", L, D, k)};
                ++cases;
            }
    return {true, fmt::format("{} (L, k, D) cases equal", cases)};
}

Outcome criterion2() {
    const auto data = generate(SynthConfig::standard(42));
    const auto r = validate_theory(data, random_pipeline(3, 512, 42), {});
    const bool enough = r.genuine_comparisons >= 10000 && r.imposter_comparisons >= 10000;
    return {enough && r.genuine_tv <= 0.05 && r.imposter_tv <= 0.05 && r.range_violations == 0,
            fmt::format("TV genuine {:.4f}, imposter {:.4f}; comparisons {} / {}; range violations {}", r.genuine_tv,
                        r.imposter_tv, r.genuine_comparisons, r.imposter_comparisons, r.range_violations)};
}

Outcome criterion3() {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<int> pick_k(2, 8);
    std::uniform_int_distribution<std::size_t> pick_len(1, 64);
    std::size_t failures = 0;
    const std::size_t trials = 100000;
    for (std::size_t i = 0; i < trials; ++i) {
        const auto t = random_positive(pick_len(gen), pick_k(gen), gen);
        auto rng = RandomSource::seeded(gen());
        const auto n = negate(t, rng);
        if (collisions(t, n) != 0 || nhd(t, n) != 1.0) ++failures;
    }
    return {failures == 0, fmt::format("{} pairs, {} with a collision", trials, failures)};
}

Outcome criterion4() {
    std::mt19937_64 gen(4);
    auto rng = RandomSource::seeded(4);
    std::size_t failures = 0;
    const std::size_t L = 64, trials = 10000;
    for (std::size_t i = 0; i < trials; ++i) {
        const auto a = random_positive(L, 2, gen);
        const auto b = random_positive(L, 2, gen);
        const auto na = negate(a, rng);
        const auto D = positive_hd(a, b);
        const double expected = 1.0 - static_cast<double>(D) / static_cast<double>(L);
        if (collisions(b, na) != D || nhd(b, na) != expected) ++failures;
    }
    return {failures == 0, fmt::format("{} pairs, collisions == D and nhd == 1 - D/L; {} mismatches", trials,
                                       failures)};
}

Outcome criterion5() {
    const auto data = generate(SynthConfig::standard(42));
    const auto split = make_subject_disjoint_folds(data, 5, 42);
    const auto r = run_verification_experiment(data, random_pipeline(3, 2048, 42), split);
    const double gap = r.eer.mean - r.raw_eer.mean;
    return {gap <= 0.03, fmt::format("pipeline EER {:.4f} +- {:.4f}, raw cosine EER {:.4f}, gap {:.4f}", r.eer.mean,
                                     r.eer.stddev, r.raw_eer.mean, gap)};
}

Outcome criterion6() {
    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    const std::vector<std::size_t> lengths = {64, 256, 1024};
    std::map<std::pair<int, std::size_t>, double> mean;
    for (auto seed : seeds) {
        const auto data = generate(SynthConfig::standard(seed));
        SweepGrid grid;
        grid.ks = {3, 4};
        grid.lengths = lengths;
        grid.seeds = {seed};
        grid.folds = 5;
        const auto r = parameter_sweep(data, random_pipeline(3, 64, seed), grid);
        for (const auto& row : r.rows) mean[{row.k, row.length}] += row.eer.mean / double(seeds.size());
    }
    bool pass = true;
    for (std::size_t i = 1; i < lengths.size(); ++i)
        pass = pass && mean[{3, lengths[i]}] <= mean[{3, lengths[i - 1]}] + 0.01;
    pass = pass && mean[{3, 1024}] <= mean[{4, 1024}] + 0.01;
    return {pass, fmt::format("k=3 EER L=64 {:.4f}, L=256 {:.4f}, L=1024 {:.4f}; k=4 L=1024 {:.4f}",
                              mean[{3, 64}], mean[{3, 256}], mean[{3, 1024}], mean[{4, 1024}])};
}

Outcome criterion7() {
    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::map<std::string, double> supp, gap;
    std::string per_seed;
    for (auto seed : seeds) {
        const auto data = generate(SynthConfig::standard(seed));
        const auto split = make_subject_disjoint_folds(data, 5, seed);
        const auto r = run_attack(data, random_pipeline(3, 256, seed), "a0", split, AttackConfig::builtin(seed));
        for (const auto& name : r.attackers()) {
            const double s = r.suppression(name, Representation::positive, Representation::negative);
            const double g = std::abs(r.accuracy(name, Representation::positive) -
                                      r.accuracy(name, Representation::original));
            supp[name] += s / double(seeds.size());
            gap[name] += g / double(seeds.size());
            per_seed += fmt::format(" [seed {} {}: raw {:.3f} pos {:.3f} neg {:.3f} supp {:.3f}]", seed, name,
                                    r.accuracy(name, Representation::original),
                                    r.accuracy(name, Representation::positive),
                                    r.accuracy(name, Representation::negative), s);
        }
    }
    bool pass = !supp.empty();
    std::string summary;
    for (const auto& [name, s] : supp) {
        pass = pass && s > 0.10 && gap[name] <= 0.05;
        summary += fmt::format("{}: mean suppression {:.3f}, mean |pos - raw| {:.3f}; ", name, s, gap[name]);
    }
    return {pass, summary + "per seed:" + per_seed};
}

Outcome criterion8() {
    TrainingConfig cfg;
    cfg.hidden = {6};
    cfg.batch_norm = true;
    cfg.dropout = 0.3;
    cfg.seed = 17;
    EnlargementTrainer trainer(4, 8, 3, cfg);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(4, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const std::vector<int> labels = {0, 1, 2};
    trainer.loss_and_gradient(x, labels, 99);
    const Eigen::VectorXd analytic = trainer.gradient();
    const Eigen::VectorXd p0 = trainer.parameters();
    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
        Eigen::VectorXd p = p0;
        p[i] += h;
        trainer.set_parameters(p);
        const double up = trainer.loss_and_gradient(x, labels, 99);
        p[i] -= 2 * h;
        trainer.set_parameters(p);
        const double down = trainer.loss_and_gradient(x, labels, 99);
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
    return {worst < 1e-4, fmt::format("{} parameters, worst relative error {:.2e}", p0.size(), worst)};
}

Outcome criterion9() {
    bool pass = true;
    std::vector<std::string> notes;
    auto check = [&](bool ok, const std::string& what) {
        pass = pass && ok;
        if (!ok) notes.push_back(what);
    };
    const ScoreSet example{{0.9, 0.8, 0.7}, {0.75, 0.6, 0.5}};
    check(eer(example) == 1.0 / 3.0, "eer example");
    check(eer({{0.9, 0.8}, {0.2, 0.1}}) == 0.0, "eer separated");
    check(fnmr_at_fmr({{0.9, 0.8}, {0.2, 0.1}}, 0.01) == 0.0, "fnmr separated");
    check(fnmr_at_fmr({{0.1, 0.2}, {0.8, 0.9}}, 0.01) == 1.0, "fnmr inverted");

    ScoreSet grid;
    for (int i = 0; i < 100; ++i) grid.imposter.push_back(i / 100.0);
    for (int i = 0; i < 20; ++i) grid.genuine.push_back((180 + i) / 200.0);
    // Genuine scores 0.900, 0.905, ..., 0.995 interleave with the top
    // imposters. Thresholds range over the merged support; the smallest one
    // accepting at most one imposter is the genuine score 0.985, which
    // rejects the 17 genuine scores below it.
    check(threshold_at_fmr(grid, 0.01) == 197 / 200.0, "grid threshold");
    check(fnmr_at_fmr(grid, 0.01) == 17.0 / 20.0, "grid fnmr");
    // A tighter target forces the threshold above every imposter score.
    check(threshold_at_fmr(grid, 0.005) > 0.99, "grid threshold above top imposter");
    check(fnmr_at_fmr(grid, 0.005) == 19.0 / 20.0, "grid fnmr above top imposter");
    std::string failed;
    for (const auto& n : notes) failed += n + "; ";
    return {pass, pass ? "EER 1/3 example and FNMR grid oracles exact" : "failed: " + failed};
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(NFR_CLI_PATH) + " -q " + args + " > " + (log / "stdout.txt").string() +
                            " 2>> " + (log / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion10() {
    const fs::path root = fs::temp_directory_path() / fmt::format("nfr_acceptance_{}", std::random_device{}());
    std::vector<fs::path> runs = {root / "run1", root / "run2"};
    for (const auto& dir : runs) {
        fs::create_directories(dir);
        const std::string d = dir.string();
        const std::vector<std::string> steps = {
            "synth --output " + d + "/e.csv --subjects 30 --captures 4 --d 16 --seed 5",
            "train --input " + d + "/e.csv --output " + d + "/model --L 64 --epochs 3 --hidden 32 --seed 5",
            "enroll --input " + d + "/e.csv --model " + d + "/model/enlargement.nenl --quantizer " + d +
                "/model/quantizer.nqnt --gallery " + d + "/g.ngal --seed 5",
            "verify --input " + d + "/e.csv --model " + d + "/model/enlargement.nenl --quantizer " + d +
                "/model/quantizer.nqnt --gallery " + d + "/g.ngal --output " + d + "/decisions.csv",
            "eval --input " + d + "/e.csv --output " + d + "/eval --enlargement random --L 128 --folds 3 --seed 5",
            "attack --input " + d + "/e.csv --output " + d +
                "/attack --attribute a0 --enlargement random --L 64 --folds 3 --seed 5",
            "theory --embeddings " + d + "/e.csv --enlargement random --L 64 --k 3 --output " + d +
                "/theory.csv --seed 5",
            "sweep --input " + d + "/e.csv --output " + d +
                "/sweep.csv --enlargement random --lengths 32,64 --folds 3 --seed 5",
        };
        for (const auto& step : steps)
            if (int code = run_cli(step, dir); code != 0)
                return {false, fmt::format("`{}` exited with {}", step.substr(0, step.find(' ')), code)};
    }
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::recursive_directory_iterator(runs[0])) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), runs[0]);
        const auto name = rel.filename().string();
        if (name.ends_with(".manifest.json") || name == "stdout.txt" || name == "stderr.txt") continue;
        ++compared;
        const auto other = runs[1] / rel;
        if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) differing.push_back(rel.string());
    }
    fs::remove_all(root);
    std::string diff;
    for (const auto& d : differing) diff += " " + d;
    return {differing.empty() && compared > 0,
            differing.empty() ? fmt::format("{} output files byte-identical across two runs", compared)
                               : "differing:" + diff};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"theory pmf equals exhaustive enumeration", criterion1},
        {"predicted and empirical score distributions agree", criterion2},
        {"negation never collides with its source", criterion3},
        {"binary negation is deterministic", criterion4},
        {"recognition is preserved at L=2048", criterion5},
        {"EER trends over L and k", criterion6},
        {"negative templates suppress attribute inference", criterion7},
        {"enlargement gradients match finite differences", criterion8},
        {"metric oracles", criterion9},
        {"seeded CLI runs are byte-identical", criterion10},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& err) {
            o = {false, std::string("exception: ") + err.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        std::cout << fmt::format("criterion {:>2}: {} - {} ({}) [{:.1f} s]", i + 1, o.pass ? "PASS" : "FAIL",
                                 criteria[i].first, o.detail, seconds)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size()) << std::endl;
    return failures == 0 ? 0 : 1;
}
