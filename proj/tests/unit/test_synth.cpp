#include <doctest.h>

#include "nfr/attack.hpp"
#include "nfr/experiment.hpp"
#include "nfr/folds.hpp"
#include "nfr/synth.hpp"

using namespace nfr;

namespace {

double logreg_accuracy(const std::vector<Embedding>& data, std::uint64_t seed) {
    const auto d = attack_dataset_from_embeddings(data, "a0");
    const auto split = make_subject_disjoint_folds(data, 5, seed);
    double total = 0;
    for (std::size_t f = 0; f < 5; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < d.size(); ++i) (split.in_fold(d.subject_ids[i], f) ? test : train).push_back(i);
        LogisticRegression lr;
        lr.fit(d.subset(train));
        const auto t = d.subset(test);
        total += balanced_accuracy(lr.predict(t), t.labels);
    }
    return total / 5;
}

}  // namespace

TEST_CASE("generation is deterministic and shaped as configured") {
    const auto a = generate(SynthConfig::standard(1));
    CHECK(a == generate(SynthConfig::standard(1)));
    CHECK(a != generate(SynthConfig::standard(2)));
    REQUIRE(a.size() == 500);
    CHECK(a.front().subject_id == "s0000");
    CHECK(a.front().capture_id == "s0000_c0");
    for (const auto& e : a) {
        CHECK(e.dimension() == 64);
        double sq = 0;
        for (float x : e.values) sq += double(x) * x;
        CHECK(sq == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(e.attributes.contains("a0"));
    }
}

TEST_CASE("attribute classes are balanced over subjects") {
    const auto a = generate(SynthConfig::standard(3));
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i < a.size(); i += 5) ++counts[a[i].attributes.at("a0")];
    REQUIRE(counts.size() == 2);
    for (const auto& [c, n] : counts) CHECK(n == 50);
}

TEST_CASE("the standard scenario is calibrated") {
    const auto data = generate(SynthConfig::standard(0));
    CHECK(logreg_accuracy(data, 0) >= 0.9);
    const auto raw = cosine_scores(data, {});
    CHECK(eer(raw) <= 0.02);
}

TEST_CASE("attribute accuracy grows with the signal") {
    std::vector<double> acc;
    for (double signal : {0.0, 0.4, 0.8}) {
        auto cfg = SynthConfig::standard(4);
        cfg.attributes = {{"a0", 2, signal}};
        acc.push_back(logreg_accuracy(generate(cfg), 4));
    }
    CHECK(std::abs(acc[0] - 0.5) <= 0.1);
    CHECK(acc[0] < acc[1]);
    CHECK(acc[1] < acc[2]);
}
