#include <doctest.h>

#include <random>

#include "nfr/error.hpp"
#include "nfr/negative_codec.hpp"
#include "test_util.hpp"

using namespace nfr;

namespace {

PositiveTemplate pos(std::vector<Label> labels, int k) { return {std::move(labels), k, "", ""}; }
NegativeTemplate neg(std::vector<Label> labels, int k) { return {std::move(labels), k, ""}; }

GalleryMetadata meta(int k, std::uint32_t length) {
    GalleryMetadata m;
    m.k = k;
    m.length = length;
    m.quantizer_fingerprint[0] = 1;
    m.model_fingerprint[0] = 2;
    return m;
}

}  // namespace

TEST_CASE("binary negation is forced") {
    auto rng = RandomSource::seeded(1);
    CHECK(negate(pos({1, 2, 1}, 2), rng).labels == std::vector<Label>{2, 1, 2});
}

TEST_CASE("negation never keeps a label and stays in range") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto rng = RandomSource::seeded(seed);
        std::mt19937_64 gen(seed);
        for (int k : {3, 4, 7}) {
            const auto p = test::random_positive(64, k, gen);
            const auto n = negate(p, rng);
            REQUIRE(n.length() == p.length());
            CHECK(n.k == k);
            for (std::size_t i = 0; i < p.length(); ++i) {
                CHECK(n.labels[i] != p.labels[i]);
                CHECK(n.labels[i] >= 1);
                CHECK(n.labels[i] <= k);
            }
            CHECK(nhd(p, n) == 1.0);
        }
    }
}

TEST_CASE("negation draws the complement uniformly") {
    auto rng = RandomSource::seeded(2024);
    const auto p = pos({1}, 3);
    int twos = 0, threes = 0;
    const int draws = 30000;
    for (int i = 0; i < draws; ++i) {
        const auto l = negate(p, rng).labels[0];
        twos += l == 2;
        threes += l == 3;
    }
    CHECK(twos + threes == draws);
    CHECK(std::abs(twos / double(draws) - 0.5) <= 0.01);
    CHECK(std::abs(threes / double(draws) - 0.5) <= 0.01);
}

TEST_CASE("negation with k = 5 passes a chi-squared uniformity test") {
    auto rng = RandomSource::seeded(77);
    const auto p = pos({3}, 5);
    std::vector<int> counts(6, 0);
    const int draws = 40000;
    for (int i = 0; i < draws; ++i) ++counts[negate(p, rng).labels[0]];
    CHECK(counts[3] == 0);
    const double expected = draws / 4.0;
    double chi2 = 0;
    for (int l : {1, 2, 4, 5}) chi2 += (counts[l] - expected) * (counts[l] - expected) / expected;
    // 3 degrees of freedom; 16.27 is the 0.999 quantile.
    CHECK(chi2 < 16.27);
}

TEST_CASE("negation rejects k below 2") {
    auto rng = RandomSource::seeded(0);
    CHECK_THROWS_AS(negate(pos({1, 1}, 1), rng), ValidationError);
}

TEST_CASE("nhd arithmetic") {
    CHECK(nhd(pos({1, 2, 3}, 3), neg({1, 3, 2}, 3)) == doctest::Approx(2.0 / 3.0));
    CHECK(collisions(pos({1, 2, 3}, 3), neg({1, 3, 2}, 3)) == 1);
    CHECK(nhd(pos({1, 2, 3}, 3), neg({1, 2, 3}, 3)) == 0.0);
    CHECK_THROWS_AS(nhd(pos({1, 2}, 3), neg({1, 2, 3}, 3)), ValidationError);
    CHECK_THROWS_AS(nhd(pos({1, 2, 3}, 3), neg({1, 2, 3}, 4)), ValidationError);
}

TEST_CASE("positive Hamming distance") {
    CHECK(positive_hd(pos({1, 2, 3}, 3), pos({1, 2, 3}, 3)) == 0);
    CHECK(positive_hd(pos({1, 2, 3}, 3), pos({1, 3, 3}, 3)) == 1);
    CHECK(positive_hd(pos({1, 2, 3}, 3), pos({2, 3, 1}, 3)) == 3);
}

TEST_CASE("collisions only happen where the positives differ") {
    std::mt19937_64 gen(5);
    auto rng = RandomSource::seeded(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = test::random_positive(40, 4, gen);
        const auto b = test::random_positive(40, 4, gen);
        const auto na = negate(a, rng);
        const std::size_t D = positive_hd(a, b);
        const std::size_t dprime = a.length() - collisions(b, na);
        CHECK(dprime >= a.length() - D);
        CHECK(dprime <= a.length());
    }
}

TEST_CASE("batch scoring matches single comparisons") {
    std::mt19937_64 gen(8);
    auto rng = RandomSource::seeded(8);
    Gallery g(meta(3, 32));
    CHECK(batch_score(test::random_positive(32, 3, gen), g).empty());
    for (int i = 0; i < 100; ++i) {
        auto n = negate(test::random_positive(32, 3, gen), rng);
        n.subject_id = "s" + std::to_string(i);
        g.enroll(n);
    }
    const auto probe = test::random_positive(32, 3, gen);
    const auto scores = batch_score(probe, g);
    REQUIRE(scores.size() == 100);
    for (const auto& [id, t] : g.entries()) CHECK(scores.at(id) == nhd(probe, t));

    Gallery one(meta(3, 32));
    auto own = negate(probe, rng);
    own.subject_id = "me";
    one.enroll(own);
    CHECK(batch_score(probe, one).at("me") == 1.0);
}
