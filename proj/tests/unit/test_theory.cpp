#include <doctest.h>

#include <cmath>
#include <random>

#include "nfr/error.hpp"
#include "nfr/negative_codec.hpp"
#include "nfr/theory.hpp"
#include "test_util.hpp"

using namespace nfr;

namespace {

// Brute-force PMF of mu: enumerate every assignment of the D differing
// positions to collide (probability 1/(k-1)) or not.
std::vector<Rational> enumerate_pmf(std::size_t D, int k) {
    std::vector<Rational> out(D + 1, Rational(0));
    const Rational p_miss(k - 2, k - 1);
    const Rational p_hit(1, k - 1);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << D); ++mask) {
        Rational prob(1);
        std::size_t misses = 0;
        for (std::size_t i = 0; i < D; ++i) {
            if (mask >> i & 1) {
                prob *= p_miss;
                ++misses;
            } else {
                prob *= p_hit;
            }
        }
        out[misses] += prob;
    }
    return out;
}

}  // namespace

TEST_CASE("exact pmf matches exhaustive enumeration") {
    for (int k : {2, 3, 4, 6})
        for (std::size_t D = 0; D <= 10; ++D) CHECK(pmf_exact(12, D, k) == enumerate_pmf(D, k));
}

TEST_CASE("floating pmf agrees with the exact one") {
    for (int k : {3, 5})
        for (std::size_t D : {0, 1, 7, 20, 40}) {
            const auto exact = pmf_exact(40, D, k);
            const auto approx = pmf(40, D, k);
            for (std::size_t mu = 0; mu <= D; ++mu)
                CHECK(approx.probabilities[mu] == doctest::Approx(exact[mu].convert_to<double>()).epsilon(1e-9));
        }
}

TEST_CASE("two differing positions with k = 3") {
    const auto p = pmf(8, 2, 3);
    CHECK(p.probability(6) == doctest::Approx(0.25));
    CHECK(p.probability(7) == doctest::Approx(0.5));
    CHECK(p.probability(8) == doctest::Approx(0.25));
    CHECK(p.probability(5) == 0.0);
    CHECK(p.mode() == 7);
}

TEST_CASE("degenerate cases") {
    CHECK(pmf(16, 0, 4).probability(16) == 1.0);
    CHECK(pmf(16, 5, 2).probability(11) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pmf(4, 5, 3), ValidationError);
    CHECK_THROWS_AS(pmf(4, 2, 1), ValidationError);
}

TEST_CASE("pmf is normalized with binomial moments") {
    for (std::size_t L : {10, 100, 4096, 1000000})
        for (int k : {3, 4, 8}) {
            const std::size_t D = L / 3;
            const auto p = pmf(L, D, k);
            double total = 0;
            for (double x : p.probabilities) total += x;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
            const double q = double(k - 2) / double(k - 1);
            CHECK(p.mean() == doctest::Approx(double(L - D) + double(D) * q).epsilon(1e-9));
            CHECK(p.variance() == doctest::Approx(double(D) * q * (1 - q)).epsilon(1e-6));
        }
}

TEST_CASE("expected nhd") {
    CHECK(expected_nhd(8, 0, 3) == 1.0);
    CHECK(expected_nhd(8, 8, 2) == 0.0);
    CHECK(expected_nhd(8, 4, 3) == doctest::Approx(0.75));
    CHECK(pmf(8, 4, 3).mean() / 8.0 == doctest::Approx(expected_nhd(8, 4, 3)));
}

TEST_CASE("Monte Carlo negation agrees with the pmf") {
    const std::size_t L = 64, D = 24;
    const int k = 4;
    std::mt19937_64 gen(3);
    auto a = test::random_positive(L, k, gen);
    auto b = a;
    for (std::size_t i = 0; i < D; ++i) b.labels[i] = static_cast<Label>(a.labels[i] % k + 1);
    REQUIRE(positive_hd(a, b) == D);
    auto rng = RandomSource::seeded(4);
    const int draws = 20000;
    std::vector<double> freq(L + 1, 0.0);
    for (int i = 0; i < draws; ++i) freq[L - collisions(b, negate(a, rng))] += 1.0 / draws;
    const auto p = pmf(L, D, k);
    for (std::size_t d = L - D; d <= L; ++d) {
        const double pr = p.probability(d);
        const double se = std::sqrt(pr * (1 - pr) / draws);
        CHECK(std::abs(freq[d] - pr) <= 4 * se + 1e-12);
    }
}

TEST_CASE("score distribution is the equal-weight mixture") {
    const std::vector<std::size_t> ds = {2, 2, 4};
    const auto mix = transform_score_distribution(ds, 8, 3);
    REQUIRE(mix.probabilities.size() == 9);
    const auto p2 = pmf(8, 2, 3);
    const auto p4 = pmf(8, 4, 3);
    for (std::size_t d = 0; d <= 8; ++d)
        CHECK(mix.probabilities[d] == doctest::Approx((2 * p2.probability(d) + p4.probability(d)) / 3.0));
    CHECK(mix.total() == doctest::Approx(1.0));

    // Monte Carlo on constructed template pairs.
    std::mt19937_64 gen(6);
    auto rng = RandomSource::seeded(6);
    std::vector<std::size_t> observed;
    for (int i = 0; i < 30000; ++i) {
        const std::size_t D = ds[i % 3];
        auto a = test::random_positive(8, 3, gen);
        auto b = a;
        for (std::size_t j = 0; j < D; ++j) b.labels[j] = static_cast<Label>(a.labels[j] % 3 + 1);
        observed.push_back(8 - collisions(b, negate(a, rng)));
    }
    const auto emp = empirical_distribution(observed, 8);
    CHECK(total_variation(emp.probabilities, mix.probabilities) < 0.02);
}

TEST_CASE("point masses and modes") {
    const std::vector<std::size_t> zero = {0};
    CHECK(transform_score_distribution(zero, 10, 3).probabilities[10] == 1.0);
    const std::vector<std::size_t> three = {3};
    CHECK(transform_score_distribution(three, 10, 2).probabilities[7] == doctest::Approx(1.0));
    const std::vector<std::size_t> two = {2};
    CHECK(transform_score_modes(two, 8, 3).probabilities[7] == 1.0);
}

TEST_CASE("binning and total variation") {
    ScoreDistribution s{4, {0.1, 0.2, 0.3, 0.2, 0.2}};
    const auto b = s.binned(2);
    REQUIRE(b.size() == 2);
    CHECK(b[0] == doctest::Approx(0.3));
    CHECK(b[1] == doctest::Approx(0.7));
    const std::vector<double> p = {0.5, 0.5}, q = {1.0, 0.0};
    CHECK(total_variation(p, q) == doctest::Approx(0.5));
    CHECK(s.to_csv().rfind("score,probability\n", 0) == 0);
}
