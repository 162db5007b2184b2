#include <doctest.h>

#include <algorithm>
#include <random>

#include "nfr/error.hpp"
#include "nfr/quantizer.hpp"
#include "test_util.hpp"

using namespace nfr;

TEST_CASE("edges sit at the linear-interpolation quantiles") {
    Eigen::MatrixXd train(1, 6);
    train << 1, 2, 3, 4, 5, 6;
    const auto q = fit_quantizer(train, 3);
    const auto e = q.edges(0);
    REQUIRE(e.size() == 2);
    CHECK(e[0] == doctest::Approx(8.0 / 3.0));
    CHECK(e[1] == doctest::Approx(13.0 / 3.0));
    CHECK(q.label(0, 1.0) == 1);
    CHECK(q.label(0, 3.0) == 2);
    CHECK(q.label(0, 6.0) == 3);
}

TEST_CASE("quantile helper follows numpy's default") {
    const std::vector<double> v = {0, 10, 20, 30};
    CHECK(quantile_sorted(v, 0.0) == 0.0);
    CHECK(quantile_sorted(v, 1.0) == 30.0);
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(15.0));
    CHECK(quantile_sorted(v, 0.25) == doctest::Approx(7.5));
}

TEST_CASE("constant feature maps to a single bin") {
    Eigen::MatrixXd train = Eigen::MatrixXd::Constant(1, 10, 0.25);
    const auto q = fit_quantizer(train, 4);
    CHECK(q.label(0, 0.25) == 1);
    CHECK(q.label(0, 0.3) == 4);
}

TEST_CASE("values equal to an edge fall into the lower bin") {
    Quantizer q(3, 1, {0.0, 0.5});
    CHECK(q.label(0, -0.1) == 1);
    CHECK(q.label(0, 0.0) == 1);
    CHECK(q.label(0, 0.2) == 2);
    CHECK(q.label(0, 0.5) == 2);
    CHECK(q.label(0, 0.51) == 3);
}

TEST_CASE("quantizer validates its edges") {
    CHECK_THROWS_AS(Quantizer(1, 1, {}), ValidationError);
    CHECK_THROWS_AS(Quantizer(3, 2, {0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(Quantizer(3, 1, {1.0, 0.0}), ValidationError);
    Quantizer q(3, 2, {0.0, 1.0, 0.0, 1.0});
    const std::vector<double> wrong(3, 0.0);
    CHECK_THROWS_AS(q.discretize(wrong), ValidationError);
}

TEST_CASE("bins are balanced on continuous training data") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    const int n = 3000, L = 5, k = 3;
    Eigen::MatrixXd train(L, n);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = std::tanh(g(rng));
    const auto q = fit_quantizer(train, k);
    for (int j = 0; j < L; ++j) {
        std::vector<int> counts(k + 1, 0);
        for (int i = 0; i < n; ++i) ++counts[q.label(j, train(j, i))];
        for (int b = 1; b <= k; ++b) CHECK(std::abs(counts[b] - n / k) <= 2);
    }
}

TEST_CASE("labels are monotone in the value") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd train(3, 200);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = u(rng);
    const auto q = fit_quantizer(train, 5);
    for (int j = 0; j < 3; ++j) {
        std::vector<double> xs(500);
        for (auto& x : xs) x = u(rng);
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 1; i < xs.size(); ++i) CHECK(q.label(j, xs[i - 1]) <= q.label(j, xs[i]));
    }
}

TEST_CASE("both fit overloads agree") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd m(4, 30);
    std::vector<EnlargedEmbedding> v(30);
    for (int i = 0; i < 30; ++i) {
        v[i].values.resize(4);
        for (int j = 0; j < 4; ++j) v[i].values[j] = m(j, i) = u(rng);
    }
    CHECK(fit_quantizer(m, 3).serialize() == fit_quantizer(v, 3).serialize());
}

TEST_CASE("quantizer serialization round-trips") {
    test::TempDir dir;
    Quantizer q(3, 2, {-0.25, 0.25, -0.5, 0.125});
    q.save(dir / "q.nqnt");
    const auto loaded = Quantizer::load(dir / "q.nqnt");
    CHECK(loaded.fingerprint() == q.fingerprint());
    CHECK(loaded.serialize() == q.serialize());
    CHECK(loaded.k() == 3);
    CHECK(loaded.length() == 2);
    const auto bytes = q.serialize();
    CHECK_THROWS_AS(Quantizer::deserialize(bytes.substr(0, bytes.size() - 3)), ParseError);
}

TEST_CASE("discretize labels every position") {
    Quantizer q(2, 3, {0.0, 0.0, 0.0});
    const auto t = q.discretize(std::vector<double>{-1.0, 0.0, 1.0});
    CHECK(t.k == 2);
    CHECK(t.labels == std::vector<Label>{1, 1, 2});
}
