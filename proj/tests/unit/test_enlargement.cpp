#include <doctest.h>

#include <cmath>
#include <random>

#include "nfr/enlargement.hpp"
#include "nfr/error.hpp"
#include "nfr/synth.hpp"
#include "test_util.hpp"

using namespace nfr;

namespace {

Eigen::MatrixXd random_inputs(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(d, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    return x;
}

std::vector<Embedding> two_clusters(std::size_t per_class, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<Embedding> out;
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            Embedding e;
            e.subject_id = c ? "b" : "a";
            e.capture_id = e.subject_id + std::to_string(i);
            for (std::size_t j = 0; j < d; ++j)
                e.values.push_back(static_cast<float>((j % 2 == static_cast<std::size_t>(c) ? 1.0 : 0.0) + g(rng)));
            out.push_back(std::move(e));
        }
    return out;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
    TrainingConfig cfg;
    cfg.hidden = {6};
    cfg.batch_norm = true;
    cfg.dropout = 0.3;
    cfg.seed = 17;
    EnlargementTrainer trainer(4, 8, 3, cfg);
    const auto x = random_inputs(4, 3, 2);
    const std::vector<int> labels = {0, 1, 2};
    const std::uint64_t mask_seed = 99;

    trainer.loss_and_gradient(x, labels, mask_seed);
    const Eigen::VectorXd analytic = trainer.gradient();
    const Eigen::VectorXd p0 = trainer.parameters();
    REQUIRE(analytic.size() == p0.size());

    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
        Eigen::VectorXd p = p0;
        p[i] += h;
        trainer.set_parameters(p);
        const double up = trainer.loss_and_gradient(x, labels, mask_seed);
        p[i] -= 2 * h;
        trainer.set_parameters(p);
        const double down = trainer.loss_and_gradient(x, labels, mask_seed);
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("zero-weight network maps everything to zero") {
    DenseLayer layer;
    layer.weights = Eigen::MatrixXd::Zero(8, 4);
    layer.bias = Eigen::VectorXd::Zero(8);
    layer.activation = Activation::tanh;
    EnlargementNetwork net({layer});
    const std::vector<float> v = {0.5f, -0.5f, 0.5f, 0.5f};
    for (double y : net.enlarge(v).values) CHECK(y == 0.0);
}

TEST_CASE("network construction is validated") {
    DenseLayer relu_last;
    relu_last.weights = Eigen::MatrixXd::Ones(4, 4);
    relu_last.bias = Eigen::VectorXd::Zero(4);
    relu_last.activation = Activation::relu;
    CHECK_THROWS_AS(EnlargementNetwork({relu_last}), ValidationError);

    DenseLayer a = relu_last;
    DenseLayer b;
    b.weights = Eigen::MatrixXd::Ones(8, 5);
    b.bias = Eigen::VectorXd::Zero(8);
    b.activation = Activation::tanh;
    CHECK_THROWS_AS(EnlargementNetwork({a, b}), ValidationError);
}

TEST_CASE("outputs stay within [-1, 1] and are deterministic") {
    const auto net = random_enlargement(16, 64, 7);
    CHECK(net.input_dim() == 16);
    CHECK(net.output_dim() == 64);
    const Eigen::MatrixXd x = random_inputs(16, 50, 3) * 10.0;
    const auto y = net.enlarge_batch(x);
    CHECK(y.maxCoeff() <= 1.0);
    CHECK(y.minCoeff() >= -1.0);
    CHECK(net.enlarge_batch(x) == y);
    std::vector<float> col(16);
    for (int j = 0; j < 16; ++j) col[j] = static_cast<float>(x(j, 0));
    const auto single = net.enlarge(col).values;
    for (int i = 0; i < 64; ++i) CHECK(single[i] == doctest::Approx(y(i, 0)).epsilon(1e-5));
}

TEST_CASE("random enlargement depends on its seed") {
    const auto a = random_enlargement(8, 32, 7);
    const auto b = random_enlargement(8, 32, 7);
    const auto c = random_enlargement(8, 32, 8);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    CHECK_THROWS_AS(random_enlargement(8, 4, 1), ValidationError);
    CHECK_THROWS_AS(random_enlargement(0, 4, 1), ValidationError);
}

TEST_CASE("training loss decreases on two clusters") {
    const auto data = two_clusters(40, 16, 5);
    TrainingConfig cfg;
    cfg.hidden = {32};
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.seed = 3;
    const auto result = train_enlargement(data, 64, cfg);
    REQUIRE(result.loss_history.size() == 20);
    for (double l : result.loss_history) CHECK(std::isfinite(l));
    CHECK(result.loss_history.back() < result.loss_history.front());
    CHECK(result.network.output_dim() == 64);

    const auto again = train_enlargement(data, 64, cfg);
    CHECK(again.network.fingerprint() == result.network.fingerprint());
}

TEST_CASE("training enlarges into separable outputs") {
    const auto data = two_clusters(40, 16, 6);
    TrainingConfig cfg;
    cfg.hidden = {32};
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.seed = 4;
    const auto net = train_enlargement(data, 64, cfg).network;
    Eigen::VectorXd mean_a = Eigen::VectorXd::Zero(64), mean_b = Eigen::VectorXd::Zero(64);
    std::vector<Eigen::VectorXd> outs;
    for (const auto& e : data) {
        const auto v = net.enlarge(e).values;
        outs.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), 64));
        (e.subject_id == "a" ? mean_a : mean_b) += outs.back() / 40.0;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const bool near_a = (outs[i] - mean_a).norm() < (outs[i] - mean_b).norm();
        correct += near_a == (data[i].subject_id == "a");
    }
    CHECK(correct >= 76);
}

TEST_CASE("training preconditions") {
    const auto data = two_clusters(5, 4, 1);
    TrainingConfig cfg;
    cfg.hidden = {4};
    cfg.epochs = 0;
    CHECK_THROWS_AS(train_enlargement(data, 8, cfg), ValidationError);
    cfg.epochs = 1;
    std::vector<Embedding> one(data.begin(), data.begin() + 5);
    CHECK_THROWS_AS(train_enlargement(one, 8, cfg), ValidationError);
    auto mixed = data;
    mixed[1].values.push_back(0.0f);
    CHECK_THROWS_AS(train_enlargement(mixed, 8, cfg), ValidationError);
}

TEST_CASE("network serialization round-trips") {
    test::TempDir dir;
    const auto data = two_clusters(10, 8, 2);
    TrainingConfig cfg;
    cfg.hidden = {12};
    cfg.epochs = 2;
    cfg.batch_size = 8;
    const auto net = train_enlargement(data, 16, cfg).network;
    net.save(dir / "m.nenl");
    const auto loaded = EnlargementNetwork::load(dir / "m.nenl");
    CHECK(loaded.fingerprint() == net.fingerprint());
    CHECK(loaded.serialize() == net.serialize());
    const auto x = random_inputs(8, 5, 9);
    CHECK(loaded.enlarge_batch(x) == net.enlarge_batch(x));

    auto bytes = net.serialize();
    CHECK_THROWS_AS(EnlargementNetwork::deserialize(bytes.substr(0, bytes.size() / 2)), ParseError);
}
