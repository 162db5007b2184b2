#include "nfr/enlargement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "binary.hpp"
#include "nfr/digest.hpp"
#include "nfr/error.hpp"
#include "nfr/io.hpp"
#include "nfr/random.hpp"

namespace nfr {
namespace {

constexpr std::string_view kNetworkMagic = "NENL";
constexpr std::uint16_t kNetworkVersion = 1;

Eigen::MatrixXd activate(const Eigen::MatrixXd& x, Activation a) {
    return a == Activation::relu ? Eigen::MatrixXd(x.cwiseMax(0.0)) : Eigen::MatrixXd(x.array().tanh());
}

void validate_layers(const std::vector<DenseLayer>& layers) {
    if (layers.empty()) throw ValidationError("network needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const auto out = l.weights.rows();
        if (l.fan_in() == 0 || l.fan_out() == 0) throw ValidationError("layer " + std::to_string(i) + " is empty");
        if (l.bias.size() != out) throw ValidationError("layer " + std::to_string(i) + ": bias size mismatch");
        if (i > 0 && layers[i - 1].fan_out() != l.fan_in())
            throw ValidationError("layer " + std::to_string(i) + ": fan_in does not match previous fan_out");
        if (l.batch_norm && (l.gamma.size() != out || l.beta.size() != out || l.running_mean.size() != out ||
                             l.running_var.size() != out))
            throw ValidationError("layer " + std::to_string(i) + ": batch-norm vectors have wrong size");
    }
    if (layers.back().activation != Activation::tanh) throw ValidationError("final activation must be tanh");
}

Eigen::MatrixXd to_matrix(std::span<const Embedding> embeddings) {
    const auto d = embeddings.front().dimension();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(embeddings.size()));
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = embeddings[i].values[j];
    return x;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// EnlargementNetwork

EnlargementNetwork::EnlargementNetwork(std::vector<DenseLayer> layers, double dropout)
    : layers_(std::move(layers)), dropout_(dropout) {
    validate_layers(layers_);
    if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
    for (const auto& l : layers_) {
        FoldedLayer f{l.weights, l.bias, l.activation};
        if (l.batch_norm) {
            Eigen::VectorXd scale = l.gamma.array() / (l.running_var.array() + kBatchNormEpsilon).sqrt();
            f.weights = scale.asDiagonal() * l.weights;
            f.bias = scale.cwiseProduct(l.bias - l.running_mean) + l.beta;
        }
        folded_.push_back(std::move(f));
    }
    fingerprint_ = sha256(serialize_body());
}

Eigen::MatrixXd EnlargementNetwork::enlarge_batch(const Eigen::MatrixXd& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_dim())
        throw ValidationError("dimension mismatch: network expects " + std::to_string(input_dim()) +
                              " inputs, got " + std::to_string(inputs.rows()));
    // Column-wise matrix-vector products keep a sample's result independent
    // of the batch it arrives in.
    Eigen::MatrixXd out(static_cast<Eigen::Index>(output_dim()), inputs.cols());
    for (Eigen::Index col = 0; col < inputs.cols(); ++col) {
        Eigen::VectorXd a = inputs.col(col);
        for (const auto& l : folded_) {
            Eigen::VectorXd z = l.weights * a + l.bias;
            a = activate(z, l.activation);
        }
        out.col(col) = a;
    }
    return out;
}

EnlargedEmbedding EnlargementNetwork::enlarge(std::span<const float> embedding) const {
    if (embedding.size() != input_dim())
        throw ValidationError("dimension mismatch: network expects " + std::to_string(input_dim()) +
                              " inputs, got " + std::to_string(embedding.size()));
    Eigen::VectorXd x(static_cast<Eigen::Index>(embedding.size()));
    for (std::size_t i = 0; i < embedding.size(); ++i) x(static_cast<Eigen::Index>(i)) = embedding[i];
    Eigen::MatrixXd out = enlarge_batch(x);
    return EnlargedEmbedding{std::vector<double>(out.data(), out.data() + out.size())};
}

std::string EnlargementNetwork::serialize_body() const {
    binary::Writer w;
    w.bytes(kNetworkMagic);
    w.u16(kNetworkVersion);
    w.f64(dropout_);
    w.u32(static_cast<std::uint32_t>(layers_.size()));
    auto put_vec = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v(i));
    };
    for (const auto& l : layers_) {
        w.u32(static_cast<std::uint32_t>(l.fan_in()));
        w.u32(static_cast<std::uint32_t>(l.fan_out()));
        w.u8(static_cast<std::uint8_t>(l.activation));
        w.u8(l.batch_norm ? 1 : 0);
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.f64(l.weights(r, c));
        put_vec(l.bias);
        if (l.batch_norm) {
            put_vec(l.gamma);
            put_vec(l.beta);
            put_vec(l.running_mean);
            put_vec(l.running_var);
        }
    }
    return w.take();
}

std::string EnlargementNetwork::serialize() const {
    auto body = serialize_body();
    body.append(reinterpret_cast<const char*>(fingerprint_.data()), fingerprint_.size());
    return body;
}

EnlargementNetwork EnlargementNetwork::deserialize(const std::string& data, const std::string& name) {
    binary::Reader r(data, name);
    if (r.bytes(4) != kNetworkMagic) r.fail("bad magic, expected NENL");
    auto version = r.u16();
    if (version != kNetworkVersion) r.fail("unsupported version " + std::to_string(version));
    double dropout = r.f64();
    auto count = r.u32();
    std::vector<DenseLayer> layers;
    auto get_vec = [&](std::uint32_t n) {
        Eigen::VectorXd v(n);
        for (std::uint32_t i = 0; i < n; ++i) v(i) = r.f64();
        return v;
    };
    for (std::uint32_t i = 0; i < count; ++i) {
        DenseLayer l;
        auto fan_in = r.u32();
        auto fan_out = r.u32();
        auto act = r.u8();
        if (act > 1) r.fail("unknown activation");
        l.activation = static_cast<Activation>(act);
        l.batch_norm = r.u8() != 0;
        if (static_cast<std::uint64_t>(fan_in) * fan_out * 8 > r.remaining()) r.fail("truncated weights");
        l.weights.resize(fan_out, fan_in);
        for (std::uint32_t row = 0; row < fan_out; ++row)
            for (std::uint32_t col = 0; col < fan_in; ++col) l.weights(row, col) = r.f64();
        l.bias = get_vec(fan_out);
        if (l.batch_norm) {
            l.gamma = get_vec(fan_out);
            l.beta = get_vec(fan_out);
            l.running_mean = get_vec(fan_out);
            l.running_var = get_vec(fan_out);
        }
        layers.push_back(std::move(l));
    }
    const auto body_size = r.offset();
    Digest stored = r.digest();
    if (!r.at_end()) r.fail("trailing bytes");
    if (sha256(std::string_view(data).substr(0, body_size)) != stored) r.fail("fingerprint does not match content");
    return EnlargementNetwork(std::move(layers), dropout);
}

void EnlargementNetwork::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

EnlargementNetwork EnlargementNetwork::load(const std::filesystem::path& path) {
    return deserialize(read_file(path), path.string());
}

TrainingConfig TrainingConfig::paper_preset() {
    TrainingConfig c;
    c.hidden = {256, 512};
    return c;
}

EnlargementNetwork random_enlargement(std::size_t dim, std::size_t length, std::uint64_t seed) {
    if (dim < 1 || length < dim) throw ValidationError("random enlargement requires length >= dim >= 1");
    std::mt19937_64 rng(seed);
    DenseLayer l;
    l.weights = gaussian(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(dim),
                         1.0 / std::sqrt(static_cast<double>(dim)), rng);
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(length));
    l.activation = Activation::tanh;
    return EnlargementNetwork({std::move(l)});
}

// ---------------------------------------------------------------------------
// EnlargementTrainer

EnlargementTrainer::EnlargementTrainer(std::size_t input_dim, std::size_t length, std::size_t classes,
                                       const TrainingConfig& config)
    : config_(config) {
    if (input_dim == 0 || length == 0 || classes < 2) throw ValidationError("trainer needs d, L >= 1 and >= 2 classes");
    std::mt19937_64 rng(derive_seed(config.seed, 0x1417));
    std::vector<std::size_t> widths = config.hidden;
    widths.push_back(length);
    std::size_t fan_in = input_dim;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const auto fan_out = static_cast<Eigen::Index>(widths[i]);
        const bool last = i + 1 == widths.size();
        TrainLayer l;
        l.activation = last ? Activation::tanh : Activation::relu;
        // He init for ReLU layers, Glorot for the tanh layer.
        const double stddev = last ? std::sqrt(2.0 / static_cast<double>(fan_in + widths[i]))
                                   : std::sqrt(2.0 / static_cast<double>(fan_in));
        l.weights = gaussian(fan_out, static_cast<Eigen::Index>(fan_in), stddev, rng);
        l.bias = Eigen::MatrixXd::Zero(fan_out, 1);
        if (config.batch_norm) {
            l.gamma = Eigen::MatrixXd::Ones(fan_out, 1);
            l.beta = Eigen::MatrixXd::Zero(fan_out, 1);
            l.running_mean = Eigen::VectorXd::Zero(fan_out);
            l.running_var = Eigen::VectorXd::Ones(fan_out);
        }
        layers_.push_back(std::move(l));
        fan_in = widths[i];
    }
    head_weights_ = gaussian(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(length),
                             std::sqrt(2.0 / static_cast<double>(length + classes)), rng);
    head_bias_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), 1);

    const auto n = parameters().size();
    acc_grad_ = Eigen::VectorXd::Zero(n);
    acc_delta_ = Eigen::VectorXd::Zero(n);
}

std::vector<Eigen::MatrixXd*> EnlargementTrainer::parameter_blocks() {
    std::vector<Eigen::MatrixXd*> blocks;
    for (auto& l : layers_) {
        blocks.push_back(&l.weights);
        blocks.push_back(&l.bias);
        if (config_.batch_norm) {
            blocks.push_back(&l.gamma);
            blocks.push_back(&l.beta);
        }
    }
    blocks.push_back(&head_weights_);
    blocks.push_back(&head_bias_);
    return blocks;
}

std::vector<const Eigen::MatrixXd*> EnlargementTrainer::parameter_blocks() const {
    auto blocks = const_cast<EnlargementTrainer*>(this)->parameter_blocks();
    return {blocks.begin(), blocks.end()};
}

Eigen::VectorXd EnlargementTrainer::parameters() const {
    Eigen::Index total = 0;
    const auto blocks = parameter_blocks();
    for (const auto* b : blocks) total += b->size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    for (const auto* b : blocks) {
        flat.segment(at, b->size()) = b->reshaped();
        at += b->size();
    }
    return flat;
}

void EnlargementTrainer::set_parameters(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    for (auto* b : parameter_blocks()) {
        if (at + b->size() > flat.size()) throw ValidationError("parameter vector too short");
        b->reshaped() = flat.segment(at, b->size());
        at += b->size();
    }
    if (at != flat.size()) throw ValidationError("parameter vector too long");
}

double EnlargementTrainer::loss_and_gradient(const Eigen::MatrixXd& inputs, std::span<const int> labels,
                                             std::uint64_t mask_seed, bool update_running_stats) {
    const Eigen::Index n = inputs.cols();
    if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw ValidationError("batch/label size mismatch");
    const double p = config_.dropout;
    std::mt19937_64 mask_rng(mask_seed);
    std::bernoulli_distribution keep(1.0 - p);

    struct Cache {
        Eigen::MatrixXd input;
        Eigen::MatrixXd normalized;  // BN: (z - mu) / sigma
        Eigen::VectorXd inv_std;
        Eigen::MatrixXd activated;
        Eigen::MatrixXd mask;
    };
    std::vector<Cache> caches(layers_.size());

    Eigen::MatrixXd a = inputs;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        auto& l = layers_[li];
        auto& c = caches[li];
        c.input = a;
        Eigen::MatrixXd z = l.weights * a;
        z.colwise() += l.bias.col(0);
        Eigen::MatrixXd y;
        if (config_.batch_norm) {
            Eigen::VectorXd mu = z.rowwise().mean();
            Eigen::MatrixXd centered = z.colwise() - mu;
            Eigen::VectorXd var = centered.array().square().rowwise().mean();
            c.inv_std = (var.array() + kBatchNormEpsilon).rsqrt();
            c.normalized = c.inv_std.asDiagonal() * centered;
            y = l.gamma.col(0).asDiagonal() * c.normalized;
            y.colwise() += l.beta.col(0);
            if (update_running_stats) {
                const double m = config_.bn_momentum;
                const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
                l.running_mean = m * l.running_mean + (1.0 - m) * mu;
                l.running_var = m * l.running_var + (1.0 - m) * unbias * var;
            }
        } else {
            y = std::move(z);
        }
        c.activated = activate(y, l.activation);
        if (p > 0.0) {
            c.mask.resize(c.activated.rows(), n);
            for (Eigen::Index col = 0; col < n; ++col)
                for (Eigen::Index row = 0; row < c.mask.rows(); ++row)
                    c.mask(row, col) = keep(mask_rng) ? 1.0 / (1.0 - p) : 0.0;
            a = c.activated.cwiseProduct(c.mask);
        } else {
            a = c.activated;
        }
    }

    Eigen::MatrixXd scores = head_weights_ * a;
    scores.colwise() += head_bias_.col(0);
    Eigen::MatrixXd probs(scores.rows(), n);
    double loss = 0.0;
    for (Eigen::Index col = 0; col < n; ++col) {
        const double mx = scores.col(col).maxCoeff();
        Eigen::VectorXd e = (scores.col(col).array() - mx).exp();
        const double sum = e.sum();
        probs.col(col) = e / sum;
        const int y = labels[static_cast<std::size_t>(col)];
        if (y < 0 || y >= scores.rows()) throw ValidationError("label out of range");
        loss -= scores(y, col) - mx - std::log(sum);
    }
    loss /= static_cast<double>(n);

    // Backward pass. Gradients are collected in parameter_blocks() order.
    Eigen::MatrixXd d_scores = probs;
    for (Eigen::Index col = 0; col < n; ++col) d_scores(labels[static_cast<std::size_t>(col)], col) -= 1.0;
    d_scores /= static_cast<double>(n);

    std::vector<Eigen::MatrixXd> grads;
    Eigen::MatrixXd d_head_w = d_scores * a.transpose();
    Eigen::MatrixXd d_head_b = d_scores.rowwise().sum();
    Eigen::MatrixXd d_a = head_weights_.transpose() * d_scores;

    std::vector<std::vector<Eigen::MatrixXd>> layer_grads(layers_.size());
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& l = layers_[li];
        const auto& c = caches[li];
        Eigen::MatrixXd d_h = p > 0.0 ? Eigen::MatrixXd(d_a.cwiseProduct(c.mask)) : d_a;
        Eigen::MatrixXd d_y;
        if (l.activation == Activation::relu)
            d_y = d_h.cwiseProduct((c.activated.array() > 0.0).cast<double>().matrix());
        else
            d_y = d_h.cwiseProduct((1.0 - c.activated.array().square()).matrix());

        Eigen::MatrixXd d_z;
        Eigen::MatrixXd d_gamma, d_beta;
        if (config_.batch_norm) {
            d_gamma = d_y.cwiseProduct(c.normalized).rowwise().sum();
            d_beta = d_y.rowwise().sum();
            Eigen::MatrixXd d_norm = l.gamma.col(0).asDiagonal() * d_y;
            Eigen::VectorXd sum_d = d_norm.rowwise().sum();
            Eigen::VectorXd sum_dx = d_norm.cwiseProduct(c.normalized).rowwise().sum();
            Eigen::MatrixXd inner = static_cast<double>(n) * d_norm;
            inner.colwise() -= sum_d;
            inner -= sum_dx.asDiagonal() * c.normalized;
            d_z = c.inv_std.asDiagonal() * inner / static_cast<double>(n);
        } else {
            d_z = std::move(d_y);
        }
        Eigen::MatrixXd d_w = d_z * c.input.transpose();
        Eigen::MatrixXd d_b = d_z.rowwise().sum();
        d_a = l.weights.transpose() * d_z;

        auto& g = layer_grads[li];
        g.push_back(std::move(d_w));
        g.push_back(std::move(d_b));
        if (config_.batch_norm) {
            g.push_back(std::move(d_gamma));
            g.push_back(std::move(d_beta));
        }
    }
    for (auto& g : layer_grads)
        for (auto& m : g) grads.push_back(std::move(m));
    grads.push_back(std::move(d_head_w));
    grads.push_back(std::move(d_head_b));

    Eigen::Index total = 0;
    for (const auto& g : grads) total += g.size();
    gradient_.resize(total);
    Eigen::Index at = 0;
    for (const auto& g : grads) {
        gradient_.segment(at, g.size()) = g.reshaped();
        at += g.size();
    }
    return loss;
}

void EnlargementTrainer::adadelta_step() {
    const double rho = config_.rho;
    const double eps = config_.epsilon;
    const auto& g = gradient_;
    if (g.size() != acc_grad_.size()) throw ValidationError("no gradient computed yet");
    acc_grad_ = rho * acc_grad_ + (1.0 - rho) * g.cwiseAbs2();
    Eigen::VectorXd delta =
        ((acc_delta_.array() + eps).sqrt() / (acc_grad_.array() + eps).sqrt() * g.array()).matrix();
    acc_delta_ = rho * acc_delta_ + (1.0 - rho) * delta.cwiseAbs2();
    set_parameters(parameters() - config_.learning_rate * delta);
}

EnlargementNetwork EnlargementTrainer::to_network() const {
    std::vector<DenseLayer> out;
    for (const auto& l : layers_) {
        DenseLayer d;
        d.weights = l.weights;
        d.bias = l.bias.col(0);
        d.activation = l.activation;
        d.batch_norm = config_.batch_norm;
        if (d.batch_norm) {
            d.gamma = l.gamma.col(0);
            d.beta = l.beta.col(0);
            d.running_mean = l.running_mean;
            d.running_var = l.running_var;
        }
        out.push_back(std::move(d));
    }
    return EnlargementNetwork(std::move(out), config_.dropout);
}

// ---------------------------------------------------------------------------

TrainingResult train_enlargement(std::span<const Embedding> train, std::size_t length,
                                 const TrainingConfig& config) {
    if (config.epochs < 1) throw ValidationError("epochs must be at least 1");
    if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
    if (config.batch_size < 1) throw ValidationError("batch size must be at least 1");
    if (length < 1) throw ValidationError("L must be at least 1");
    if (train.empty()) throw ValidationError("empty training set");
    const auto d = train.front().dimension();
    std::map<std::string, int> class_of;
    for (const auto& e : train) {
        if (e.dimension() != d) throw ValidationError("record '" + e.capture_id + "' has a different dimension");
        class_of.emplace(e.subject_id, 0);
    }
    if (class_of.size() < 2) throw ValidationError("enlargement training needs at least two subjects");
    int next = 0;
    for (auto& [id, c] : class_of) c = next++;

    const Eigen::MatrixXd x = to_matrix(train);
    std::vector<int> y(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) y[i] = class_of.at(train[i].subject_id);

    EnlargementTrainer trainer(d, length, class_of.size(), config);
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0x5u));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainingResult result{trainer.to_network(), {}};
    std::uint64_t step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const auto stop = std::min(order.size(), start + config.batch_size);
            const auto n = stop - start;
            // A single-sample batch has zero variance under batch norm.
            if (config.batch_norm && n < 2 && order.size() >= 2) continue;
            Eigen::MatrixXd batch(x.rows(), static_cast<Eigen::Index>(n));
            std::vector<int> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                batch.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(order[start + i]));
                labels[i] = y[order[start + i]];
            }
            const double loss = trainer.loss_and_gradient(batch, labels, derive_seed(config.seed, 0x100000 + step++), true);
            if (!std::isfinite(loss))
                throw ComputationError("non-finite training loss at epoch " + std::to_string(epoch + 1));
            trainer.adadelta_step();
            epoch_loss += loss * static_cast<double>(n);
            seen += n;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(seen, 1)));
    }
    result.network = trainer.to_network();
    return result;
}

}  // namespace nfr
