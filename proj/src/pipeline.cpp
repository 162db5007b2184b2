#include "nfr/pipeline.hpp"

#include "nfr/error.hpp"
#include "nfr/negative_codec.hpp"

namespace nfr {

PipelineConfig PipelineConfig::paper_preset(int k) {
    PipelineConfig c;
    c.k = k;
    c.length = 4096;
    c.enlargement = EnlargementMode::trained;
    c.training = TrainingConfig::paper_preset();
    return c;
}

PipelineConfig PipelineConfig::for_fold(std::size_t fold) const {
    PipelineConfig c = *this;
    c.seed = derive_seed(seed, 0x700 + fold);
    return c;
}

std::uint64_t PipelineConfig::negation_seed(std::size_t fold) const { return derive_seed(seed, 0x4e00 + fold); }

Eigen::MatrixXd embedding_matrix(std::span<const Embedding> embeddings) {
    if (embeddings.empty()) return {};
    const auto d = embeddings.front().dimension();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(embeddings.size()));
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].dimension() != d)
            throw ValidationError("record '" + embeddings[i].capture_id + "' has a different dimension");
        for (std::size_t j = 0; j < d; ++j)
            x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = embeddings[i].values[j];
    }
    return x;
}

Pipeline::Pipeline(EnlargementNetwork network, Quantizer quantizer)
    : network_(std::move(network)), quantizer_(std::move(quantizer)) {
    if (network_.output_dim() != quantizer_.length())
        throw ValidationError("network output L=" + std::to_string(network_.output_dim()) +
                              " does not match quantizer L=" + std::to_string(quantizer_.length()));
}

Pipeline Pipeline::build(std::span<const Embedding> train, const PipelineConfig& config) {
    if (train.empty()) throw ValidationError("empty training set");
    const auto d = train.front().dimension();
    std::vector<double> loss;
    auto network = [&] {
        if (config.enlargement == EnlargementMode::random) return random_enlargement(d, config.length, config.seed);
        auto training = config.training;
        training.seed = config.seed;
        auto result = train_enlargement(train, config.length, training);
        loss = std::move(result.loss_history);
        return std::move(result.network);
    }();
    auto quantizer = fit_quantizer(network.enlarge_batch(embedding_matrix(train)), config.k);
    Pipeline p(std::move(network), std::move(quantizer));
    p.training_loss_ = std::move(loss);
    return p;
}

PositiveTemplate Pipeline::positive(const Embedding& e) const {
    auto v = network_.enlarge(e);
    auto t = quantizer_.discretize(v);
    t.subject_id = e.subject_id;
    t.capture_id = e.capture_id;
    return t;
}

std::vector<PositiveTemplate> Pipeline::positives(std::span<const Embedding> embeddings) const {
    std::vector<PositiveTemplate> out;
    if (embeddings.empty()) return out;
    const Eigen::MatrixXd enlarged = network_.enlarge_batch(embedding_matrix(embeddings));
    out.reserve(embeddings.size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const auto col = enlarged.col(static_cast<Eigen::Index>(i));
        auto t = quantizer_.discretize(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        t.subject_id = embeddings[i].subject_id;
        t.capture_id = embeddings[i].capture_id;
        out.push_back(std::move(t));
    }
    return out;
}

NegativeTemplate Pipeline::enroll(const Embedding& e, RandomSource& rng) const { return negate(positive(e), rng); }

GalleryMetadata Pipeline::gallery_metadata(SeedPolicy policy) const {
    GalleryMetadata m;
    m.k = quantizer_.k();
    m.length = static_cast<std::uint32_t>(quantizer_.length());
    m.quantizer_fingerprint = quantizer_.fingerprint();
    m.model_fingerprint = network_.fingerprint();
    m.seed_policy = policy;
    return m;
}

void Pipeline::check_gallery(const Gallery& gallery) const {
    const auto& m = gallery.metadata();
    if (m.quantizer_fingerprint != quantizer_.fingerprint())
        throw ValidationError("fingerprint mismatch: gallery quantizer " + to_hex(m.quantizer_fingerprint) +
                              " vs supplied " + to_hex(quantizer_.fingerprint()));
    if (m.model_fingerprint != network_.fingerprint())
        throw ValidationError("fingerprint mismatch: gallery model " + to_hex(m.model_fingerprint) + " vs supplied " +
                              to_hex(network_.fingerprint()));
    if (m.k != quantizer_.k() || m.length != quantizer_.length())
        throw ValidationError("gallery k/L do not match the pipeline");
}

}  // namespace nfr
