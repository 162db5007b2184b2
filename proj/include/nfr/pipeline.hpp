#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nfr/enlargement.hpp"
#include "nfr/quantizer.hpp"
#include "nfr/random.hpp"
#include "nfr/types.hpp"

namespace nfr {

enum class EnlargementMode { trained, random };

struct PipelineConfig {
    int k = 3;
    std::size_t length = 512;
    EnlargementMode enlargement = EnlargementMode::random;
    TrainingConfig training;
    std::uint64_t seed = 0;

    /// Trained 128 -> 256 -> 512 -> 4096 network.
    static PipelineConfig paper_preset(int k);

    /// Copy with the seed used to build fold `fold`'s pipeline.
    PipelineConfig for_fold(std::size_t fold) const;
    /// Seed of the negation stream for fold `fold`.
    std::uint64_t negation_seed(std::size_t fold) const;
};

/// Enrolment chain: enlarge, discretize, and (for references) negate.
class Pipeline {
public:
    /// Throws ValidationError when network output and quantizer length
    /// disagree.
    Pipeline(EnlargementNetwork network, Quantizer quantizer);

    /// Fits the network (trained or random per config) and the quantizer on
    /// `train`.
    static Pipeline build(std::span<const Embedding> train, const PipelineConfig& config);

    const EnlargementNetwork& network() const { return network_; }
    const Quantizer& quantizer() const { return quantizer_; }
    int k() const { return quantizer_.k(); }
    std::size_t length() const { return quantizer_.length(); }
    /// Per-epoch loss when the network was trained here; empty otherwise.
    const std::vector<double>& training_loss() const { return training_loss_; }

    PositiveTemplate positive(const Embedding& e) const;
    std::vector<PositiveTemplate> positives(std::span<const Embedding> embeddings) const;
    NegativeTemplate enroll(const Embedding& e, RandomSource& rng) const;

    GalleryMetadata gallery_metadata(SeedPolicy policy) const;
    /// Throws ValidationError if the gallery was enrolled with a different
    /// model, quantizer, k or L.
    void check_gallery(const Gallery& gallery) const;

private:
    EnlargementNetwork network_;
    Quantizer quantizer_;
    std::vector<double> training_loss_;
};

/// d x n matrix with one embedding per column.
Eigen::MatrixXd embedding_matrix(std::span<const Embedding> embeddings);

}  // namespace nfr
