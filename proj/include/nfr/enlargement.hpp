#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nfr/types.hpp"

namespace nfr {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

/// Fully connected layer with optional batch normalization ahead of the
/// activation. Weights are fan_out x fan_in.
struct DenseLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    Activation activation = Activation::relu;
    bool batch_norm = false;
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;

    std::size_t fan_in() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t fan_out() const { return static_cast<std::size_t>(weights.rows()); }
};

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Inference-mode enlargement network mapping a d-dimensional embedding to
/// an L-dimensional vector in [-1, 1]. Batch normalization is folded into
/// each layer's affine map, so evaluation is a plain chain of
/// affine + activation and is safe to share across threads.
class EnlargementNetwork {
public:
    /// Throws ValidationError unless the layers chain, the last activation
    /// is tanh and batch-norm vectors have the right sizes.
    explicit EnlargementNetwork(std::vector<DenseLayer> layers, double dropout = 0.0);

    std::size_t input_dim() const { return layers_.front().fan_in(); }
    std::size_t output_dim() const { return layers_.back().fan_out(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    double dropout() const { return dropout_; }
    const Digest& fingerprint() const { return fingerprint_; }

    EnlargedEmbedding enlarge(std::span<const float> embedding) const;
    EnlargedEmbedding enlarge(const Embedding& embedding) const { return enlarge(embedding.values); }

    /// Columns are samples: input is d x n, output L x n.
    Eigen::MatrixXd enlarge_batch(const Eigen::MatrixXd& inputs) const;

    std::string serialize() const;
    static EnlargementNetwork deserialize(const std::string& data, const std::string& name = "network");
    void save(const std::filesystem::path& path) const;
    static EnlargementNetwork load(const std::filesystem::path& path);

private:
    struct FoldedLayer {
        Eigen::MatrixXd weights;
        Eigen::VectorXd bias;
        Activation activation;
    };

    std::string serialize_body() const;

    std::vector<DenseLayer> layers_;
    std::vector<FoldedLayer> folded_;
    double dropout_;
    Digest fingerprint_{};
};

struct TrainingConfig {
    /// Hidden layer widths (ReLU); the final tanh layer of width L is
    /// appended automatically.
    std::vector<std::size_t> hidden = {256, 512};
    int epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 0.5;
    double rho = 0.95;
    double epsilon = 1e-6;
    double dropout = 0.5;
    bool batch_norm = true;
    double bn_momentum = 0.9;
    std::uint64_t seed = 0;

    /// 128 -> 256 -> 512 -> 4096 with the recipe above.
    static TrainingConfig paper_preset();
};

struct TrainingResult {
    EnlargementNetwork network;
    /// Mean training cross-entropy of each epoch.
    std::vector<double> loss_history;
};

/// Trains the network with a softmax identity head, then drops the head.
/// Throws ValidationError for fewer than two subjects, mixed dimensions or
/// epochs < 1, and ComputationError (naming the epoch) on a non-finite loss.
TrainingResult train_enlargement(std::span<const Embedding> train, std::size_t length,
                                 const TrainingConfig& config);

/// Single tanh layer with N(0, 1/d) weights and zero bias. Requires
/// length >= dim >= 1.
EnlargementNetwork random_enlargement(std::size_t dim, std::size_t length, std::uint64_t seed);

/// Training-mode network with a softmax head. Exposed so the gradient can be
/// checked against finite differences.
class EnlargementTrainer {
public:
    EnlargementTrainer(std::size_t input_dim, std::size_t length, std::size_t classes,
                       const TrainingConfig& config);

    /// Mean cross-entropy of the batch (columns of `inputs`) and its
    /// gradient with respect to every parameter, stored for gradient().
    /// Dropout masks are drawn from `mask_seed`, so repeated calls with the
    /// same seed see the same masks.
    double loss_and_gradient(const Eigen::MatrixXd& inputs, std::span<const int> labels,
                             std::uint64_t mask_seed, bool update_running_stats = false);

    /// All trainable parameters flattened in a fixed order.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    const Eigen::VectorXd& gradient() const { return gradient_; }

    /// One AdaDelta step using the last computed gradient.
    void adadelta_step();

    /// Discards the softmax head.
    EnlargementNetwork to_network() const;

private:
    struct TrainLayer {
        Eigen::MatrixXd weights;
        Eigen::MatrixXd bias;
        Eigen::MatrixXd gamma;
        Eigen::MatrixXd beta;
        Eigen::VectorXd running_mean;
        Eigen::VectorXd running_var;
        Activation activation;
    };

    std::vector<Eigen::MatrixXd*> parameter_blocks();
    std::vector<const Eigen::MatrixXd*> parameter_blocks() const;

    TrainingConfig config_;
    std::vector<TrainLayer> layers_;
    Eigen::MatrixXd head_weights_;
    Eigen::MatrixXd head_bias_;
    std::vector<Eigen::MatrixXd> block_gradients_;
    Eigen::VectorXd gradient_;
    Eigen::VectorXd acc_grad_;
    Eigen::VectorXd acc_delta_;
};

}  // namespace nfr
