#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfr/metrics.hpp"
#include "nfr/pipeline.hpp"
#include "nfr/types.hpp"

namespace nfr {

/// Feature vectors an attacker sees, one row per capture, each scaled to
/// unit L2 norm.
struct AttackDataset {
    std::string attribute;
    std::vector<std::vector<float>> features;
    std::vector<std::string> labels;
    std::vector<std::string> subject_ids;
    std::vector<std::string> capture_ids;

    std::size_t size() const { return features.size(); }
    std::size_t dimension() const { return features.empty() ? 0 : features.front().size(); }
    /// Throws ValidationError when column lengths disagree.
    void validate() const;
    AttackDataset subset(std::span<const std::size_t> rows) const;
    /// n x p matrix.
    Eigen::MatrixXd matrix() const;
};

/// Normalizes every row; label and id vectors must match the row count.
AttackDataset make_attack_dataset(std::string attribute, std::vector<std::vector<double>> rows,
                                  std::vector<std::string> labels, std::vector<std::string> subject_ids,
                                  std::vector<std::string> capture_ids);

AttackDataset attack_dataset_from_embeddings(std::span<const Embedding> embeddings, const std::string& attribute);
/// Casts labels to reals. `source` supplies the attribute labels and ids and
/// must be aligned with `templates`.
AttackDataset attack_dataset_from_templates(std::span<const PositiveTemplate> templates,
                                            std::span<const Embedding> source, const std::string& attribute);
AttackDataset attack_dataset_from_templates(std::span<const NegativeTemplate> templates,
                                            std::span<const Embedding> source, const std::string& attribute);

/// Writes the dataset in the embedding CSV dialect with the attribute as an
/// `attr:` column.
void export_attack_dataset(const AttackDataset& data, const std::filesystem::path& path);
AttackDataset load_attack_dataset(const std::filesystem::path& path, const std::string& attribute);

/// Mean per-class recall over the classes present in `truth`.
double balanced_accuracy(std::span<const std::string> predictions, std::span<const std::string> truth);
/// Same over an explicit class list; throws ValidationError if one of
/// them never occurs in `truth`.
double balanced_accuracy(std::span<const std::string> predictions, std::span<const std::string> truth,
                         std::span<const std::string> classes);

/// Relative accuracy reduction (unprotected - protected) / unprotected.
/// Negative when protection does not reduce accuracy.
double suppression_rate(double acc_unprotected, double acc_protected);

/// Attribute classifier interface. Implementations must be deterministic.
class Attacker {
public:
    virtual ~Attacker() = default;
    virtual std::string name() const = 0;
    virtual void fit(const AttackDataset& train) = 0;
    virtual std::vector<std::string> predict(const AttackDataset& data) const = 0;
};

using AttackerFactory = std::function<std::unique_ptr<Attacker>()>;

struct LogRegConfig {
    double l2 = 1e-2;
    int iterations = 300;
    /// Z-score features with training statistics before fitting.
    bool standardize = true;
};

/// Multinomial logistic regression, accelerated full-batch gradient descent
/// on mean cross-entropy + l2/2 ||W||^2 with step 1/Lipschitz.
class LogisticRegression : public Attacker {
public:
    explicit LogisticRegression(LogRegConfig config = {}) : config_(config) {}

    std::string name() const override { return "logreg"; }
    void fit(const AttackDataset& train) override;
    std::vector<std::string> predict(const AttackDataset& data) const override;

private:
    LogRegConfig config_;
    std::vector<std::string> classes_;
    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd scale_;
    Eigen::MatrixXd weights_;
    Eigen::RowVectorXd bias_;
};

/// Majority vote over Euclidean nearest neighbours. Vote ties go to the
/// smallest label, so k equal to the training size predicts one label
/// everywhere.
class KNearestNeighbors : public Attacker {
public:
    explicit KNearestNeighbors(std::size_t n_neighbors = 5) : n_neighbors_(n_neighbors) {}

    std::string name() const override { return "knn"; }
    void fit(const AttackDataset& train) override;
    std::vector<std::string> predict(const AttackDataset& data) const override;

private:
    std::size_t n_neighbors_;
    Eigen::MatrixXd points_;
    Eigen::VectorXd squared_norms_;
    std::vector<std::string> labels_;
};

/// Picks the best candidate by subject-disjoint inner cross-validation on
/// the training data (mean balanced accuracy), then refits it on all of it.
/// This is how the built-in attackers adapt to whatever representation
/// they are given.
class TunedAttacker : public Attacker {
public:
    TunedAttacker(std::string name, std::vector<AttackerFactory> candidates, std::size_t inner_folds,
                  std::uint64_t seed);

    std::string name() const override { return name_; }
    void fit(const AttackDataset& train) override;
    std::vector<std::string> predict(const AttackDataset& data) const override;
    std::size_t selected() const { return selected_; }

private:
    std::string name_;
    std::vector<AttackerFactory> candidates_;
    std::size_t inner_folds_;
    std::uint64_t seed_;
    std::size_t selected_ = 0;
    std::unique_ptr<Attacker> model_;
};

enum class Representation { original = 0, positive = 1, negative = 2 };
std::string to_string(Representation r);

struct NamedAttacker {
    std::string name;
    AttackerFactory make;
};

struct AttackConfig {
    std::vector<NamedAttacker> attackers;
    /// Downsample each test portion to equal class counts.
    bool balance_test = true;
    std::uint64_t seed = 0;

    /// Tuned logistic regression and tuned kNN.
    static AttackConfig builtin(std::uint64_t seed);
};

struct AttackCell {
    std::string attacker;
    Representation representation;
    std::vector<double> fold_accuracy;
    MeanStd accuracy;
};

struct AttackReport {
    std::string attribute;
    std::size_t folds = 0;
    std::vector<AttackCell> cells;

    const AttackCell& cell(const std::string& attacker, Representation r) const;
    double accuracy(const std::string& attacker, Representation r) const { return cell(attacker, r).accuracy.mean; }
    /// Suppression of `protected_rep` relative to `baseline` from mean
    /// accuracies.
    double suppression(const std::string& attacker, Representation baseline, Representation protected_rep) const;
    std::vector<std::string> attackers() const;

    /// One row per attacker and representation, with suppression columns
    /// for the negative representation.
    std::string to_csv() const;
    std::string to_table() const;
};

/// Per fold: builds the pipeline on training subjects, materializes the
/// original, positive and negative representations, trains every attacker
/// on each training portion and scores balanced accuracy on the test
/// portion.
AttackReport run_attack(std::span<const Embedding> embeddings, const PipelineConfig& pipeline,
                        const std::string& attribute, const DatasetSplit& split, const AttackConfig& config);

}  // namespace nfr
