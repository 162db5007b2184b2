#include "nfr/attack.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "nfr/error.hpp"
#include "nfr/folds.hpp"
#include "nfr/io.hpp"
#include "nfr/negative_codec.hpp"
#include "nfr/random.hpp"

namespace nfr {
namespace {

std::vector<std::string> sorted_classes(std::span<const std::string> labels) {
    std::set<std::string> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

const std::string& attribute_of(const Embedding& e, const std::string& attribute) {
    auto it = e.attributes.find(attribute);
    if (it == e.attributes.end())
        throw ValidationError("record '" + e.capture_id + "' lacks attribute '" + attribute + "'");
    return it->second;
}

template <typename Template>
AttackDataset from_templates(std::span<const Template> templates, std::span<const Embedding> source,
                             const std::string& attribute) {
    if (templates.size() != source.size()) throw ValidationError("templates and source records are not aligned");
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels, subjects, captures;
    for (std::size_t i = 0; i < templates.size(); ++i) {
        rows.emplace_back(templates[i].labels.begin(), templates[i].labels.end());
        labels.push_back(attribute_of(source[i], attribute));
        subjects.push_back(source[i].subject_id);
        captures.push_back(source[i].capture_id);
    }
    return make_attack_dataset(attribute, std::move(rows), std::move(labels), std::move(subjects),
                               std::move(captures));
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double top_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
    double lambda = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd w = m * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        lambda = norm;
    }
    return lambda;
}

}  // namespace

// ---------------------------------------------------------------------------
// AttackDataset

void AttackDataset::validate() const {
    if (labels.size() != features.size() || subject_ids.size() != features.size() ||
        capture_ids.size() != features.size())
        throw ValidationError("attack dataset: " + std::to_string(features.size()) + " rows but " +
                              std::to_string(labels.size()) + " labels, " + std::to_string(subject_ids.size()) +
                              " subject ids and " + std::to_string(capture_ids.size()) + " capture ids");
    for (const auto& row : features)
        if (row.size() != dimension()) throw ValidationError("attack dataset rows differ in length");
}

AttackDataset AttackDataset::subset(std::span<const std::size_t> rows) const {
    AttackDataset out;
    out.attribute = attribute;
    for (auto r : rows) {
        out.features.push_back(features.at(r));
        out.labels.push_back(labels.at(r));
        out.subject_ids.push_back(subject_ids.at(r));
        out.capture_ids.push_back(capture_ids.at(r));
    }
    return out;
}

Eigen::MatrixXd AttackDataset::matrix() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dimension()));
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < dimension(); ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
    return x;
}

AttackDataset make_attack_dataset(std::string attribute, std::vector<std::vector<double>> rows,
                                  std::vector<std::string> labels, std::vector<std::string> subject_ids,
                                  std::vector<std::string> capture_ids) {
    AttackDataset out;
    out.attribute = std::move(attribute);
    out.labels = std::move(labels);
    out.subject_ids = std::move(subject_ids);
    out.capture_ids = std::move(capture_ids);
    out.features.reserve(rows.size());
    for (const auto& row : rows) {
        double sq = 0.0;
        for (double v : row) sq += v * v;
        const double norm = std::sqrt(sq);
        std::vector<float> f(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) f[j] = static_cast<float>(norm > 0.0 ? row[j] / norm : row[j]);
        out.features.push_back(std::move(f));
    }
    out.validate();
    return out;
}

AttackDataset attack_dataset_from_embeddings(std::span<const Embedding> embeddings, const std::string& attribute) {
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels, subjects, captures;
    for (const auto& e : embeddings) {
        rows.emplace_back(e.values.begin(), e.values.end());
        labels.push_back(attribute_of(e, attribute));
        subjects.push_back(e.subject_id);
        captures.push_back(e.capture_id);
    }
    return make_attack_dataset(attribute, std::move(rows), std::move(labels), std::move(subjects),
                               std::move(captures));
}

AttackDataset attack_dataset_from_templates(std::span<const PositiveTemplate> templates,
                                            std::span<const Embedding> source, const std::string& attribute) {
    return from_templates(templates, source, attribute);
}

AttackDataset attack_dataset_from_templates(std::span<const NegativeTemplate> templates,
                                            std::span<const Embedding> source, const std::string& attribute) {
    return from_templates(templates, source, attribute);
}

void export_attack_dataset(const AttackDataset& data, const std::filesystem::path& path) {
    data.validate();
    std::vector<Embedding> rows;
    rows.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        rows.push_back({data.subject_ids[i], data.capture_ids[i], data.features[i], {{data.attribute, data.labels[i]}}});
    save_embeddings(rows, path, EmbeddingFormat::csv);
}

AttackDataset load_attack_dataset(const std::filesystem::path& path, const std::string& attribute) {
    const auto rows = load_embeddings(path, EmbeddingFormat::csv);
    AttackDataset out;
    out.attribute = attribute;
    for (const auto& e : rows) {
        out.features.push_back(e.values);
        out.labels.push_back(attribute_of(e, attribute));
        out.subject_ids.push_back(e.subject_id);
        out.capture_ids.push_back(e.capture_id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

double balanced_accuracy(std::span<const std::string> predictions, std::span<const std::string> truth,
                         std::span<const std::string> classes) {
    if (predictions.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
    if (classes.empty()) throw ValidationError("no classes to score");
    double sum = 0.0;
    for (const auto& c : classes) {
        std::size_t total = 0, hit = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != c) continue;
            ++total;
            hit += predictions[i] == c;
        }
        if (total == 0) throw ValidationError("class '" + c + "' is absent from the truth labels");
        sum += static_cast<double>(hit) / static_cast<double>(total);
    }
    return sum / static_cast<double>(classes.size());
}

double balanced_accuracy(std::span<const std::string> predictions, std::span<const std::string> truth) {
    if (truth.empty()) throw ValidationError("empty truth labels");
    const auto classes = sorted_classes(truth);
    return balanced_accuracy(predictions, truth, classes);
}

double suppression_rate(double acc_unprotected, double acc_protected) {
    if (!(acc_unprotected > 0.0 && acc_unprotected <= 1.0))
        throw ValidationError("unprotected accuracy must lie in (0, 1]");
    if (!(acc_protected >= 0.0 && acc_protected <= 1.0)) throw ValidationError("protected accuracy must lie in [0, 1]");
    return (acc_unprotected - acc_protected) / acc_unprotected;
}

// ---------------------------------------------------------------------------
// LogisticRegression

void LogisticRegression::fit(const AttackDataset& train) {
    train.validate();
    classes_ = sorted_classes(train.labels);
    if (classes_.size() < 2) throw ValidationError("logistic regression needs at least two classes");
    if (config_.iterations < 1 || !(config_.l2 >= 0.0)) throw ValidationError("invalid logistic regression config");

    Eigen::MatrixXd x = train.matrix();
    const auto n = x.rows();
    const auto p = x.cols();
    const auto c = static_cast<Eigen::Index>(classes_.size());
    mean_ = Eigen::RowVectorXd::Zero(p);
    scale_ = Eigen::RowVectorXd::Ones(p);
    if (config_.standardize) {
        mean_ = x.colwise().mean();
        x.rowwise() -= mean_;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n));
            if (sd > 1e-12) scale_(j) = sd;
        }
        x.array().rowwise() /= scale_.array();
    }

    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto it = std::lower_bound(classes_.begin(), classes_.end(), train.labels[static_cast<std::size_t>(i)]);
        y(i, it - classes_.begin()) = 1.0;
    }

    // Softmax cross-entropy has Hessian at most 1/2 in the logits; the bias
    // column adds at most 1 to the data Gram spectrum.
    const double gram = top_eigenvalue(x.transpose() * x / static_cast<double>(n));
    const double lipschitz = 1.1 * (0.5 * (gram + 1.0) + config_.l2);
    const double step = 1.0 / lipschitz;

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, c), w_look = w;
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(c), b_look = b;
    double t = 1.0;
    for (int it = 0; it < config_.iterations; ++it) {
        Eigen::MatrixXd z = x * w_look;
        z.rowwise() += b_look;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mx = z.row(i).maxCoeff();
            z.row(i) = (z.row(i).array() - mx).exp();
            z.row(i) /= z.row(i).sum();
        }
        z -= y;
        const Eigen::MatrixXd grad_w = x.transpose() * z / static_cast<double>(n) + config_.l2 * w_look;
        const Eigen::RowVectorXd grad_b = z.colwise().mean();
        Eigen::MatrixXd w_next = w_look - step * grad_w;
        Eigen::RowVectorXd b_next = b_look - step * grad_b;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double momentum = (t - 1.0) / t_next;
        w_look = w_next + momentum * (w_next - w);
        b_look = b_next + momentum * (b_next - b);
        w = std::move(w_next);
        b = std::move(b_next);
        t = t_next;
    }
    weights_ = std::move(w);
    bias_ = std::move(b);
}

std::vector<std::string> LogisticRegression::predict(const AttackDataset& data) const {
    if (classes_.empty()) throw ValidationError("logistic regression is not fitted");
    Eigen::MatrixXd x = data.matrix();
    if (x.cols() != weights_.rows()) throw ValidationError("feature dimension differs from training data");
    x.rowwise() -= mean_;
    x.array().rowwise() /= scale_.array();
    Eigen::MatrixXd z = x * weights_;
    z.rowwise() += bias_;
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        z.row(i).maxCoeff(&best);
        out.push_back(classes_[static_cast<std::size_t>(best)]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// KNearestNeighbors

void KNearestNeighbors::fit(const AttackDataset& train) {
    train.validate();
    if (train.size() == 0) throw ValidationError("kNN needs a non-empty training set");
    if (n_neighbors_ < 1 || n_neighbors_ > train.size())
        throw ValidationError("n_neighbors must lie in [1, " + std::to_string(train.size()) + "]");
    if (sorted_classes(train.labels).size() < 2) throw ValidationError("kNN needs at least two classes");
    points_ = train.matrix();
    squared_norms_ = points_.rowwise().squaredNorm();
    labels_ = train.labels;
}

std::vector<std::string> KNearestNeighbors::predict(const AttackDataset& data) const {
    if (labels_.empty()) throw ValidationError("kNN is not fitted");
    const Eigen::MatrixXd q = data.matrix();
    if (q.cols() != points_.cols()) throw ValidationError("feature dimension differs from training data");
    const Eigen::MatrixXd cross = q * points_.transpose();
    const Eigen::VectorXd q_norms = q.rowwise().squaredNorm();
    const auto n = static_cast<std::size_t>(points_.rows());
    std::vector<std::size_t> order(n);
    std::vector<double> dist(n);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            dist[j] = std::sqrt(std::max(0.0, q_norms(i) + squared_norms_(jj) - 2.0 * cross(i, jj)));
        }
        std::iota(order.begin(), order.end(), 0);
        const auto k = static_cast<std::ptrdiff_t>(n_neighbors_);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::size_t a, std::size_t b) {
            return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
        });
        std::map<std::string, std::size_t> votes;
        for (std::ptrdiff_t r = 0; r < k; ++r) ++votes[labels_[order[static_cast<std::size_t>(r)]]];
        // std::map iterates labels in ascending order, so a strict comparison
        // keeps the smallest label on a tie.
        auto best = votes.begin();
        for (auto it = std::next(votes.begin()); it != votes.end(); ++it)
            if (it->second > best->second) best = it;
        out.push_back(best->first);
    }
    return out;
}

// ---------------------------------------------------------------------------
// TunedAttacker

TunedAttacker::TunedAttacker(std::string name, std::vector<AttackerFactory> candidates, std::size_t inner_folds,
                             std::uint64_t seed)
    : name_(std::move(name)), candidates_(std::move(candidates)), inner_folds_(inner_folds), seed_(seed) {
    if (candidates_.empty()) throw ValidationError("tuned attacker needs at least one candidate");
    if (inner_folds_ < 2) throw ValidationError("inner folds must be at least 2");
}

void TunedAttacker::fit(const AttackDataset& train) {
    train.validate();
    selected_ = 0;
    auto subjects = sorted_classes(train.subject_ids);
    if (candidates_.size() > 1 && subjects.size() >= inner_folds_) {
        std::mt19937_64 rng(seed_);
        std::shuffle(subjects.begin(), subjects.end(), rng);
        std::map<std::string, std::size_t> fold_of;
        for (std::size_t i = 0; i < subjects.size(); ++i) fold_of[subjects[i]] = i % inner_folds_;

        double best_score = -1.0;
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            double total = 0.0;
            std::size_t used = 0;
            for (std::size_t f = 0; f < inner_folds_; ++f) {
                std::vector<std::size_t> fit_rows, val_rows;
                for (std::size_t i = 0; i < train.size(); ++i)
                    (fold_of[train.subject_ids[i]] == f ? val_rows : fit_rows).push_back(i);
                const auto fit_part = train.subset(fit_rows);
                const auto val_part = train.subset(val_rows);
                if (sorted_classes(fit_part.labels).size() < 2 || val_part.size() == 0) continue;
                auto model = candidates_[c]();
                try {
                    model->fit(fit_part);
                } catch (const ValidationError&) {
                    continue;  // e.g. more neighbours than inner training rows
                }
                total += balanced_accuracy(model->predict(val_part), val_part.labels);
                ++used;
            }
            if (used == 0) continue;
            const double score = total / static_cast<double>(used);
            if (score > best_score) {
                best_score = score;
                selected_ = c;
            }
        }
    }
    model_ = candidates_[selected_]();
    model_->fit(train);
}

std::vector<std::string> TunedAttacker::predict(const AttackDataset& data) const {
    if (!model_) throw ValidationError("tuned attacker is not fitted");
    return model_->predict(data);
}

// ---------------------------------------------------------------------------
// Protocol

std::string to_string(Representation r) {
    switch (r) {
        case Representation::original: return "original";
        case Representation::positive: return "positive";
        case Representation::negative: return "negative";
    }
    return "unknown";
}

AttackConfig AttackConfig::builtin(std::uint64_t seed) {
    AttackConfig c;
    c.seed = seed;
    const auto logreg_seed = derive_seed(seed, 0x106);
    const auto knn_seed = derive_seed(seed, 0x419);
    c.attackers.push_back({"logreg", [logreg_seed] {
                               std::vector<AttackerFactory> grid;
                               for (double l2 : {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0})
                                   grid.push_back([l2] { return std::make_unique<LogisticRegression>(LogRegConfig{l2}); });
                               return std::make_unique<TunedAttacker>("logreg", std::move(grid), 3, logreg_seed);
                           }});
    c.attackers.push_back({"knn", [knn_seed] {
                               std::vector<AttackerFactory> grid;
                               for (std::size_t k : {1, 5, 15, 31, 63, 101})
                                   grid.push_back([k] { return std::make_unique<KNearestNeighbors>(k); });
                               return std::make_unique<TunedAttacker>("knn", std::move(grid), 3, knn_seed);
                           }});
    return c;
}

const AttackCell& AttackReport::cell(const std::string& attacker, Representation r) const {
    for (const auto& c : cells)
        if (c.attacker == attacker && c.representation == r) return c;
    throw ValidationError("no result for attacker '" + attacker + "' on " + to_string(r) + " templates");
}

double AttackReport::suppression(const std::string& attacker, Representation baseline,
                                 Representation protected_rep) const {
    return suppression_rate(accuracy(attacker, baseline), accuracy(attacker, protected_rep));
}

std::vector<std::string> AttackReport::attackers() const {
    std::vector<std::string> out;
    for (const auto& c : cells)
        if (std::find(out.begin(), out.end(), c.attacker) == out.end()) out.push_back(c.attacker);
    return out;
}

std::string AttackReport::to_csv() const {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "attribute,attacker,representation,accuracy_mean,accuracy_std,suppression_vs_original,"
           "suppression_vs_positive,fold_accuracies\n";
    for (const auto& c : cells) {
        out << attribute << ',' << c.attacker << ',' << to_string(c.representation) << ',' << c.accuracy.mean << ','
            << c.accuracy.stddev << ',' << suppression(c.attacker, Representation::original, c.representation) << ','
            << suppression(c.attacker, Representation::positive, c.representation) << ',';
        for (std::size_t f = 0; f < c.fold_accuracy.size(); ++f) out << (f ? ";" : "") << c.fold_accuracy[f];
        out << '\n';
    }
    return out.str();
}

std::string AttackReport::to_table() const {
    std::ostringstream out;
    out << "attribute '" << attribute << "', " << folds << " folds\n";
    out << std::left << std::setw(10) << "attacker" << std::setw(20) << "original" << std::setw(20) << "positive"
        << std::setw(20) << "negative" << "suppression(neg vs orig / vs pos)\n";
    out << std::fixed << std::setprecision(3);
    for (const auto& a : attackers()) {
        out << std::setw(10) << a;
        for (auto r : {Representation::original, Representation::positive, Representation::negative}) {
            const auto& c = cell(a, r);
            std::ostringstream s;
            s << std::fixed << std::setprecision(3) << c.accuracy.mean << " +- " << c.accuracy.stddev;
            out << std::setw(20) << s.str();
        }
        out << suppression(a, Representation::original, Representation::negative) << " / "
            << suppression(a, Representation::positive, Representation::negative) << '\n';
    }
    return out.str();
}

AttackReport run_attack(std::span<const Embedding> embeddings, const PipelineConfig& pipeline,
                        const std::string& attribute, const DatasetSplit& split, const AttackConfig& config) {
    if (config.attackers.empty()) throw ValidationError("no attackers configured");
    for (const auto& e : embeddings) attribute_of(e, attribute);

    AttackReport report;
    report.attribute = attribute;
    report.folds = split.fold_count;
    for (const auto& a : config.attackers)
        for (auto r : {Representation::original, Representation::positive, Representation::negative})
            report.cells.push_back({a.name, r, {}, {}});

    for (std::size_t fold = 0; fold < split.fold_count; ++fold) {
        auto part = partition_fold(embeddings, split, fold);
        if (part.train.empty() || part.test.empty())
            throw ValidationError("fold " + std::to_string(fold) + " has an empty train or test portion");
        const auto pipe = Pipeline::build(part.train, pipeline.for_fold(fold));
        auto rng = RandomSource::seeded(pipeline.negation_seed(fold));

        const auto pos_train = pipe.positives(part.train);
        const auto pos_test = pipe.positives(part.test);
        std::vector<NegativeTemplate> neg_train, neg_test;
        for (const auto& t : pos_train) neg_train.push_back(negate(t, rng));
        for (const auto& t : pos_test) neg_test.push_back(negate(t, rng));

        std::array<AttackDataset, 3> train_sets = {
            attack_dataset_from_embeddings(part.train, attribute),
            attack_dataset_from_templates(std::span<const PositiveTemplate>(pos_train), part.train, attribute),
            attack_dataset_from_templates(std::span<const NegativeTemplate>(neg_train), part.train, attribute)};
        std::array<AttackDataset, 3> test_sets = {
            attack_dataset_from_embeddings(part.test, attribute),
            attack_dataset_from_templates(std::span<const PositiveTemplate>(pos_test), part.test, attribute),
            attack_dataset_from_templates(std::span<const NegativeTemplate>(neg_test), part.test, attribute)};

        const auto classes = sorted_classes(train_sets[0].labels);
        if (classes.size() < 2)
            throw ValidationError("fold " + std::to_string(fold) + ": training portion has a single class");
        const auto test_classes = sorted_classes(test_sets[0].labels);
        for (const auto& c : classes)
            if (!std::binary_search(test_classes.begin(), test_classes.end(), c))
                throw ValidationError("fold " + std::to_string(fold) + " is too small: class '" + c +
                                      "' is missing from its test portion");

        // Class-balanced test rows, shared by all representations.
        std::vector<std::size_t> rows;
        if (config.balance_test) {
            std::mt19937_64 balance_rng(derive_seed(config.seed, 0xba1 + fold));
            std::map<std::string, std::vector<std::size_t>> by_class;
            for (std::size_t i = 0; i < test_sets[0].size(); ++i) by_class[test_sets[0].labels[i]].push_back(i);
            std::size_t smallest = std::numeric_limits<std::size_t>::max();
            for (const auto& [c, idx] : by_class) smallest = std::min(smallest, idx.size());
            for (auto& [c, idx] : by_class) {
                std::vector<std::size_t> picked;
                std::sample(idx.begin(), idx.end(), std::back_inserter(picked), smallest, balance_rng);
                rows.insert(rows.end(), picked.begin(), picked.end());
            }
            std::sort(rows.begin(), rows.end());
        } else {
            rows.resize(test_sets[0].size());
            std::iota(rows.begin(), rows.end(), 0);
        }

        for (auto& cell : report.cells) {
            const auto r = static_cast<std::size_t>(cell.representation);
            const auto& named = *std::find_if(config.attackers.begin(), config.attackers.end(),
                                              [&](const NamedAttacker& a) { return a.name == cell.attacker; });
            auto attacker = named.make();
            attacker->fit(train_sets[r]);
            const auto test = test_sets[r].subset(rows);
            cell.fold_accuracy.push_back(balanced_accuracy(attacker->predict(test), test.labels, classes));
        }
    }
    for (auto& cell : report.cells) cell.accuracy = mean_std(cell.fold_accuracy);
    return report;
}

}  // namespace nfr
