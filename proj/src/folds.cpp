#include "nfr/folds.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "nfr/error.hpp"

namespace nfr {

std::vector<std::string> distinct_subjects(std::span<const Embedding> embeddings) {
    std::set<std::string> ids;
    for (const auto& e : embeddings) ids.insert(e.subject_id);
    return {ids.begin(), ids.end()};
}

DatasetSplit make_subject_disjoint_folds(std::span<const Embedding> embeddings, std::size_t fold_count,
                                         std::uint64_t seed) {
    if (fold_count < 2) throw ValidationError("fold count must be at least 2");
    auto subjects = distinct_subjects(embeddings);
    if (subjects.size() < fold_count)
        throw ValidationError("need at least " + std::to_string(fold_count) + " subjects for " +
                              std::to_string(fold_count) + " folds, got " + std::to_string(subjects.size()));

    std::mt19937_64 rng(seed);
    std::shuffle(subjects.begin(), subjects.end(), rng);

    DatasetSplit split;
    split.fold_count = fold_count;
    for (std::size_t i = 0; i < subjects.size(); ++i) split.fold_of[subjects[i]] = i % fold_count;
    return split;
}

FoldPartition partition_fold(std::span<const Embedding> embeddings, const DatasetSplit& split,
                             std::size_t fold) {
    if (fold >= split.fold_count) throw ValidationError("fold index out of range");
    FoldPartition part;
    for (const auto& e : embeddings) {
        auto it = split.fold_of.find(e.subject_id);
        if (it == split.fold_of.end())
            throw ValidationError("subject '" + e.subject_id + "' has no fold assignment");
        (it->second == fold ? part.test : part.train).push_back(e);
    }
    std::set<std::string> train_ids;
    for (const auto& e : part.train) train_ids.insert(e.subject_id);
    for (const auto& e : part.test)
        if (train_ids.contains(e.subject_id))
            throw ComputationError("fold hygiene violated: subject '" + e.subject_id + "' in train and test");
    return part;
}

}  // namespace nfr
