#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfr/types.hpp"

namespace nfr {

/// Assigns every subject to one of `fold_count` folds. Fold sizes differ by
/// at most one subject and the assignment depends only on the subject set
/// and the seed.
DatasetSplit make_subject_disjoint_folds(std::span<const Embedding> embeddings, std::size_t fold_count,
                                         std::uint64_t seed);

/// Sorted distinct subject ids.
std::vector<std::string> distinct_subjects(std::span<const Embedding> embeddings);

/// Train/test partition of a dataset for one fold.
struct FoldPartition {
    std::vector<Embedding> train;
    std::vector<Embedding> test;
};

/// Splits by subject; throws ComputationError if any subject ends up on
/// both sides.
FoldPartition partition_fold(std::span<const Embedding> embeddings, const DatasetSplit& split,
                             std::size_t fold);

}  // namespace nfr
