#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nfr {

/// Bin label in {1..k}. One octet per label, so k is capped at 255.
using Label = std::uint8_t;

inline constexpr int kMaxBins = 255;

/// SHA-256 content hash used to tie galleries to the model and quantizer
/// that produced them.
using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(const Digest& digest);
bool is_zero(const Digest& digest);

/// One face capture's feature vector. Values are unit L2-normalized once
/// loaded or generated.
struct Embedding {
    std::string subject_id;
    std::string capture_id;
    std::vector<float> values;
    std::map<std::string, std::string> attributes;

    std::size_t dimension() const { return values.size(); }
    bool operator==(const Embedding&) const = default;
};

/// Output of the enlargement network; every entry lies in [-1, 1].
struct EnlargedEmbedding {
    std::vector<double> values;

    std::size_t length() const { return values.size(); }
};

/// Discretized enlarged embedding, labels in {1..k}.
struct PositiveTemplate {
    std::vector<Label> labels;
    int k = 0;
    std::string subject_id;
    std::string capture_id;

    std::size_t length() const { return labels.size(); }
    bool operator==(const PositiveTemplate&) const = default;
};

/// Per-position complement of a positive template. This is the only
/// representation a gallery stores.
struct NegativeTemplate {
    std::vector<Label> labels;
    int k = 0;
    std::string subject_id;

    std::size_t length() const { return labels.size(); }
    bool operator==(const NegativeTemplate&) const = default;
};

enum class SeedPolicy : std::uint8_t { os_entropy = 0, seeded = 1 };

struct GalleryMetadata {
    int k = 0;
    std::uint32_t length = 0;
    Digest quantizer_fingerprint{};
    Digest model_fingerprint{};
    std::uint16_t format_version = 1;
    SeedPolicy seed_policy = SeedPolicy::os_entropy;

    bool operator==(const GalleryMetadata&) const = default;
};

/// Enrolled negative templates keyed by subject id.
class Gallery {
public:
    Gallery() = default;
    explicit Gallery(GalleryMetadata metadata);

    const GalleryMetadata& metadata() const { return metadata_; }
    const std::map<std::string, NegativeTemplate>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& subject_id) const { return entries_.contains(subject_id); }
    const NegativeTemplate& at(const std::string& subject_id) const;

    /// Inserts or replaces the subject's template. Throws ValidationError
    /// when k or L disagree with the metadata.
    void enroll(NegativeTemplate t);

    bool operator==(const Gallery&) const = default;

private:
    GalleryMetadata metadata_;
    std::map<std::string, NegativeTemplate> entries_;
};

/// Subject-to-fold assignment for cross-validation.
struct DatasetSplit {
    std::size_t fold_count = 0;
    std::map<std::string, std::size_t> fold_of;

    std::vector<std::string> subjects_in(std::size_t fold) const;
    bool in_fold(const std::string& subject_id, std::size_t fold) const;
};

}  // namespace nfr
