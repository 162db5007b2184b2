#include "nfr/types.hpp"

#include <algorithm>

#include "nfr/error.hpp"

namespace nfr {

std::string to_hex(const Digest& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(digest.size() * 2);
    for (auto b : digest) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

bool is_zero(const Digest& digest) {
    return std::all_of(digest.begin(), digest.end(), [](auto b) { return b == 0; });
}

Gallery::Gallery(GalleryMetadata metadata) : metadata_(metadata) {
    if (metadata_.k < 2 || metadata_.k > kMaxBins)
        throw ValidationError("gallery k must lie in [2, 255], got " + std::to_string(metadata_.k));
}

const NegativeTemplate& Gallery::at(const std::string& subject_id) const {
    auto it = entries_.find(subject_id);
    if (it == entries_.end()) throw ValidationError("subject '" + subject_id + "' is not enrolled");
    return it->second;
}

void Gallery::enroll(NegativeTemplate t) {
    if (t.k != metadata_.k || t.length() != metadata_.length)
        throw ValidationError("template (k=" + std::to_string(t.k) + ", L=" + std::to_string(t.length()) +
                              ") does not match gallery (k=" + std::to_string(metadata_.k) +
                              ", L=" + std::to_string(metadata_.length) + ")");
    auto id = t.subject_id;
    entries_.insert_or_assign(std::move(id), std::move(t));
}

std::vector<std::string> DatasetSplit::subjects_in(std::size_t fold) const {
    std::vector<std::string> out;
    for (const auto& [subject, f] : fold_of)
        if (f == fold) out.push_back(subject);
    return out;
}

bool DatasetSplit::in_fold(const std::string& subject_id, std::size_t fold) const {
    auto it = fold_of.find(subject_id);
    return it != fold_of.end() && it->second == fold;
}

}  // namespace nfr
