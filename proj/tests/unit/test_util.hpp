#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nfr/types.hpp"

namespace nfr::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("nfr_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline PositiveTemplate random_positive(std::size_t length, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> draw(1, k);
    PositiveTemplate t;
    t.k = k;
    t.labels.resize(length);
    for (auto& l : t.labels) l = static_cast<Label>(draw(rng));
    return t;
}

}  // namespace nfr::test
