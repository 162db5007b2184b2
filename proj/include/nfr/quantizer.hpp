#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nfr/types.hpp"

namespace nfr {

/// Per-feature quantile bins. Feature j has k-1 non-decreasing cut points;
/// a value's label is 1 + the number of cut points strictly below it, so
/// values equal to an edge fall into the lower bin.
class Quantizer {
public:
    /// `edges` is feature-major: edges[j * (k-1) + m] is cut point m of
    /// feature j.
    Quantizer(int k, std::size_t length, std::vector<double> edges);

    int k() const { return k_; }
    std::size_t length() const { return length_; }
    std::span<const double> edges(std::size_t feature) const;
    const Digest& fingerprint() const { return fingerprint_; }

    Label label(std::size_t feature, double value) const;
    PositiveTemplate discretize(const EnlargedEmbedding& v) const;
    PositiveTemplate discretize(std::span<const double> v) const;

    std::string serialize() const;
    static Quantizer deserialize(const std::string& data, const std::string& name = "quantizer");
    void save(const std::filesystem::path& path) const;
    static Quantizer load(const std::filesystem::path& path);

private:
    std::string serialize_body() const;

    int k_;
    std::size_t length_;
    std::vector<double> edges_;
    Digest fingerprint_{};
};

/// Linear-interpolation quantile of sorted data (numpy's default).
double quantile_sorted(std::span<const double> sorted, double q);

/// Fits edge m of feature j at the (m/k)-quantile of that feature's
/// training values.
Quantizer fit_quantizer(std::span<const EnlargedEmbedding> train, int k);

/// Same, with samples as columns of an L x n matrix.
Quantizer fit_quantizer(const Eigen::MatrixXd& train, int k);

}  // namespace nfr
