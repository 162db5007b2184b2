#include "nfr/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "binary.hpp"
#include "nfr/digest.hpp"
#include "nfr/error.hpp"
#include "nfr/io.hpp"

namespace nfr {
namespace {

constexpr std::string_view kQuantizerMagic = "NQNT";
constexpr std::uint16_t kQuantizerVersion = 1;

void check_k(int k) {
    if (k < 2 || k > kMaxBins) throw ValidationError("k must lie in [2, 255], got " + std::to_string(k));
}

}  // namespace

Quantizer::Quantizer(int k, std::size_t length, std::vector<double> edges)
    : k_(k), length_(length), edges_(std::move(edges)) {
    check_k(k_);
    const auto per = static_cast<std::size_t>(k_ - 1);
    if (edges_.size() != length_ * per)
        throw ValidationError("quantizer needs " + std::to_string(length_ * per) + " edges, got " +
                              std::to_string(edges_.size()));
    for (std::size_t j = 0; j < length_; ++j) {
        auto e = this->edges(j);
        for (double x : e)
            if (!std::isfinite(x)) throw ValidationError("non-finite quantizer edge");
        if (!std::is_sorted(e.begin(), e.end()))
            throw ValidationError("quantizer edges of feature " + std::to_string(j) + " are not sorted");
    }
    fingerprint_ = sha256(serialize_body());
}

std::span<const double> Quantizer::edges(std::size_t feature) const {
    const auto per = static_cast<std::size_t>(k_ - 1);
    return std::span<const double>(edges_).subspan(feature * per, per);
}

Label Quantizer::label(std::size_t feature, double value) const {
    auto e = edges(feature);
    return static_cast<Label>(1 + (std::lower_bound(e.begin(), e.end(), value) - e.begin()));
}

PositiveTemplate Quantizer::discretize(std::span<const double> v) const {
    if (v.size() != length_)
        throw ValidationError("dimension mismatch: quantizer expects " + std::to_string(length_) +
                              " features, got " + std::to_string(v.size()));
    PositiveTemplate t;
    t.k = k_;
    t.labels.resize(length_);
    for (std::size_t j = 0; j < length_; ++j) t.labels[j] = label(j, v[j]);
    return t;
}

PositiveTemplate Quantizer::discretize(const EnlargedEmbedding& v) const { return discretize(v.values); }

std::string Quantizer::serialize_body() const {
    binary::Writer w;
    w.bytes(kQuantizerMagic);
    w.u16(kQuantizerVersion);
    w.u32(static_cast<std::uint32_t>(k_));
    w.u32(static_cast<std::uint32_t>(length_));
    for (double e : edges_) w.f64(e);
    return w.take();
}

std::string Quantizer::serialize() const {
    auto body = serialize_body();
    body.append(reinterpret_cast<const char*>(fingerprint_.data()), fingerprint_.size());
    return body;
}

Quantizer Quantizer::deserialize(const std::string& data, const std::string& name) {
    binary::Reader r(data, name);
    if (r.bytes(4) != kQuantizerMagic) r.fail("bad magic, expected NQNT");
    auto version = r.u16();
    if (version != kQuantizerVersion) r.fail("unsupported version " + std::to_string(version));
    auto k = static_cast<int>(r.u32());
    auto length = r.u32();
    if (k < 2 || k > kMaxBins) r.fail("k out of range");
    const auto count = static_cast<std::uint64_t>(length) * static_cast<std::uint64_t>(k - 1);
    if (count * 8 > r.remaining()) r.fail("truncated edges");
    std::vector<double> edges(count);
    for (auto& e : edges) e = r.f64();
    const auto body_size = r.offset();
    Digest stored = r.digest();
    if (!r.at_end()) r.fail("trailing bytes");
    if (sha256(std::string_view(data).substr(0, body_size)) != stored) r.fail("fingerprint does not match content");
    return Quantizer(k, length, std::move(edges));
}

void Quantizer::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Quantizer Quantizer::load(const std::filesystem::path& path) { return deserialize(read_file(path), path.string()); }

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("quantile of empty data");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Quantizer fit_quantizer(const Eigen::MatrixXd& train, int k) {
    check_k(k);
    if (train.cols() == 0) throw ValidationError("empty training set");
    const auto length = static_cast<std::size_t>(train.rows());
    const auto per = static_cast<std::size_t>(k - 1);
    std::vector<double> edges(length * per);
    std::vector<double> column(static_cast<std::size_t>(train.cols()));
    for (std::size_t j = 0; j < length; ++j) {
        for (Eigen::Index i = 0; i < train.cols(); ++i) column[static_cast<std::size_t>(i)] = train(static_cast<Eigen::Index>(j), i);
        std::sort(column.begin(), column.end());
        for (std::size_t m = 1; m <= per; ++m)
            edges[j * per + m - 1] = quantile_sorted(column, static_cast<double>(m) / static_cast<double>(k));
        // Interpolation can break monotonicity by one ulp; restore it.
        for (std::size_t m = 1; m < per; ++m)
            edges[j * per + m] = std::max(edges[j * per + m], edges[j * per + m - 1]);
    }
    return Quantizer(k, length, std::move(edges));
}

Quantizer fit_quantizer(std::span<const EnlargedEmbedding> train, int k) {
    check_k(k);
    if (train.empty()) throw ValidationError("empty training set");
    const auto length = train.front().length();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].length() != length) throw ValidationError("training vectors differ in length");
        for (std::size_t j = 0; j < length; ++j) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = train[i].values[j];
    }
    return fit_quantizer(m, k);
}

}  // namespace nfr
