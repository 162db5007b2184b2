#include "nfr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "nfr/error.hpp"
#include "nfr/io.hpp"
#include "nfr/random.hpp"

namespace nfr {
namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void validate(const SynthConfig& c) {
    if (c.subjects < 2) throw ValidationError("synthetic data needs at least two subjects");
    if (c.captures < 1) throw ValidationError("captures per subject must be at least 1");
    if (c.dimension < 1) throw ValidationError("dimension must be at least 1");
    if (!(c.sigma_within > 0.0) || !(c.sigma_between > 0.0)) throw ValidationError("sigma values must be positive");
    if (!(c.attribute_scale >= 0.0)) throw ValidationError("attribute scale must be non-negative");
    std::size_t directions = 0;
    for (const auto& a : c.attributes) {
        if (a.name.empty()) throw ValidationError("attribute name must not be empty");
        if (a.classes < 2) throw ValidationError("attribute '" + a.name + "' needs at least two classes");
        if (!(a.signal >= 0.0 && a.signal <= 1.0)) throw ValidationError("attribute signal must lie in [0, 1]");
        directions += a.classes;
    }
    if (directions > c.dimension) throw ValidationError("more attribute directions than embedding dimensions");
}

std::string subject_name(std::size_t s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%04zu", s);
    return buf;
}

}  // namespace

SynthConfig SynthConfig::standard(std::uint64_t seed) {
    SynthConfig c;
    c.attributes = {{"a0", 2, 0.8}};
    c.seed = seed;
    return c;
}

std::vector<Embedding> generate(const SynthConfig& config) {
    validate(config);
    const auto d = config.dimension;

    // Class directions, Gram-Schmidt orthonormalized across all attributes.
    std::mt19937_64 dir_rng(derive_seed(config.seed, 0xd1));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<Vec>> directions;
    std::vector<Vec> basis;
    for (const auto& a : config.attributes) {
        std::vector<Vec> dirs;
        for (std::size_t c = 0; c < a.classes; ++c) {
            Vec v(d);
            double norm = 0.0;
            do {
                for (auto& x : v) x = normal(dir_rng);
                for (const auto& b : basis) {
                    const double p = dot(v, b);
                    for (std::size_t i = 0; i < d; ++i) v[i] -= p * b[i];
                }
                norm = std::sqrt(dot(v, v));
            } while (norm < 1e-8);
            for (auto& x : v) x /= norm;
            basis.push_back(v);
            dirs.push_back(std::move(v));
        }
        directions.push_back(std::move(dirs));
    }

    // Balanced class assignment per attribute.
    std::vector<std::vector<std::size_t>> classes(config.attributes.size());
    std::mt19937_64 class_rng(derive_seed(config.seed, 0xc1));
    for (std::size_t a = 0; a < config.attributes.size(); ++a) {
        auto& cls = classes[a];
        cls.resize(config.subjects);
        for (std::size_t s = 0; s < config.subjects; ++s) cls[s] = s % config.attributes[a].classes;
        std::shuffle(cls.begin(), cls.end(), class_rng);
    }

    std::vector<Embedding> out;
    out.reserve(config.subjects * config.captures);
    for (std::size_t s = 0; s < config.subjects; ++s) {
        std::mt19937_64 rng(derive_seed(config.seed, 0x10000 + s));
        std::normal_distribution<double> noise(0.0, 1.0);
        Vec mean(d);
        for (auto& x : mean) x = config.sigma_between * noise(rng);
        std::map<std::string, std::string> attrs;
        for (std::size_t a = 0; a < config.attributes.size(); ++a) {
            const auto& spec = config.attributes[a];
            const auto c = classes[a][s];
            const double scale = spec.signal * config.attribute_scale * config.sigma_between;
            for (std::size_t i = 0; i < d; ++i) mean[i] += scale * directions[a][c][i];
            attrs[spec.name] = std::to_string(c);
        }
        const auto id = subject_name(s);
        for (std::size_t c = 0; c < config.captures; ++c) {
            Embedding e;
            e.subject_id = id;
            e.capture_id = id + "_c" + std::to_string(c);
            e.attributes = attrs;
            e.values.resize(d);
            for (std::size_t i = 0; i < d; ++i)
                e.values[i] = static_cast<float>(mean[i] + config.sigma_within * noise(rng));
            normalize_unit(e.values);
            out.push_back(std::move(e));
        }
    }
    return out;
}

}  // namespace nfr
