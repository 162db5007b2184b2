#include "nfr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "binary.hpp"
#include "nfr/error.hpp"

namespace nfr {
namespace {

constexpr std::string_view kEmbeddingMagic = "NEGT";
constexpr std::string_view kGalleryMagic = "NGAL";
constexpr std::uint16_t kEmbeddingVersion = 1;
constexpr std::uint16_t kGalleryVersion = 1;
constexpr std::string_view kAttrPrefix = "attr:";

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

void check_finite(const Embedding& e, const std::string& where) {
    for (float v : e.values)
        if (!std::isfinite(v)) throw ParseError(where + ": non-finite value in record '" + e.capture_id + "'");
}

std::vector<Embedding> parse_csv(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(name + ": missing header line");
    auto header = split_commas(trim(line));
    if (header.size() < 2 || trim(header[0]) != "subject_id" || trim(header[1]) != "capture_id")
        throw ParseError(name + ":1: header must start with subject_id,capture_id");

    std::vector<std::string> attr_names;
    std::size_t col = 2;
    for (; col < header.size() && trim(header[col]).starts_with(kAttrPrefix); ++col)
        attr_names.emplace_back(trim(header[col]).substr(kAttrPrefix.size()));
    const std::size_t first_feature = col;
    const std::size_t d = header.size() - first_feature;

    std::vector<Embedding> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto row = trim(line);
        if (row.empty()) continue;
        auto cells = split_commas(row);
        const auto where = name + ":" + std::to_string(line_no);
        if (cells.size() < first_feature) throw ParseError(where + ": too few columns");
        Embedding e;
        e.subject_id = std::string(trim(cells[0]));
        e.capture_id = std::string(trim(cells[1]));
        if (cells.size() - first_feature != d)
            throw ParseError(where + ": dimension mismatch in record '" + e.capture_id + "': expected " +
                             std::to_string(d) + " values, got " + std::to_string(cells.size() - first_feature));
        for (std::size_t a = 0; a < attr_names.size(); ++a)
            e.attributes[attr_names[a]] = std::string(trim(cells[2 + a]));
        e.values.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            auto cell = trim(cells[first_feature + j]);
            float v = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw ParseError(where + ": cannot parse value '" + std::string(cell) + "' in column " +
                                 std::to_string(first_feature + j + 1));
            e.values[j] = v;
        }
        check_finite(e, where);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Embedding> parse_binary(const std::string& data, const std::string& name) {
    binary::Reader r(data, name);
    if (r.bytes(4) != kEmbeddingMagic) r.fail("bad magic, expected NEGT");
    auto version = r.u16();
    if (version != kEmbeddingVersion) r.fail("unsupported version " + std::to_string(version));
    auto d = r.u32();
    auto count = r.u64();
    std::vector<Embedding> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t i = 0; i < count; ++i) {
        Embedding e;
        e.subject_id = r.str();
        e.capture_id = r.str();
        auto attrs = r.u32();
        for (std::uint32_t a = 0; a < attrs; ++a) {
            auto key = r.str();
            e.attributes[key] = r.str();
        }
        e.values.resize(d);
        for (auto& v : e.values) v = r.f32();
        check_finite(e, name + " record " + std::to_string(i));
        out.push_back(std::move(e));
    }
    if (!r.at_end()) r.fail("trailing bytes after " + std::to_string(count) + " records");
    return out;
}

std::string format_float(float v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void check_csv_field(const std::string& s) {
    if (s.find_first_of(",\n\r") != std::string::npos)
        throw ValidationError("field '" + s + "' cannot be written to CSV (contains a separator)");
}

std::string write_csv(std::span<const Embedding> embeddings) {
    std::vector<std::string> attr_names;
    std::size_t d = 0;
    if (!embeddings.empty()) {
        for (const auto& [k, v] : embeddings.front().attributes) attr_names.push_back(k);
        d = embeddings.front().dimension();
    }
    std::string out = "subject_id,capture_id";
    for (const auto& a : attr_names) {
        check_csv_field(a);
        out += ",attr:" + a;
    }
    for (std::size_t j = 0; j < d; ++j) out += ",f" + std::to_string(j);
    out += '\n';
    for (const auto& e : embeddings) {
        if (e.dimension() != d) throw ValidationError("dimension mismatch in record '" + e.capture_id + "'");
        if (e.attributes.size() != attr_names.size())
            throw ValidationError("record '" + e.capture_id + "' has a different attribute set");
        check_csv_field(e.subject_id);
        check_csv_field(e.capture_id);
        out += e.subject_id + "," + e.capture_id;
        for (const auto& a : attr_names) {
            auto it = e.attributes.find(a);
            if (it == e.attributes.end())
                throw ValidationError("record '" + e.capture_id + "' lacks attribute '" + a + "'");
            check_csv_field(it->second);
            out += "," + it->second;
        }
        for (float v : e.values) out += "," + format_float(v);
        out += '\n';
    }
    return out;
}

std::string write_binary(std::span<const Embedding> embeddings) {
    binary::Writer w;
    w.bytes(kEmbeddingMagic);
    w.u16(kEmbeddingVersion);
    const std::size_t d = embeddings.empty() ? 0 : embeddings.front().dimension();
    w.u32(static_cast<std::uint32_t>(d));
    w.u64(embeddings.size());
    for (const auto& e : embeddings) {
        if (e.dimension() != d) throw ValidationError("dimension mismatch in record '" + e.capture_id + "'");
        w.str(e.subject_id);
        w.str(e.capture_id);
        w.u32(static_cast<std::uint32_t>(e.attributes.size()));
        for (const auto& [k, v] : e.attributes) {
            w.str(k);
            w.str(v);
        }
        for (float v : e.values) w.f32(v);
    }
    return w.take();
}

}  // namespace

EmbeddingFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? EmbeddingFormat::csv : EmbeddingFormat::binary;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("error while writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void normalize_unit(std::vector<float>& values) {
    double sq = 0;
    for (float v : values) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (norm == 0.0 || std::abs(norm - 1.0) < 1e-6) return;
    for (auto& v : values) v = static_cast<float>(v / norm);
}

std::vector<Embedding> load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
    const auto data = read_file(path);
    auto out = format == EmbeddingFormat::csv ? parse_csv(data, path.string()) : parse_binary(data, path.string());
    for (auto& e : out) normalize_unit(e.values);
    return out;
}

std::vector<Embedding> load_embeddings(const std::filesystem::path& path) {
    return load_embeddings(path, format_from_path(path));
}

void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path,
                     EmbeddingFormat format) {
    write_file_atomic(path, format == EmbeddingFormat::csv ? write_csv(embeddings) : write_binary(embeddings));
}

void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path) {
    save_embeddings(embeddings, path, format_from_path(path));
}

// Gallery layout: magic, u16 version, u8 k, u32 L, quantizer digest, model
// digest, u8 seed policy, then entries (length-prefixed subject id + L
// octets) until end of file.
void save_gallery(const Gallery& gallery, const std::filesystem::path& path) {
    const auto& m = gallery.metadata();
    if (is_zero(m.quantizer_fingerprint) || is_zero(m.model_fingerprint))
        throw ValidationError("gallery metadata lacks a quantizer or model fingerprint");
    binary::Writer w;
    w.bytes(kGalleryMagic);
    w.u16(kGalleryVersion);
    w.u8(static_cast<std::uint8_t>(m.k));
    w.u32(m.length);
    w.digest(m.quantizer_fingerprint);
    w.digest(m.model_fingerprint);
    w.u8(static_cast<std::uint8_t>(m.seed_policy));
    for (const auto& [id, t] : gallery.entries()) {
        w.str(id);
        w.bytes(std::string_view(reinterpret_cast<const char*>(t.labels.data()), t.labels.size()));
    }
    write_file_atomic(path, w.take());
}

Gallery load_gallery(const std::filesystem::path& path) {
    const auto data = read_file(path);
    binary::Reader r(data, path.string());
    if (r.bytes(4) != kGalleryMagic) r.fail("bad magic, expected NGAL");
    GalleryMetadata m;
    m.format_version = r.u16();
    if (m.format_version != kGalleryVersion)
        r.fail("version mismatch: file has " + std::to_string(m.format_version) + ", reader supports " +
               std::to_string(kGalleryVersion));
    m.k = r.u8();
    m.length = r.u32();
    if (r.remaining() < 2 * sizeof(Digest)) r.fail("fingerprint field absent");
    m.quantizer_fingerprint = r.digest();
    m.model_fingerprint = r.digest();
    if (is_zero(m.quantizer_fingerprint) || is_zero(m.model_fingerprint)) r.fail("fingerprint field absent");
    auto policy = r.u8();
    if (policy > 1) r.fail("unknown seed policy " + std::to_string(policy));
    m.seed_policy = static_cast<SeedPolicy>(policy);

    Gallery g(m);
    while (!r.at_end()) {
        NegativeTemplate t;
        t.k = m.k;
        t.subject_id = r.str();
        if (r.remaining() < m.length)
            r.fail("corrupted entry for subject '" + t.subject_id + "': expected " + std::to_string(m.length) +
                   " labels, found " + std::to_string(r.remaining()));
        auto labels = r.bytes(m.length);
        t.labels.assign(labels.begin(), labels.end());
        for (auto l : t.labels)
            if (l < 1 || l > m.k) r.fail("corrupted entry for subject '" + t.subject_id + "': label out of range");
        if (g.contains(t.subject_id)) r.fail("duplicate subject '" + t.subject_id + "'");
        g.enroll(std::move(t));
    }
    return g;
}

}  // namespace nfr
