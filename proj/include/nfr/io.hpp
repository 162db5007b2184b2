#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "nfr/types.hpp"

namespace nfr {

enum class EmbeddingFormat { csv, binary };

/// Picks the format from the extension: `.csv` is CSV, anything else binary.
EmbeddingFormat format_from_path(const std::filesystem::path& path);

/// Reads embeddings and unit-normalizes them. Vectors whose norm is already
/// within 1e-6 of one are kept as stored, so load(save(x)) is bit-exact for
/// normalized data. Throws ParseError (with line or byte offset) on
/// malformed input, dimension mismatch, or non-finite values.
std::vector<Embedding> load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
std::vector<Embedding> load_embeddings(const std::filesystem::path& path);

/// Writes embeddings. Every record must share the attribute names of the
/// first one when writing CSV.
void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path,
                     EmbeddingFormat format);
void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path);

/// Scales `values` to unit L2 norm in place; zero vectors are left alone.
void normalize_unit(std::vector<float>& values);

void save_gallery(const Gallery& gallery, const std::filesystem::path& path);
Gallery load_gallery(const std::filesystem::path& path);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace nfr
