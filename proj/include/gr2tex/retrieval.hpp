#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gr2tex/dataset.hpp"
#include "gr2tex/embedding.hpp"

namespace gr2tex {

enum class Measure { cosine, euclidean, manhattan };

std::string_view to_string(Measure measure);
// Throws RetrievalError naming the allowed values.
Measure parse_measure(std::string_view name);
// Cosine is a similarity (higher is better); the others are distances.
bool is_similarity(Measure measure);

double cosine(const EmbeddingVector& u, const EmbeddingVector& v);
double euclidean(const EmbeddingVector& u, const EmbeddingVector& v);
double manhattan(const EmbeddingVector& u, const EmbeddingVector& v);
double score(Measure measure, const EmbeddingVector& u, const EmbeddingVector& v);

struct IndexEntry {
    std::string pair_id;
    EmbeddingVector vector;
};

class Index {
public:
    Index(std::string provider_id, std::vector<IndexEntry> entries);

    const std::string& provider_id() const { return provider_id_; }
    std::size_t dim() const { return entries_.empty() ? 0 : entries_.front().vector.dim(); }
    std::size_t size() const { return entries_.size(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }

private:
    std::string provider_id_;
    std::vector<IndexEntry> entries_;
};

/// Embeds each pair's nl_text in input order. Any embedding failure aborts
/// with the failing pair id in the message.
Index build_index(const std::vector<EquationPair>& pairs, const EmbeddingProvider& provider);

// {"provider_id": ..., "dim": ..., "entries": [{"id": ..., "values": [...]}]}
std::string index_to_json(const Index& index);
Index index_from_json(std::string_view json_text);
void save_index(const Index& index, const std::filesystem::path& path);
Index load_index(const std::filesystem::path& path);

struct RetrievalResult {
    std::string pair_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

struct QueryResult {
    std::vector<RetrievalResult> results;
    bool truncated = false;  // k exceeded the index size
};

/// Scores are ranked after rounding to kTieResolution so that values equal
/// up to floating-point noise count as ties; ties go to the earlier entry.
inline constexpr double kTieResolution = 1e-12;
double ranking_key(Measure measure, double score);

/// Exhaustive top-k scan. `exclude_id`, when set, is skipped entirely (the
/// harness uses it to keep a query's own pair out of its examples).
QueryResult query(const Index& index, const EmbeddingVector& query_vector, std::size_t k, Measure measure,
                  std::optional<std::string_view> exclude_id = std::nullopt);

/// Embeds `text` with `provider` (which must match the index's provider) and
/// runs the vector query.
QueryResult query(const Index& index, const EmbeddingProvider& provider, std::string_view text, std::size_t k,
                  Measure measure, std::optional<std::string_view> exclude_id = std::nullopt);

}  // namespace gr2tex
