#include "gr2tex/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "gr2tex/text_util.hpp"

namespace gr2tex {
namespace {

void require_same_dim(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw RetrievalError("dimension mismatch: " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
    }
}

}  // namespace

std::string_view to_string(Measure measure) {
    switch (measure) {
        case Measure::cosine: return "cosine";
        case Measure::euclidean: return "euclidean";
        case Measure::manhattan: return "manhattan";
    }
    return "cosine";
}

Measure parse_measure(std::string_view name) {
    if (name == "cosine") return Measure::cosine;
    if (name == "euclidean") return Measure::euclidean;
    if (name == "manhattan") return Measure::manhattan;
    throw RetrievalError("unknown measure '" + std::string(name) + "' (allowed: cosine, euclidean, manhattan)");
}

bool is_similarity(Measure measure) { return measure == Measure::cosine; }

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    require_same_dim(u, v);
    const auto a = u.values();
    const auto b = v.values();
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw RetrievalError("cosine similarity is undefined for a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double euclidean(const EmbeddingVector& u, const EmbeddingVector& v) {
    require_same_dim(u, v);
    const auto a = u.values();
    const auto b = v.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double manhattan(const EmbeddingVector& u, const EmbeddingVector& v) {
    require_same_dim(u, v);
    const auto a = u.values();
    const auto b = v.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum;
}

double score(Measure measure, const EmbeddingVector& u, const EmbeddingVector& v) {
    switch (measure) {
        case Measure::cosine: return cosine(u, v);
        case Measure::euclidean: return euclidean(u, v);
        case Measure::manhattan: return manhattan(u, v);
    }
    throw RetrievalError("unknown measure");
}

Index::Index(std::string provider_id, std::vector<IndexEntry> entries)
    : provider_id_(std::move(provider_id)), entries_(std::move(entries)) {
    if (entries_.empty()) throw RetrievalError("an index needs at least one entry");
    std::set<std::string, std::less<>> ids;
    for (const auto& e : entries_) {
        if (!ids.insert(e.pair_id).second) throw RetrievalError("duplicate pair id '" + e.pair_id + "' in index");
        if (e.vector.dim() != entries_.front().vector.dim()) {
            throw RetrievalError("entry '" + e.pair_id + "' has dim " + std::to_string(e.vector.dim()) +
                                 ", index dim is " + std::to_string(entries_.front().vector.dim()));
        }
    }
}

Index build_index(const std::vector<EquationPair>& pairs, const EmbeddingProvider& provider) {
    if (pairs.empty()) throw RetrievalError("cannot build an index from zero pairs");
    std::set<std::string, std::less<>> ids;
    std::vector<IndexEntry> entries;
    entries.reserve(pairs.size());
    for (const auto& pair : pairs) {
        if (!ids.insert(pair.id).second) throw RetrievalError("duplicate pair id '" + pair.id + "'");
        try {
            entries.push_back({pair.id, provider.embed(pair.nl_text)});
        } catch (const ClientError& ex) {
            throw ClientError(ex.kind(), "embedding pair '" + pair.id + "' failed: " + ex.what(), ex.status(),
                              ex.attempts());
        } catch (const std::exception& ex) {
            throw RetrievalError("embedding pair '" + pair.id + "' failed: " + ex.what());
        }
    }
    return Index(provider.provider_id(), std::move(entries));
}

std::string index_to_json(const Index& index) {
    nlohmann::ordered_json j;
    j["provider_id"] = index.provider_id();
    j["dim"] = index.dim();
    auto& entries = j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : index.entries()) {
        nlohmann::ordered_json entry;
        entry["id"] = e.pair_id;
        entry["values"] = std::vector<double>(e.vector.values().begin(), e.vector.values().end());
        entries.push_back(std::move(entry));
    }
    return j.dump() + "\n";
}

Index index_from_json(std::string_view json_text) {
    try {
        const auto j = nlohmann::json::parse(json_text);
        const auto dim = j.at("dim").get<std::size_t>();
        std::vector<IndexEntry> entries;
        for (const auto& e : j.at("entries")) {
            EmbeddingVector v(e.at("values").get<std::vector<double>>());
            if (v.dim() != dim) {
                throw RetrievalError("index entry '" + e.at("id").get<std::string>() + "' does not match dim " +
                                     std::to_string(dim));
            }
            entries.push_back({e.at("id").get<std::string>(), std::move(v)});
        }
        return Index(j.at("provider_id").get<std::string>(), std::move(entries));
    } catch (const nlohmann::json::exception& ex) {
        throw RetrievalError(std::string("malformed index file: ") + ex.what());
    }
}

void save_index(const Index& index, const std::filesystem::path& path) { write_file(path, index_to_json(index)); }

Index load_index(const std::filesystem::path& path) { return index_from_json(read_file(path)); }

double ranking_key(Measure measure, double score) {
    const double quantized = std::round(score / kTieResolution);
    return is_similarity(measure) ? -quantized : quantized;
}

QueryResult query(const Index& index, const EmbeddingVector& query_vector, std::size_t k, Measure measure,
                  std::optional<std::string_view> exclude_id) {
    if (k == 0) throw RetrievalError("k must be at least 1");
    if (query_vector.dim() != index.dim()) {
        throw RetrievalError("query dim " + std::to_string(query_vector.dim()) + " does not match index dim " +
                             std::to_string(index.dim()) + " (" + index.provider_id() + ")");
    }
    const auto& entries = index.entries();
    struct Candidate {
        double key;
        double score;
        std::size_t position;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (exclude_id && entries[i].pair_id == *exclude_id) continue;
        const double s = score(measure, query_vector, entries[i].vector);
        candidates.push_back({ranking_key(measure, s), s, i});
    }

    QueryResult out;
    out.truncated = k > candidates.size();
    const std::size_t take = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                          return a.key != b.key ? a.key < b.key : a.position < b.position;
                      });
    for (std::size_t r = 0; r < take; ++r) {
        out.results.push_back({entries[candidates[r].position].pair_id, candidates[r].score, r + 1});
    }
    return out;
}

QueryResult query(const Index& index, const EmbeddingProvider& provider, std::string_view text, std::size_t k,
                  Measure measure, std::optional<std::string_view> exclude_id) {
    if (provider.provider_id() != index.provider_id()) {
        throw RetrievalError("index was built with '" + index.provider_id() + "' but the query uses '" +
                             provider.provider_id() + "'");
    }
    return query(index, provider.embed(text), k, measure, exclude_id);
}

}  // namespace gr2tex
