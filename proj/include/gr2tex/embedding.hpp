#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gr2tex/http_transport.hpp"

namespace gr2tex {

class RetrievalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed-dimension real vector with finite entries.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    std::span<const double> values() const { return values_; }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string provider_id() const = 0;
    virtual std::size_t dim() const = 0;
    // Deterministic per (provider, text); empty text is an error.
    virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Hashed character-trigram term frequencies, L2-normalized.
///
/// The text is trimmed and internal whitespace runs collapse to one space.
/// It is padded as "##" + text + "##" and split into overlapping trigrams of
/// code points. Each trigram's UTF-8 bytes are hashed with 64-bit FNV-1a and
/// the hash modulo 512 selects the bucket whose count is incremented. The
/// count vector is then scaled to unit L2 norm.
class OfflineTrigramProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDim = 512;
    static constexpr std::string_view kProviderId = "offline-trigram-fnv1a-512-v1";

    std::string provider_id() const override { return std::string(kProviderId); }
    std::size_t dim() const override { return kDim; }
    EmbeddingVector embed(std::string_view text) const override;

    // Bucket index for one trigram (exposed for tests and docs).
    static std::size_t bucket(std::string_view trigram_utf8);
    static std::vector<std::string> trigrams(std::string_view text);
};

struct RemoteEmbeddingConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string model;
    std::string api_key;
    std::size_t dim = 0;  // 0 = accept whatever the first response returns
    RetryPolicy retry;
    std::chrono::milliseconds timeout{30000};
};

/// Client for an embeddings endpoint speaking {"model","input"} ->
/// {"data":[{"embedding":[...]}]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config,
                                     std::shared_ptr<HttpTransport> transport = default_transport(),
                                     Sleeper sleep = real_sleeper());

    std::string provider_id() const override { return "remote:" + config_.model; }
    std::size_t dim() const override { return config_.dim; }
    EmbeddingVector embed(std::string_view text) const override;

private:
    RemoteEmbeddingConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleep_;
};

/// "offline" (or the offline provider id) or "remote". Remote settings come
/// from GR2TEX_EMBEDDING_BASE_URL, GR2TEX_EMBEDDING_MODEL,
/// GR2TEX_EMBEDDING_API_KEY and GR2TEX_EMBEDDING_DIM. An index's
/// "remote:<model>" provider id is accepted too and pins the model.
std::shared_ptr<const EmbeddingProvider> make_embedding_provider(std::string_view name);

}  // namespace gr2tex
