#include "gr2tex/embedding.hpp"

#include <cmath>

#include <json.hpp>

#include "gr2tex/text_util.hpp"

namespace gr2tex {
namespace {

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (const char c : trim(text)) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw RetrievalError("embedding vector must have a positive dimension");
    for (const double v : values_) {
        if (!std::isfinite(v)) throw RetrievalError("embedding vector contains a non-finite value");
    }
}

std::vector<std::string> OfflineTrigramProvider::trigrams(std::string_view text) {
    const std::string padded = "##" + collapse_whitespace(text) + "##";
    const auto chars = utf8_chars(padded);
    std::vector<std::string> out;
    for (std::size_t i = 0; i + 3 <= chars.size(); ++i) {
        out.push_back(std::string(chars[i]) + std::string(chars[i + 1]) + std::string(chars[i + 2]));
    }
    return out;
}

std::size_t OfflineTrigramProvider::bucket(std::string_view trigram_utf8) {
    return static_cast<std::size_t>(fnv1a64(trigram_utf8) % kDim);
}

EmbeddingVector OfflineTrigramProvider::embed(std::string_view text) const {
    if (collapse_whitespace(text).empty()) {
        throw RetrievalError("cannot embed empty text");
    }
    std::vector<double> counts(kDim, 0.0);
    for (const auto& gram : trigrams(text)) counts[bucket(gram)] += 1.0;
    double norm = 0.0;
    for (const double c : counts) norm += c * c;
    norm = std::sqrt(norm);
    for (double& c : counts) c /= norm;
    return EmbeddingVector(std::move(counts));
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config, std::shared_ptr<HttpTransport> transport,
                                                 Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (config_.base_url.empty()) throw RetrievalError("remote embedding provider needs a base URL");
    if (config_.model.empty()) throw RetrievalError("remote embedding provider needs a model name");
}

EmbeddingVector RemoteEmbeddingProvider::embed(std::string_view text) const {
    if (trim(text).empty()) throw RetrievalError("cannot embed empty text");
    HttpRequest request;
    request.url = config_.base_url + "/embeddings";
    request.timeout = config_.timeout;
    if (!config_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    request.body = nlohmann::json{{"model", config_.model}, {"input", std::string(text)}}.dump();

    HttpResponse response;
    try {
        response = post_with_retries(*transport_, request, config_.retry, sleep_, "embedding provider");
    } catch (const ClientError& ex) {
        throw ClientError(ex.kind(), "[" + provider_id() + "] " + ex.what(), ex.status(), ex.attempts());
    }
    std::vector<double> values;
    try {
        const auto body = nlohmann::json::parse(response.body);
        values = body.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
        throw ClientError(ClientErrorKind::response, "[" + provider_id() + "] malformed embedding response: " + ex.what());
    }
    if (config_.dim != 0 && values.size() != config_.dim) {
        throw RetrievalError("[" + provider_id() + "] returned dim " + std::to_string(values.size()) +
                             ", expected " + std::to_string(config_.dim));
    }
    return EmbeddingVector(std::move(values));
}

std::shared_ptr<const EmbeddingProvider> make_embedding_provider(std::string_view name) {
    if (name == "offline" || name == OfflineTrigramProvider::kProviderId) {
        return std::make_shared<OfflineTrigramProvider>();
    }
    if (name == "remote" || name.starts_with("remote:")) {
        RemoteEmbeddingConfig config;
        config.base_url = env_or("GR2TEX_EMBEDDING_BASE_URL", "https://api.openai.com/v1");
        config.model = name.starts_with("remote:") ? std::string(name.substr(7))
                                                   : env_or("GR2TEX_EMBEDDING_MODEL", "text-embedding-3-small");
        config.api_key = env_or("GR2TEX_EMBEDDING_API_KEY");
        const auto dim = env_or("GR2TEX_EMBEDDING_DIM", "0");
        try {
            config.dim = std::stoul(dim);
        } catch (const std::exception&) {
            throw RetrievalError("GR2TEX_EMBEDDING_DIM is not a number: '" + dim + "'");
        }
        return std::make_shared<RemoteEmbeddingProvider>(std::move(config));
    }
    throw RetrievalError("unknown embedding provider '" + std::string(name) + "' (expected offline or remote)");
}

}  // namespace gr2tex
