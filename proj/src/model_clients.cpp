#include "gr2tex/model_clients.hpp"

#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gr2tex/text_util.hpp"
#include "gr2tex/wav.hpp"

namespace gr2tex {
namespace {

std::string multipart_boundary(std::string_view payload) {
    // Deterministic per payload; collisions with the payload are checked.
    std::string boundary = "gr2tex-" + std::to_string(fnv1a64(payload));
    while (payload.find(boundary) != std::string_view::npos) boundary += "x";
    return boundary;
}

}  // namespace

void validate(const GenerationConfig& config) {
    if (config.model_name.empty()) throw std::invalid_argument("generation config needs a model name");
    if (!(config.temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    if (config.max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
    if (config.retry.retries < 0) throw std::invalid_argument("retries must be >= 0");
    if (config.timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
}

TranscriptionResult transcribe(std::string_view audio, std::string_view format, const Transcriber& client) {
    if (format != "wav") {
        throw ClientError(ClientErrorKind::format,
                          "unsupported audio format tag '" + std::string(format) +
                              "'; expected wav (PCM 16-bit, mono, 16000 Hz)");
    }
    const auto info = require_asr_wav(audio);
    TranscriptionResult result;
    result.text = client.transcribe_wav(audio);
    result.audio_duration = info.duration_seconds();
    result.empty = trim(result.text).empty();
    if (result.empty) spdlog::warn("{} returned an empty transcription", client.id());
    return result;
}

void StubTranscriber::register_audio(std::string_view wav_bytes, std::string text) {
    by_hash_[fnv1a64(wav_bytes)] = std::move(text);
}

std::string StubTranscriber::transcribe_wav(std::string_view wav_bytes) const {
    const auto it = by_hash_.find(fnv1a64(wav_bytes));
    if (it == by_hash_.end()) {
        throw ClientError(ClientErrorKind::request, "stub ASR has no transcription registered for this audio", 404);
    }
    return it->second;
}

std::string FailingTranscriber::transcribe_wav(std::string_view) const {
    throw ClientError(ClientErrorKind::transport, message_, 503);
}

RemoteTranscriber::RemoteTranscriber(RemoteAsrConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (config_.url.empty()) throw std::invalid_argument("remote ASR needs an endpoint URL");
}

std::string RemoteTranscriber::transcribe_wav(std::string_view wav_bytes) const {
    const auto boundary = multipart_boundary(wav_bytes);
    HttpRequest request;
    request.url = config_.url;
    request.timeout = config_.timeout;
    request.content_type = "multipart/form-data; boundary=" + boundary;
    if (!config_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    request.body = "--" + boundary + "\r\nContent-Disposition: form-data; name=\"" + config_.file_field +
                   "\"; filename=\"audio.wav\"\r\nContent-Type: audio/wav\r\n\r\n";
    request.body.append(wav_bytes);
    request.body += "\r\n--" + boundary + "--\r\n";

    const auto response = post_with_retries(*transport_, request, config_.retry, sleep_, "ASR service");
    try {
        return nlohmann::json::parse(response.body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw ClientError(ClientErrorKind::response, std::string("malformed ASR response: ") + ex.what(),
                          response.status);
    }
}

std::string generate(const AssembledPrompt& prompt, const GenerationConfig& config, const LlmClient& client) {
    auto text = client.complete(prompt, config);
    if (trim(text).empty()) {
        throw ClientError(ClientErrorKind::empty, client.id() + " returned an empty completion");
    }
    return text;
}

std::string EchoLastExampleLlm::complete(const AssembledPrompt& prompt, const GenerationConfig&) const {
    if (prompt.example_turns.empty()) return fallback_;
    return prompt.example_turns.back().latex;
}

NearestNeighborLlm::NearestNeighborLlm(std::shared_ptr<const Index> index, std::shared_ptr<const Dataset> dataset,
                                       std::shared_ptr<const EmbeddingProvider> provider)
    : index_(std::move(index)), dataset_(std::move(dataset)), provider_(std::move(provider)) {
    if (!index_ || !dataset_ || !provider_) {
        throw std::invalid_argument("nearest-neighbor stub needs an index, a dataset and an embedding provider");
    }
}

std::string NearestNeighborLlm::complete(const AssembledPrompt& prompt, const GenerationConfig&) const {
    const auto hits = query(*index_, *provider_, prompt.query_text, 1, Measure::cosine);
    const auto* pair = dataset_->find(hits.results.front().pair_id);
    if (pair == nullptr) {
        throw ClientError(ClientErrorKind::response,
                          "nearest-neighbor stub: '" + hits.results.front().pair_id + "' is not in the dataset");
    }
    return pair->latex;
}

std::string FailingLlm::complete(const AssembledPrompt&, const GenerationConfig&) const {
    throw ClientError(kind_, "stub LLM configured to fail", status_);
}

RemoteChatLlm::RemoteChatLlm(RemoteLlmConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (config_.base_url.empty()) throw std::invalid_argument("remote LLM needs a base URL");
}

std::string RemoteChatLlm::complete(const AssembledPrompt& prompt, const GenerationConfig& config) const {
    validate(config);
    nlohmann::json body;
    body["model"] = config.model_name;
    body["temperature"] = config.temperature;
    body["max_tokens"] = config.max_tokens;
    if (config.seed) body["seed"] = *config.seed;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : to_messages(prompt, config.placement)) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }

    HttpRequest request;
    request.url = config_.base_url + "/chat/completions";
    request.timeout = config.timeout;
    request.body = body.dump();
    if (!config_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    spdlog::debug("chat completion request body: {}", redact_secret(request.body, config_.api_key));

    ++requests_;
    HttpResponse response;
    try {
        response = post_with_retries(*transport_, request, config.retry, sleep_, "LLM service");
    } catch (const ClientError& ex) {
        throw ClientError(ex.kind(), redact_secret(ex.what(), config_.api_key), ex.status(), ex.attempts());
    }
    spdlog::debug("chat completion response body: {}", redact_secret(response.body, config_.api_key));
    try {
        const auto json = nlohmann::json::parse(response.body);
        const auto& content = json.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        return content.get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw ClientError(ClientErrorKind::response, std::string("malformed chat completion response: ") + ex.what(),
                          response.status);
    }
}

std::string extract_latex(std::string_view raw) {
    std::string text(trim(raw));
    while (true) {
        const std::string before = text;
        if (text.starts_with("```")) {
            const auto newline = text.find('\n');
            text = newline == std::string::npos ? text.substr(3) : text.substr(newline + 1);
            text = std::string(trim(text));
            if (text.ends_with("```")) text = std::string(trim(std::string_view(text).substr(0, text.size() - 3)));
        }
        if (starts_with_icase(text, "output:")) {
            text = std::string(trim(std::string_view(text).substr(7)));
        }
        if (text == before) break;
    }
    if (text.empty()) throw ClientError(ClientErrorKind::empty, "no LaTeX found in the model reply");
    return text;
}

std::shared_ptr<const LlmClient> make_llm_client(std::string_view name, const LlmContext& context) {
    if (name == "echo") return std::make_shared<EchoLastExampleLlm>();
    if (name.starts_with("echo:")) return std::make_shared<EchoLastExampleLlm>(std::string(name.substr(5)));
    if (name.starts_with("fixed:")) return std::make_shared<FixedLlm>(std::string(name.substr(6)));
    if (name == "failing") return std::make_shared<FailingLlm>();
    if (name == "nearest-neighbor") {
        return std::make_shared<NearestNeighborLlm>(context.index, context.dataset, context.provider);
    }
    if (name == "remote") {
        RemoteLlmConfig config;
        config.base_url = env_or("GR2TEX_LLM_BASE_URL", config.base_url);
        config.api_key = env_or("GR2TEX_LLM_API_KEY");
        return std::make_shared<RemoteChatLlm>(std::move(config));
    }
    throw std::invalid_argument("unknown LLM client '" + std::string(name) +
                                "' (expected echo, echo:<text>, fixed:<text>, nearest-neighbor, failing, remote)");
}

}  // namespace gr2tex
