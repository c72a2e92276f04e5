#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "gr2tex/dataset.hpp"
#include "gr2tex/embedding.hpp"
#include "gr2tex/http_transport.hpp"
#include "gr2tex/prompting.hpp"
#include "gr2tex/retrieval.hpp"

namespace gr2tex {

/// Decoding settings for the text-generation model. Temperature 0 keeps
/// grid runs reproducible.
struct GenerationConfig {
    std::string model_name = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 256;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;  // retries = 2, backoff 0.5 s doubling, capped at 8 s
    std::optional<std::int64_t> seed;
    InstructionPlacement placement = InstructionPlacement::system_message;
};

void validate(const GenerationConfig& config);

// ---------------------------------------------------------------------------
// Speech recognition

struct TranscriptionResult {
    std::string text;
    double audio_duration = 0.0;  // seconds
    bool empty = false;           // service returned no text; not an error
};

class Transcriber {
public:
    virtual ~Transcriber() = default;
    virtual std::string id() const = 0;
    // Receives audio already checked against the WAV contract.
    virtual std::string transcribe_wav(std::string_view wav_bytes) const = 0;
};

/// Checks the format tag and the WAV contract, then calls the client.
/// Only "wav" is accepted as a format tag.
TranscriptionResult transcribe(std::string_view audio, std::string_view format, const Transcriber& client);

/// Returns registered text for exact audio bytes.
class StubTranscriber final : public Transcriber {
public:
    void register_audio(std::string_view wav_bytes, std::string text);
    std::string id() const override { return "stub-asr"; }
    std::string transcribe_wav(std::string_view wav_bytes) const override;

private:
    std::map<std::uint64_t, std::string> by_hash_;
};

class FailingTranscriber final : public Transcriber {
public:
    explicit FailingTranscriber(std::string message = "stub ASR configured to fail")
        : message_(std::move(message)) {}
    std::string id() const override { return "failing-asr"; }
    std::string transcribe_wav(std::string_view) const override;

private:
    std::string message_;
};

struct RemoteAsrConfig {
    std::string url;  // full endpoint URL
    std::string api_key;
    std::string file_field = "file";
    RetryPolicy retry;
    std::chrono::milliseconds timeout{60000};
};

/// Posts the WAV as multipart/form-data and reads {"text": ...}.
class RemoteTranscriber final : public Transcriber {
public:
    explicit RemoteTranscriber(RemoteAsrConfig config, std::shared_ptr<HttpTransport> transport = default_transport(),
                               Sleeper sleep = real_sleeper());
    std::string id() const override { return "remote-asr"; }
    std::string transcribe_wav(std::string_view wav_bytes) const override;

private:
    RemoteAsrConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Text generation

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const AssembledPrompt& prompt, const GenerationConfig& config) const = 0;
};

/// Returns the completion verbatim; an empty (all-whitespace) completion is
/// ClientError(empty).
std::string generate(const AssembledPrompt& prompt, const GenerationConfig& config, const LlmClient& client);

/// Echoes the LaTeX of the example adjacent to the query; `fallback` when
/// the prompt has no examples.
class EchoLastExampleLlm final : public LlmClient {
public:
    explicit EchoLastExampleLlm(std::string fallback = {}) : fallback_(std::move(fallback)) {}
    std::string id() const override { return "echo"; }
    std::string complete(const AssembledPrompt& prompt, const GenerationConfig&) const override;

private:
    std::string fallback_;
};

class FixedLlm final : public LlmClient {
public:
    explicit FixedLlm(std::string text) : text_(std::move(text)) {}
    std::string id() const override { return "fixed"; }
    std::string complete(const AssembledPrompt&, const GenerationConfig&) const override { return text_; }

private:
    std::string text_;
};

/// Looks the query text up in an index (cosine, k = 1) and answers with the
/// nearest pair's LaTeX, ignoring the prompt's examples.
class NearestNeighborLlm final : public LlmClient {
public:
    NearestNeighborLlm(std::shared_ptr<const Index> index, std::shared_ptr<const Dataset> dataset,
                       std::shared_ptr<const EmbeddingProvider> provider);
    std::string id() const override { return "nearest-neighbor"; }
    std::string complete(const AssembledPrompt& prompt, const GenerationConfig&) const override;

private:
    std::shared_ptr<const Index> index_;
    std::shared_ptr<const Dataset> dataset_;
    std::shared_ptr<const EmbeddingProvider> provider_;
};

class FailingLlm final : public LlmClient {
public:
    explicit FailingLlm(ClientErrorKind kind = ClientErrorKind::transport, int status = 503)
        : kind_(kind), status_(status) {}
    std::string id() const override { return "failing"; }
    std::string complete(const AssembledPrompt&, const GenerationConfig&) const override;

private:
    ClientErrorKind kind_;
    int status_;
};

struct RemoteLlmConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
};

/// Chat-completions client: POST {base_url}/chat/completions with
/// {"model","temperature","max_tokens","messages"[,"seed"]}; reads
/// choices[0].message.content.
class RemoteChatLlm final : public LlmClient {
public:
    explicit RemoteChatLlm(RemoteLlmConfig config, std::shared_ptr<HttpTransport> transport = default_transport(),
                           Sleeper sleep = real_sleeper());
    std::string id() const override { return "remote"; }
    std::string complete(const AssembledPrompt& prompt, const GenerationConfig& config) const override;

    std::uint64_t requests_sent() const { return requests_.load(); }

private:
    RemoteLlmConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleep_;
    mutable std::atomic<std::uint64_t> requests_{0};
};

/// Trims, drops one enclosing ``` fence and a leading "Output:" label,
/// repeated until nothing changes. Throws ClientError(empty) if nothing is
/// left.
std::string extract_latex(std::string_view raw);

struct LlmContext {
    std::shared_ptr<const Index> index;
    std::shared_ptr<const Dataset> dataset;
    std::shared_ptr<const EmbeddingProvider> provider;
};

/// "echo", "echo:<fallback>", "fixed:<text>", "nearest-neighbor", "failing"
/// or "remote" (GR2TEX_LLM_BASE_URL, GR2TEX_LLM_API_KEY).
std::shared_ptr<const LlmClient> make_llm_client(std::string_view name, const LlmContext& context = {});

}  // namespace gr2tex
