#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gr2tex/dataset.hpp"
#include "gr2tex/embedding.hpp"
#include "gr2tex/harness.hpp"
#include "gr2tex/model_clients.hpp"
#include "gr2tex/retrieval.hpp"

namespace httplib {
class Server;
}

namespace gr2tex {

std::string_view build_version();

class ServiceConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path dataset_path;
    std::filesystem::path index_path;
    int default_k = 3;
    std::optional<Measure> default_measure = Measure::cosine;
    PromptId default_prompt = PromptId::p1;
    GridBounds bounds;
    GenerationConfig generation;

    std::string embedding_provider = "offline";
    std::string llm = "remote";  // any make_llm_client name
    std::string asr = "remote";  // "remote" or "failing"
    std::string asr_url;
    // Credentials come from the environment only and are never logged.
    std::string asr_api_key;

    std::vector<std::string> cors_origins = {"http://localhost:5173", "http://127.0.0.1:5173",
                                             "http://localhost:3000"};
    std::size_t max_upload_bytes = 25 * 1024 * 1024;
};

/// Defaults must form a valid experiment config. With default_k = 0 the
/// measure is only the fallback for requests that ask for examples.
void validate(const ServiceConfig& config);

/// JSON config file. GR2TEX_ASR_URL and GR2TEX_ASR_API_KEY override the
/// ASR settings; LLM and embedding credentials are read by their factories.
ServiceConfig service_config_from_json(std::string_view json_text);
// Relative dataset/index paths are resolved against base_dir.
ServiceConfig service_config_from_json(std::string_view json_text, const std::filesystem::path& base_dir);
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Everything a request needs; immutable once built.
struct Pipeline {
    std::shared_ptr<const Dataset> dataset;
    std::shared_ptr<const Index> index;
    std::shared_ptr<const EmbeddingProvider> provider;
    std::shared_ptr<const LlmClient> llm;
    std::shared_ptr<const Transcriber> asr;
};

/// Loads dataset and index from the config paths and builds the clients.
std::shared_ptr<const Pipeline> load_pipeline(const ServiceConfig& config);

struct UploadedFile {
    std::string filename;
    std::string content_type;
    std::string content;
};

/// Transport-neutral request: the HTTP layer fills it, tests build it directly.
struct ApiRequest {
    std::string content_type;
    std::string body;
    bool multipart = false;
    std::map<std::string, UploadedFile> files;
    std::map<std::string, std::string> fields;  // non-file multipart fields
};

struct ApiResponse {
    int status = 200;
    nlohmann::ordered_json body;
};

class Service {
public:
    explicit Service(ServiceConfig config);

    // Until set, /health answers 503 and the API endpoints refuse work.
    void set_pipeline(std::shared_ptr<const Pipeline> pipeline);
    bool ready() const;

    ApiResponse health() const;
    ApiResponse transcribe(const ApiRequest& request) const;
    ApiResponse generate(const ApiRequest& request) const;
    ApiResponse speech_to_latex(const ApiRequest& request) const;

    const ServiceConfig& config() const { return config_; }

    /// Routes plus CORS handling for the allow-listed origins.
    void mount(httplib::Server& server) const;

private:
    std::shared_ptr<const Pipeline> pipeline() const;

    ServiceConfig config_;
    mutable std::mutex mutex_;
    std::shared_ptr<const Pipeline> pipeline_;
};

/// Blocks serving until the server is stopped. The pipeline loads on a
/// background thread so /health can report 503 meanwhile.
int serve(const ServiceConfig& config);

}  // namespace gr2tex
