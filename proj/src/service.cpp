#include "gr2tex/service.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "gr2tex/prompting.hpp"
#include "gr2tex/text_util.hpp"

#ifndef GR2TEX_VERSION
#define GR2TEX_VERSION "0.0.0"
#endif

namespace gr2tex {
namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

struct ApiError {
    int status;
    std::string error;
    std::string detail;
    std::optional<std::string> stage;
};

ApiResponse error_response(const ApiError& e) {
    ApiResponse r;
    r.status = e.status;
    r.body["error"] = e.error;
    if (e.stage) r.body["stage"] = *e.stage;
    r.body["detail"] = e.detail;
    return r;
}

ApiError bad_request(std::string detail) { return {400, "invalid_request", std::move(detail), std::nullopt}; }

struct Overrides {
    std::optional<int> k;
    std::optional<std::string> measure;
    std::optional<std::string> prompt_id;
};

struct Resolved {
    int k = 0;
    std::optional<Measure> measure;
    PromptId prompt_id = PromptId::p1;
};

Resolved resolve_overrides(const Overrides& o, const ServiceConfig& config) {
    Resolved r;
    r.k = o.k.value_or(config.default_k);
    if (o.prompt_id) {
        try {
            r.prompt_id = parse_prompt_id(*o.prompt_id);
        } catch (const std::exception& ex) {
            throw bad_request(ex.what());
        }
    } else {
        r.prompt_id = config.default_prompt;
    }
    if (o.measure) {
        try {
            r.measure = parse_measure(*o.measure);
        } catch (const std::exception& ex) {
            throw bad_request(ex.what());
        }
        if (r.k == 0) throw bad_request("k = 0 runs without examples and takes no measure");
    } else if (r.k != 0) {
        r.measure = config.default_measure.value_or(Measure::cosine);
    }
    ExperimentConfig check;
    check.k = r.k;
    check.measure = r.measure;
    try {
        validate(check, config.bounds);
    } catch (const std::exception& ex) {
        throw bad_request(ex.what());
    }
    return r;
}

Overrides overrides_from_json(const json& j) {
    Overrides o;
    if (j.contains("k") && !j.at("k").is_null()) {
        if (!j.at("k").is_number_integer()) throw bad_request("k must be an integer");
        o.k = j.at("k").get<int>();
    }
    for (const auto* key : {"measure", "prompt_id"}) {
        if (!j.contains(key) || j.at(key).is_null()) continue;
        if (!j.at(key).is_string()) throw bad_request(std::string(key) + " must be a string");
        (std::string_view(key) == "measure" ? o.measure : o.prompt_id) = j.at(key).get<std::string>();
    }
    return o;
}

Overrides overrides_from_fields(const std::map<std::string, std::string>& fields) {
    Overrides o;
    if (const auto it = fields.find("k"); it != fields.end() && !trim(it->second).empty()) {
        const auto text = std::string(trim(it->second));
        std::size_t used = 0;
        try {
            o.k = std::stoi(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != text.size()) throw bad_request("k must be an integer, got '" + text + "'");
    }
    if (const auto it = fields.find("measure"); it != fields.end() && !trim(it->second).empty()) {
        o.measure = std::string(trim(it->second));
    }
    if (const auto it = fields.find("prompt_id"); it != fields.end() && !trim(it->second).empty()) {
        o.prompt_id = std::string(trim(it->second));
    }
    return o;
}

// retrieve -> assemble -> generate -> extract. Returns the /api/generate body.
ojson run_generation(const Pipeline& pipeline, const ServiceConfig& config, std::string_view text,
                     const Resolved& r) {
    std::vector<RetrievalResult> hits;
    try {
        if (r.k > 0) {
            hits = query(*pipeline.index, *pipeline.provider, text, static_cast<std::size_t>(r.k), *r.measure).results;
        }
    } catch (const ClientError& ex) {
        throw ApiError{502, "retrieval_failed", ex.what(), "generation"};
    } catch (const std::exception& ex) {
        throw ApiError{500, "retrieval_failed", ex.what(), "generation"};
    }
    std::string latex;
    try {
        auto examples = resolve_examples(hits, *pipeline.dataset);
        const auto prompt = assemble(get_prompt(r.prompt_id), std::move(examples), text);
        latex = extract_latex(gr2tex::generate(prompt, config.generation, *pipeline.llm));
    } catch (const ClientError& ex) {
        throw ApiError{502, "generation_failed", ex.what(), "generation"};
    } catch (const std::exception& ex) {
        throw ApiError{500, "generation_failed", ex.what(), "generation"};
    }
    ojson body;
    body["latex"] = latex;
    body["examples"] = ojson::array();
    for (const auto& h : hits) body["examples"].push_back({{"pair_id", h.pair_id}, {"score", h.score}});
    body["prompt_id"] = to_string(r.prompt_id);
    body["k"] = r.k;
    body["measure"] = r.measure ? ojson(std::string(to_string(*r.measure))) : ojson(nullptr);
    return body;
}

const UploadedFile& require_wav_upload(const ApiRequest& request, const std::string& stage) {
    if (!request.multipart) {
        throw ApiError{415, "unsupported_media_type",
                       "expected multipart/form-data with a WAV file in field 'file', got '" +
                           (request.content_type.empty() ? std::string("no content type") : request.content_type) +
                           "'",
                       stage};
    }
    const auto it = request.files.find("file");
    if (it == request.files.end()) throw ApiError{400, "invalid_request", "missing multipart field 'file'", stage};
    return it->second;
}

TranscriptionResult run_transcription(const Pipeline& pipeline, const UploadedFile& file) {
    const std::string stage = "transcription";
    try {
        return transcribe(file.content, "wav", *pipeline.asr);
    } catch (const ClientError& ex) {
        if (ex.kind() == ClientErrorKind::format) throw ApiError{415, "unsupported_media_type", ex.what(), stage};
        throw ApiError{502, "transcription_failed", ex.what(), stage};
    } catch (const std::exception& ex) {
        throw ApiError{500, "transcription_failed", ex.what(), stage};
    }
}

ApiResponse not_ready() {
    return error_response({503, "starting", "dataset and index are still loading", std::nullopt});
}

std::string resolve_path(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.string();
}

void to_http(const ApiResponse& api, httplib::Response& res) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json");
}

ApiRequest from_http(const httplib::Request& req) {
    ApiRequest api;
    api.content_type = req.get_header_value("Content-Type");
    api.multipart = req.is_multipart_form_data();
    if (api.multipart) {
        for (const auto& [name, part] : req.files) {
            if (part.filename.empty() && part.content_type.empty()) {
                api.fields[name] = part.content;
            } else {
                api.files[name] = {part.filename, part.content_type, part.content};
            }
        }
    } else {
        api.body = req.body;
    }
    return api;
}

}  // namespace

std::string_view build_version() { return GR2TEX_VERSION; }

void validate(const ServiceConfig& config) {
    if (config.port < 0 || config.port > 65535) throw ServiceConfigError("port must be in [0, 65535]");
    ExperimentConfig defaults;
    defaults.k = config.default_k;
    defaults.measure = config.default_k == 0 ? std::nullopt : config.default_measure;
    try {
        validate(defaults, config.bounds);
        validate(config.generation);
    } catch (const std::exception& ex) {
        throw ServiceConfigError(std::string("invalid service defaults: ") + ex.what());
    }
    if (config.asr != "remote" && config.asr != "failing") {
        throw ServiceConfigError("asr must be remote or failing, got '" + config.asr + "'");
    }
}

ServiceConfig service_config_from_json(std::string_view json_text, const std::filesystem::path& base_dir) {
    ServiceConfig config;
    try {
        const auto j = json::parse(json_text);
        if (j.contains("listen")) {
            config.host = j.at("listen").value("host", config.host);
            config.port = j.at("listen").value("port", config.port);
        }
        if (j.contains("dataset")) config.dataset_path = resolve_path(base_dir, j.at("dataset").get<std::string>());
        if (j.contains("index")) config.index_path = resolve_path(base_dir, j.at("index").get<std::string>());
        config.default_k = j.value("default_k", config.default_k);
        if (j.contains("default_measure")) {
            const auto& m = j.at("default_measure");
            config.default_measure = m.is_null() ? std::nullopt : std::optional(parse_measure(m.get<std::string>()));
        }
        if (j.contains("default_prompt")) config.default_prompt = parse_prompt_id(j.at("default_prompt").get<std::string>());
        if (j.contains("bounds")) {
            config.bounds.min_k = j.at("bounds").value("min_k", config.bounds.min_k);
            config.bounds.max_k = j.at("bounds").value("max_k", config.bounds.max_k);
        }
        if (j.contains("generation")) config.generation = generation_from_json(j.at("generation").dump());
        if (j.contains("clients")) {
            const auto& c = j.at("clients");
            config.embedding_provider = c.value("embedding", config.embedding_provider);
            config.llm = c.value("llm", config.llm);
            config.asr = c.value("asr", config.asr);
            config.asr_url = c.value("asr_url", config.asr_url);
        }
        if (j.contains("cors_origins")) config.cors_origins = j.at("cors_origins").get<std::vector<std::string>>();
        config.max_upload_bytes = j.value("max_upload_bytes", config.max_upload_bytes);
    } catch (const json::exception& ex) {
        throw ServiceConfigError(std::string("bad service config: ") + ex.what());
    } catch (const RetrievalError& ex) {
        throw ServiceConfigError(std::string("bad service config: ") + ex.what());
    } catch (const PromptError& ex) {
        throw ServiceConfigError(std::string("bad service config: ") + ex.what());
    } catch (const HarnessError& ex) {
        throw ServiceConfigError(std::string("bad service config: ") + ex.what());
    }
    config.asr_url = env_or("GR2TEX_ASR_URL", config.asr_url);
    config.asr_api_key = env_or("GR2TEX_ASR_API_KEY", config.asr_api_key);
    validate(config);
    return config;
}

ServiceConfig service_config_from_json(std::string_view json_text) {
    return service_config_from_json(json_text, std::filesystem::path());
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    return service_config_from_json(read_file(path), path.parent_path());
}

std::shared_ptr<const Pipeline> load_pipeline(const ServiceConfig& config) {
    for (const auto& [what, path] : {std::pair{"dataset", config.dataset_path}, std::pair{"index", config.index_path}}) {
        if (path.empty()) throw ServiceConfigError(std::string("service config has no ") + what + " path");
        if (!std::filesystem::exists(path)) {
            throw ServiceConfigError(std::string(what) + " file not found: " + path.string());
        }
    }
    auto pipeline = std::make_shared<Pipeline>();
    pipeline->dataset = std::make_shared<const Dataset>(load_dataset(config.dataset_path));
    pipeline->index = std::make_shared<const Index>(load_index(config.index_path));
    pipeline->provider = make_embedding_provider(config.embedding_provider);
    if (pipeline->provider->provider_id() != pipeline->index->provider_id()) {
        throw ServiceConfigError("index was built with '" + pipeline->index->provider_id() +
                                 "' but the configured provider is '" + pipeline->provider->provider_id() + "'");
    }
    pipeline->llm = make_llm_client(config.llm, {pipeline->index, pipeline->dataset, pipeline->provider});
    if (config.asr == "failing") {
        pipeline->asr = std::make_shared<FailingTranscriber>();
    } else {
        RemoteAsrConfig asr;
        asr.url = config.asr_url;
        asr.api_key = config.asr_api_key;
        if (asr.url.empty()) throw ServiceConfigError("remote ASR needs clients.asr_url or GR2TEX_ASR_URL");
        pipeline->asr = std::make_shared<RemoteTranscriber>(std::move(asr));
    }
    return pipeline;
}

Service::Service(ServiceConfig config) : config_(std::move(config)) { validate(config_); }

void Service::set_pipeline(std::shared_ptr<const Pipeline> pipeline) {
    std::lock_guard lock(mutex_);
    pipeline_ = std::move(pipeline);
}

std::shared_ptr<const Pipeline> Service::pipeline() const {
    std::lock_guard lock(mutex_);
    return pipeline_;
}

bool Service::ready() const { return pipeline() != nullptr; }

ApiResponse Service::health() const {
    const auto p = pipeline();
    if (!p) return not_ready();
    ApiResponse r;
    r.body["status"] = "ok";
    r.body["version"] = build_version();
    r.body["index_size"] = p->index->size();
    r.body["provider_id"] = p->index->provider_id();
    return r;
}

ApiResponse Service::transcribe(const ApiRequest& request) const {
    const auto p = pipeline();
    if (!p) return not_ready();
    try {
        const auto& file = require_wav_upload(request, "transcription");
        const auto result = run_transcription(*p, file);
        ApiResponse r;
        r.body["text"] = result.text;
        r.body["duration_s"] = result.audio_duration;
        return r;
    } catch (const ApiError& e) {
        return error_response(e);
    }
}

ApiResponse Service::generate(const ApiRequest& request) const {
    const auto p = pipeline();
    if (!p) return not_ready();
    try {
        if (request.multipart) throw ApiError{415, "unsupported_media_type", "expected a JSON body", std::nullopt};
        json j;
        try {
            j = json::parse(request.body);
        } catch (const json::exception& ex) {
            throw bad_request(std::string("body is not valid JSON: ") + ex.what());
        }
        if (!j.is_object()) throw bad_request("body must be a JSON object");
        if (!j.contains("text") || !j.at("text").is_string()) throw bad_request("'text' must be a string");
        const auto text = j.at("text").get<std::string>();
        if (trim(text).empty()) throw bad_request("'text' must not be empty");
        const auto resolved = resolve_overrides(overrides_from_json(j), config_);
        ApiResponse r;
        r.body = run_generation(*p, config_, text, resolved);
        return r;
    } catch (const ApiError& e) {
        return error_response(e);
    }
}

ApiResponse Service::speech_to_latex(const ApiRequest& request) const {
    const auto p = pipeline();
    if (!p) return not_ready();
    std::optional<std::string> text;
    try {
        const auto& file = require_wav_upload(request, "transcription");
        auto resolved = resolve_overrides(overrides_from_fields(request.fields), config_);
        const auto transcription = run_transcription(*p, file);
        text = transcription.text;
        if (transcription.empty) {
            throw ApiError{422, "empty_transcription", "the speech recognizer returned no text", "transcription"};
        }
        ApiResponse r;
        r.body["text"] = *text;
        const auto generated = run_generation(*p, config_, *text, resolved);
        for (const auto& [key, value] : generated.items()) r.body[key] = value;
        return r;
    } catch (const ApiError& e) {
        auto r = error_response(e);
        if (text) r.body["text"] = *text;
        return r;
    }
}

void Service::mount(httplib::Server& server) const {
    server.set_payload_max_length(config_.max_upload_bytes);
    const auto origins = config_.cors_origins;
    server.set_post_routing_handler([origins](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (origin.empty() || std::find(origins.begin(), origins.end(), origin) == origins.end()) return;
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
    });
    server.Options(R"(/.*)", [origins](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (std::find(origins.begin(), origins.end(), origin) == origins.end()) {
            res.status = 403;
            return;
        }
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Max-Age", "600");
    });
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) { to_http(health(), res); });
    server.Post("/api/transcribe", [this](const httplib::Request& req, httplib::Response& res) {
        to_http(transcribe(from_http(req)), res);
    });
    server.Post("/api/generate", [this](const httplib::Request& req, httplib::Response& res) {
        to_http(generate(from_http(req)), res);
    });
    server.Post("/api/speech-to-latex", [this](const httplib::Request& req, httplib::Response& res) {
        to_http(speech_to_latex(from_http(req)), res);
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::info("{} {} -> {}", req.method, req.path, res.status);
    });
}

int serve(const ServiceConfig& config) {
    for (const auto& path : {config.dataset_path, config.index_path}) {
        if (path.empty() || !std::filesystem::exists(path)) {
            throw ServiceConfigError("required file not found: '" + path.string() + "'");
        }
    }
    Service service(config);
    httplib::Server server;
    service.mount(server);
    spdlog::info("gr2tex {} listening on {}:{} (llm={}, asr={}, embedding={}, asr key {})", build_version(),
                 config.host, config.port, config.llm, config.asr, config.embedding_provider,
                 config.asr_api_key.empty() ? "unset" : "set");
    std::jthread loader([&] {
        try {
            service.set_pipeline(load_pipeline(config));
            spdlog::info("pipeline ready");
        } catch (const std::exception& ex) {
            spdlog::error("pipeline failed to load: {}", ex.what());
            server.stop();
        }
    });
    const bool ok = server.listen(config.host, config.port);
    if (!ok) spdlog::error("could not listen on {}:{}", config.host, config.port);
    return ok && service.ready() ? 0 : 1;
}

}  // namespace gr2tex
