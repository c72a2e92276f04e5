#include <doctest.h>

#include <deque>
#include <sstream>

#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "gr2tex/model_clients.hpp"
#include "gr2tex/wav.hpp"
#include "../support.hpp"

using namespace gr2tex;
using namespace std::chrono_literals;

namespace {

// Scripted transport: each call pops one outcome (a status or a thrown
// transport error).
class ScriptedTransport : public HttpTransport {
public:
    struct Outcome {
        int status = 200;
        std::string body;
        bool connection_error = false;
    };

    explicit ScriptedTransport(std::deque<Outcome> script) : script_(std::move(script)) {}

    HttpResponse post(const HttpRequest& request) override {
        requests.push_back(request);
        if (script_.empty()) throw ClientError(ClientErrorKind::transport, "script exhausted");
        const auto next = script_.front();
        if (script_.size() > 1) script_.pop_front();
        if (next.connection_error) throw ClientError(ClientErrorKind::transport, "connection refused");
        return {next.status, next.body};
    }

    std::vector<HttpRequest> requests;

private:
    std::deque<Outcome> script_;
};

struct SleepLog {
    std::vector<std::chrono::milliseconds> delays;
    Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

std::string chat_reply(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// Routes the default logger into a string for the duration of a scope.
class LogCapture {
public:
    LogCapture() : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(stream_);
        auto logger = std::make_shared<spdlog::logger>("capture", sink);
        logger->set_level(spdlog::level::trace);
        spdlog::set_default_logger(logger);
    }
    ~LogCapture() { spdlog::set_default_logger(previous_); }
    std::string text() const { return stream_.str(); }

private:
    std::ostringstream stream_;
    std::shared_ptr<spdlog::logger> previous_;
};

AssembledPrompt prompt_with_last(const std::string& nl, const std::string& latex) {
    ResolvedExample far{{"f", 0.1, 2}, {"f", "κάτι άλλο", "z", Split::train}};
    ResolvedExample near{{"n", 0.9, 1}, {"n", nl, latex, Split::train}};
    return assemble(get_prompt(PromptId::p2), {far, near}, "ερώτημα");
}

}  // namespace

TEST_SUITE("model_clients") {

TEST_CASE("backoff doubles up to the ceiling") {
    const RetryPolicy p;
    CHECK(p.delay_for(0) == 500ms);
    CHECK(p.delay_for(1) == 1000ms);
    CHECK(p.delay_for(3) == 4000ms);
    CHECK(p.delay_for(4) == 8000ms);
    CHECK(p.delay_for(10) == 8000ms);
}

TEST_CASE("transport errors are retried: retries = 2 gives 3 attempts") {
    ScriptedTransport t({{0, "", true}});
    SleepLog sleeps;
    try {
        post_with_retries(t, {}, RetryPolicy{}, sleeps.sleeper(), "svc");
        FAIL("expected failure");
    } catch (const ClientError& ex) {
        CHECK(ex.kind() == ClientErrorKind::transport);
        CHECK(ex.attempts() == 3);
    }
    CHECK(t.requests.size() == 3);
    CHECK(sleeps.delays == std::vector<std::chrono::milliseconds>{500ms, 1000ms});
}

TEST_CASE("5xx is retried and can recover") {
    ScriptedTransport t({{503, "busy"}, {200, "ok"}});
    SleepLog sleeps;
    const auto r = post_with_retries(t, {}, RetryPolicy{}, sleeps.sleeper(), "svc");
    CHECK(r.body == "ok");
    CHECK(t.requests.size() == 2);
}

TEST_CASE("4xx is never retried") {
    for (int status : {400, 401, 403, 404, 429}) {
        CAPTURE(status);
        ScriptedTransport t({{status, "no"}});
        SleepLog sleeps;
        try {
            post_with_retries(t, {}, RetryPolicy{}, sleeps.sleeper(), "svc");
            FAIL("expected failure");
        } catch (const ClientError& ex) {
            CHECK(ex.kind() == (status == 401 || status == 403 ? ClientErrorKind::auth : ClientErrorKind::request));
            CHECK(ex.status() == status);
            CHECK(ex.attempts() == 1);
        }
        CHECK(t.requests.size() == 1);
        CHECK(sleeps.delays.empty());
    }
}

TEST_CASE("unreachable endpoint over a real socket") {
    RemoteLlmConfig cfg;
    cfg.base_url = "http://127.0.0.1:1";
    SleepLog sleeps;
    const RemoteChatLlm llm(cfg, default_transport(), sleeps.sleeper());
    GenerationConfig gen;
    gen.timeout = 2000ms;
    try {
        llm.complete(assemble(get_prompt(PromptId::p1), {}, "x"), gen);
        FAIL("expected failure");
    } catch (const ClientError& ex) {
        CHECK(ex.kind() == ClientErrorKind::transport);
        CHECK(ex.attempts() == 3);
    }
    CHECK(sleeps.delays.size() == 2);
}

TEST_CASE("remote chat client request shape and auth failure") {
    auto t = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Outcome>{{200, chat_reply("x+y")}});
    RemoteLlmConfig cfg;
    cfg.base_url = "http://llm.test/v1";
    cfg.api_key = "sk-sentinel-123";
    const RemoteChatLlm llm(cfg, t, [](auto) {});
    GenerationConfig gen;
    gen.seed = 7;
    CHECK(llm.complete(prompt_with_last("x συν y", "x+y"), gen) == "x+y");
    REQUIRE(t->requests.size() == 1);
    const auto& req = t->requests[0];
    CHECK(req.url == "http://llm.test/v1/chat/completions");
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "gpt-3.5-turbo");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["max_tokens"] == 256);
    CHECK(body["seed"] == 7);
    CHECK(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(llm.requests_sent() == 1);

    auto denied = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Outcome>{{401, "bad key"}});
    const RemoteChatLlm bad(cfg, denied, [](auto) {});
    try {
        bad.complete(prompt_with_last("a", "b"), gen);
        FAIL("expected failure");
    } catch (const ClientError& ex) {
        CHECK(ex.kind() == ClientErrorKind::auth);
        CHECK(ex.status() == 401);
    }
    CHECK(denied->requests.size() == 1);
}

TEST_CASE("credentials never reach the log") {
    const std::string sentinel = "sk-SENTINEL-do-not-log-42";
    LogCapture capture;
    auto t = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Outcome>{{500, "echo " + sentinel}, {200, chat_reply("a")}});
    RemoteLlmConfig cfg;
    cfg.base_url = "http://llm.test/v1";
    cfg.api_key = sentinel;
    const RemoteChatLlm llm(cfg, t, [](auto) {});
    llm.complete(prompt_with_last("a", "a"), GenerationConfig{});
    CHECK(t->requests[0].headers.at(0).second == "Bearer " + sentinel);
    const auto log = capture.text();
    CHECK(log.find("attempt") != std::string::npos);
    CHECK(log.find(sentinel) == std::string::npos);
}

TEST_CASE("redaction helpers") {
    const auto h = redact_headers({{"Authorization", "Bearer abc"}, {"X-Api-Key", "k"}, {"Accept", "json"}});
    CHECK(h.find("abc") == std::string::npos);
    CHECK(h.find("[REDACTED]") != std::string::npos);
    CHECK(h.find("json") != std::string::npos);
    CHECK(redact_secret("token=abc and abc", "abc").find("abc") == std::string::npos);
    CHECK(redact_secret("nothing", "") == "nothing");
}

TEST_CASE("wav contract") {
    const auto ok = support::tone_wav(0);
    const auto info = require_asr_wav(ok);
    CHECK(info.sample_rate == 16000);
    CHECK(info.duration_seconds() == doctest::Approx(0.1));
    try {
        require_asr_wav(support::tone_wav(0, 44100, 2));
        FAIL("expected failure");
    } catch (const ClientError& ex) {
        CHECK(ex.kind() == ClientErrorKind::format);
        CHECK(std::string(ex.what()).find("16000") != std::string::npos);
        CHECK(std::string(ex.what()).find("mono") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_wav("not audio at all"), ClientError);
    CHECK_THROWS_AS(parse_wav(ok.substr(0, 30)), ClientError);
}

TEST_CASE("transcription through the stub") {
    StubTranscriber asr;
    const auto wav = support::tone_wav(1);
    asr.register_audio(wav, "άλφα συν βήτα");
    const auto r = transcribe(wav, "wav", asr);
    CHECK(r.text == "άλφα συν βήτα");
    CHECK_FALSE(r.empty);
    CHECK(r.audio_duration > 0.0);
    CHECK_THROWS_AS(transcribe(wav, "mp3", asr), ClientError);
    CHECK_THROWS_AS(transcribe(support::tone_wav(1, 44100, 2), "wav", asr), ClientError);
    CHECK_THROWS_AS(transcribe(support::tone_wav(2), "wav", asr), ClientError);

    asr.register_audio(support::tone_wav(3), "  ");
    CHECK(transcribe(support::tone_wav(3), "wav", asr).empty);

    const FailingTranscriber failing;
    CHECK_THROWS_AS(transcribe(wav, "wav", failing), ClientError);
}

TEST_CASE("remote transcriber posts multipart") {
    auto t = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Outcome>{{200, R"({"text":"δύο συν δύο"})"}});
    RemoteAsrConfig cfg;
    cfg.url = "http://asr.test/transcribe";
    const RemoteTranscriber asr(cfg, t, [](auto) {});
    const auto wav = support::tone_wav(0);
    CHECK(transcribe(wav, "wav", asr).text == "δύο συν δύο");
    const auto& req = t->requests.at(0);
    CHECK(req.content_type.starts_with("multipart/form-data; boundary="));
    CHECK(req.body.find("name=\"file\"") != std::string::npos);
    CHECK(req.body.find(wav) != std::string::npos);
}

TEST_CASE("stub llms") {
    const GenerationConfig gen;
    const EchoLastExampleLlm echo;
    CHECK(generate(prompt_with_last("x plus y", "x+y"), gen, echo) == "x+y");
    CHECK(generate(prompt_with_last("x plus y", "x+y"), gen, echo) == "x+y");
    CHECK_THROWS_AS(generate(assemble(get_prompt(PromptId::p1), {}, "q"), gen, echo), ClientError);
    const FixedLlm fixed("z");
    CHECK(generate(assemble(get_prompt(PromptId::p1), {}, "q"), gen, fixed) == "z");

    auto ds = std::make_shared<const Dataset>(support::duplicated_corpus());
    auto provider = std::make_shared<const OfflineTrigramProvider>();
    auto index = std::make_shared<const Index>(support::train_index(*ds, *provider));
    const NearestNeighborLlm nn(index, ds, provider);
    const auto& target = ds->pairs()[3];
    CHECK(generate(assemble(get_prompt(PromptId::p1), {}, target.nl_text), gen, nn) == target.latex);

    const FailingLlm failing(ClientErrorKind::auth, 401);
    try {
        generate(assemble(get_prompt(PromptId::p1), {}, "q"), gen, failing);
        FAIL("expected failure");
    } catch (const ClientError& ex) {
        CHECK(ex.status() == 401);
    }
    CHECK(make_llm_client("echo")->id() == "echo");
    CHECK(make_llm_client("fixed:z")->complete(assemble(get_prompt(PromptId::p1), {}, "q"), gen) == "z");
    CHECK_THROWS_AS(make_llm_client("gpt"), std::invalid_argument);
}

TEST_CASE("extract latex") {
    CHECK(extract_latex("```latex\n\\frac{1}{2}\n```") == "\\frac{1}{2}");
    CHECK(extract_latex("x+y") == "x+y");
    CHECK(extract_latex("Output: a^2") == "a^2");
    CHECK(extract_latex("  output:  ```\nb\n```  ") == "b");
    CHECK_THROWS_AS(extract_latex("   "), ClientError);
    CHECK_THROWS_AS(extract_latex("```\n```"), ClientError);
    for (const char* s : {"```latex\n\\frac{1}{2}\n```", "Output: a^2", " x ", "Output: ```x```"}) {
        const auto once = extract_latex(s);
        CHECK(extract_latex(once) == once);
    }
}

TEST_CASE("generation config validation") {
    GenerationConfig g;
    CHECK_NOTHROW(validate(g));
    g.temperature = -1;
    CHECK_THROWS(validate(g));
    g = {};
    g.max_tokens = 0;
    CHECK_THROWS(validate(g));
}

}
