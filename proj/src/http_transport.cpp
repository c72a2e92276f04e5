#include "gr2tex/http_transport.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace gr2tex {
namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ClientError(ClientErrorKind::format, "URL '" + url + "' has no scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_secret_header(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    return name == "authorization" || name == "api-key" || name == "x-api-key" || name == "proxy-authorization" ||
           name.find("token") != std::string::npos || name.find("secret") != std::string::npos;
}

}  // namespace

std::string_view to_string(ClientErrorKind kind) {
    switch (kind) {
        case ClientErrorKind::transport: return "transport";
        case ClientErrorKind::auth: return "auth";
        case ClientErrorKind::request: return "request";
        case ClientErrorKind::format: return "format";
        case ClientErrorKind::response: return "response";
        case ClientErrorKind::empty: return "empty";
    }
    return "transport";
}

HttpResponse HttplibTransport::post(const HttpRequest& request) {
    const auto [origin, path] = split_url(request.url);
    httplib::Client client(origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    for (const auto& [name, value] : request.headers) headers.emplace(name, value);

    auto result = client.Post(path, headers, request.body, request.content_type);
    if (!result) {
        throw ClientError(ClientErrorKind::transport,
                          "request to " + origin + " failed: " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
}

std::shared_ptr<HttpTransport> default_transport() {
    static const auto transport = std::make_shared<HttplibTransport>();
    return transport;
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
    auto delay = base_delay;
    for (int i = 0; i < attempt && delay < max_delay; ++i) delay *= 2;
    return std::min(delay, max_delay);
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpResponse post_with_retries(HttpTransport& transport, const HttpRequest& request, const RetryPolicy& policy,
                               const Sleeper& sleep, std::string_view service_name) {
    const int max_attempts = std::max(0, policy.retries) + 1;
    std::string last_error;
    int last_status = 0;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        if (attempt > 0) {
            sleep(policy.delay_for(attempt - 1));
        }
        spdlog::debug("{} request attempt {}/{} to {} headers: {}", service_name, attempt + 1, max_attempts,
                      request.url, redact_headers(request.headers));
        try {
            auto response = transport.post(request);
            if (response.status >= 200 && response.status < 300) {
                return response;
            }
            // Some servers echo the request back; never let a credential ride along.
            std::string preview = response.body.substr(0, 256);
            for (const auto& [name, value] : request.headers) {
                if (!is_secret_header(name)) continue;
                preview = redact_secret(std::move(preview), value);
                if (value.starts_with("Bearer ")) preview = redact_secret(std::move(preview), value.substr(7));
            }
            if (response.status == 401 || response.status == 403) {
                throw ClientError(ClientErrorKind::auth,
                                  std::string(service_name) + " rejected credentials (status " +
                                      std::to_string(response.status) + ")",
                                  response.status, attempt + 1);
            }
            if (response.status >= 400 && response.status < 500) {
                throw ClientError(ClientErrorKind::request,
                                  std::string(service_name) + " rejected the request (status " +
                                      std::to_string(response.status) + "): " + preview,
                                  response.status, attempt + 1);
            }
            last_status = response.status;
            last_error = "status " + std::to_string(response.status) + ": " + preview;
        } catch (const ClientError& ex) {
            if (ex.kind() != ClientErrorKind::transport) throw;
            last_status = 0;
            last_error = ex.what();
        }
        spdlog::warn("{} attempt {}/{} failed: {}", service_name, attempt + 1, max_attempts, last_error);
    }
    throw ClientError(ClientErrorKind::transport,
                      std::string(service_name) + " failed after " + std::to_string(max_attempts) +
                          " attempts: " + last_error,
                      last_status, max_attempts);
}

std::string redact_headers(const std::vector<std::pair<std::string, std::string>>& headers) {
    std::string out;
    for (const auto& [name, value] : headers) {
        if (!out.empty()) out += ", ";
        out += name + ": " + (is_secret_header(name) ? std::string("[REDACTED]") : value);
    }
    return out;
}

std::string redact_secret(std::string text, std::string_view secret) {
    if (secret.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(secret, pos)) != std::string::npos) {
        text.replace(pos, secret.size(), "[REDACTED]");
        pos += 10;
    }
    return text;
}

}  // namespace gr2tex
