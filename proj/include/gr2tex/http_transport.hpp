#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gr2tex {

enum class ClientErrorKind {
    transport,  // connection failure, timeout, or 5xx after retries
    auth,       // 401 / 403
    request,    // any other 4xx
    format,     // caller supplied input the service contract rejects
    response,   // service answered 2xx with an unusable body
    empty,      // service answered with an empty transcription/completion
};

std::string_view to_string(ClientErrorKind kind);

class ClientError : public std::runtime_error {
public:
    ClientError(ClientErrorKind kind, std::string message, int status = 0, int attempts = 0)
        : std::runtime_error(std::move(message)), kind_(kind), status_(status), attempts_(attempts) {}

    ClientErrorKind kind() const { return kind_; }
    int status() const { return status_; }
    int attempts() const { return attempts_; }

private:
    ClientErrorKind kind_;
    int status_;
    int attempts_;
};

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::string content_type = "application/json";
    std::chrono::milliseconds timeout{30000};
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POST-only transport. Connection-level failures throw
/// ClientError(transport); any HTTP status is returned to the caller.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

// cpp-httplib backed; http:// and https:// URLs.
class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) override;
};

std::shared_ptr<HttpTransport> default_transport();

/// Exponential backoff: delay(attempt) = min(base * 2^attempt, ceiling).
struct RetryPolicy {
    int retries = 2;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{8000};

    std::chrono::milliseconds delay_for(int attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// Sends `request` with retries on transport errors and 5xx. 4xx statuses
/// fail immediately (401/403 as auth, others as request errors). Returns
/// the first 2xx response.
HttpResponse post_with_retries(HttpTransport& transport, const HttpRequest& request, const RetryPolicy& policy,
                               const Sleeper& sleep, std::string_view service_name);

/// Replaces credential-bearing header values and bearer tokens with
/// "[REDACTED]" so requests can be logged.
std::string redact_headers(const std::vector<std::pair<std::string, std::string>>& headers);
std::string redact_secret(std::string text, std::string_view secret);

}  // namespace gr2tex
