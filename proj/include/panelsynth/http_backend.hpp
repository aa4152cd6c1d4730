#pragma once

#include <string>

#include "panelsynth/gateway.hpp"

namespace panelsynth {

struct HttpBackendOptions {
    // scheme://host[:port], e.g. "https://api.example.com" or "http://127.0.0.1:8000".
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string api_key;  // sent as a bearer token when nonempty
    int connect_timeout_s = 10;
    int read_timeout_s = 120;
};

// Client for services speaking the /v1/chat/completions JSON schema.
//
// 408, 429 and 5xx responses and connection failures raise BackendError(Transient),
// read timeouts raise BackendError(Timeout), other 4xx responses raise
// BackendError(Permanent).
class HttpChatBackend : public Backend {
public:
    explicit HttpChatBackend(HttpBackendOptions options);

    std::string complete(const CompletionRequest &req, const CallContext &ctx) override;
    std::string describe() const override { return options_.base_url + options_.path; }

private:
    HttpBackendOptions options_;
};

std::string chat_request_body(const CompletionRequest &req);
// Extracts choices[0].message.content; throws BackendError(Permanent) on a malformed body.
std::string chat_response_text(const std::string &body);

}  // namespace panelsynth
