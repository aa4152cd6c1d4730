#include "panelsynth/http_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include "panelsynth/errors.hpp"

namespace panelsynth {

HttpChatBackend::HttpChatBackend(HttpBackendOptions options) : options_(std::move(options)) {
    if (options_.base_url.empty()) throw ConfigError("http backend needs a base_url");
    if (options_.path.empty() || options_.path.front() != '/') options_.path = "/" + options_.path;
}

std::string chat_request_body(const CompletionRequest &req) {
    nlohmann::ordered_json body;
    body["model"] = req.model_name;
    auto &messages = body["messages"] = nlohmann::ordered_json::array();
    for (const auto &m : req.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_output_tokens;
    return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string chat_response_text(const std::string &body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto &content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw BackendError(BackendErrorKind::Permanent, "completion content is not text");
        return content.get<std::string>();
    } catch (const nlohmann::json::exception &e) {
        throw BackendError(BackendErrorKind::Permanent, std::string("malformed completion body: ") + e.what());
    }
}

std::string HttpChatBackend::complete(const CompletionRequest &req, const CallContext &) {
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.connect_timeout_s, 0);
    client.set_read_timeout(options_.read_timeout_s, 0);
    client.set_write_timeout(options_.read_timeout_s, 0);

    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto res = client.Post(options_.path, headers, chat_request_body(req), "application/json");
    if (!res) {
        const auto err = res.error();
        const auto kind = err == httplib::Error::Read ? BackendErrorKind::Timeout : BackendErrorKind::Transient;
        throw BackendError(kind, "request to " + describe() + " failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 200) return chat_response_text(res->body);

    const std::string detail = "HTTP " + std::to_string(status) + " from " + describe();
    if (status == 408 || status == 429 || status >= 500) throw BackendError(BackendErrorKind::Transient, detail);
    throw BackendError(BackendErrorKind::Permanent, detail);
}

}  // namespace panelsynth
