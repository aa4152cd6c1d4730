#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "panelsynth/dialogue.hpp"

namespace panelsynth {

enum class ChatRole { System, User, Assistant };

const char *to_string(ChatRole role);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    bool operator==(const ChatMessage &) const = default;
};

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    std::string model_name;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::string request_id;
};

// Throws ValidationError when the message list breaks the chat-message rules.
void validate_request(const CompletionRequest &req);

// Identifies which step of which dialogue a call belongs to.
struct CallContext {
    RoleKind role = RoleKind::Candidate;
    int reviewer_index = -1;  // >= 0 only for reviewers
    std::string seed_id;
    int turn_index = 0;
    int attempt = 0;
};

enum class CallOutcome { Ok, TransientError, PermanentError, ParseRejected };

const char *to_string(CallOutcome outcome);

struct CallRecord {
    std::string request_id;
    RoleKind role = RoleKind::Candidate;
    int reviewer_index = -1;
    std::string seed_id;
    int turn_index = 0;
    int attempt_number = 0;
    double latency_ms = 0.0;
    CallOutcome outcome = CallOutcome::Ok;
    std::string detail;
};

std::string call_record_json(const CallRecord &record);

// Thread-safe, append-only log of gateway calls in completion order. Optionally mirrors
// each record to a JSONL file as it is appended.
class CallLog {
public:
    CallLog() = default;
    explicit CallLog(const std::string &jsonl_path, bool append = false);

    void append(CallRecord record);
    std::vector<CallRecord> records() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<CallRecord> records_;
    std::ofstream sink_;
};

class Backend {
public:
    virtual ~Backend() = default;
    // Returns the raw completion text or throws BackendError.
    virtual std::string complete(const CompletionRequest &req, const CallContext &ctx) = 0;
    virtual std::string describe() const = 0;
};

struct GatewayOptions {
    int max_in_flight = 8;
    // Minimum spacing between request starts; 0 disables.
    int min_interval_ms = 0;
    RetryPolicy retry;
    std::uint64_t jitter_seed = 0x5eed;
    // Replaceable for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

// Delay before retry number `retry` (0-based): min(cap, base * 2^retry), scaled by a
// jitter factor in [0.5, 1].
std::chrono::milliseconds backoff_delay(const RetryPolicy &policy, int retry, double jitter_unit);

// Rate-limited, retrying front for one backend. Safe to share across threads.
class Gateway {
public:
    // Throws ParseError to reject a completion; the call is then logged as ParseRejected.
    using Acceptor = std::function<void(const std::string &)>;

    Gateway(std::shared_ptr<Backend> backend, GatewayOptions options, std::shared_ptr<CallLog> log);

    // Issues the request, retrying transient failures up to retry.max_attempts in total.
    // ctx.attempt is the number of the first attempt and is advanced past every call made,
    // so callers that re-sample after a rejection keep unique attempt numbers.
    std::string complete(const CompletionRequest &req, CallContext &ctx, const Acceptor &accept = {});

    const Backend &backend() const { return *backend_; }
    const GatewayOptions &options() const { return options_; }

private:
    void acquire_slot();
    void release_slot();

    std::shared_ptr<Backend> backend_;
    GatewayOptions options_;
    std::shared_ptr<CallLog> log_;

    std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    std::chrono::steady_clock::time_point next_start_{};
    std::mt19937_64 jitter_rng_;
};

// Gateways keyed by backend id.
class GatewayPool {
public:
    void add(const std::string &backend_id, std::shared_ptr<Gateway> gateway);
    Gateway &at(const std::string &backend_id) const;
    bool contains(const std::string &backend_id) const { return gateways_.count(backend_id) != 0; }

    // Every backend id resolves to the same gateway.
    static GatewayPool single(std::shared_ptr<Gateway> gateway);

private:
    std::map<std::string, std::shared_ptr<Gateway>> gateways_;
    std::shared_ptr<Gateway> fallback_;
};

}  // namespace panelsynth
