#include "panelsynth/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "panelsynth/errors.hpp"

namespace panelsynth {

const char *to_string(ChatRole role) {
    switch (role) {
        case ChatRole::System: return "system";
        case ChatRole::User: return "user";
        case ChatRole::Assistant: return "assistant";
    }
    return "user";
}

const char *to_string(CallOutcome outcome) {
    switch (outcome) {
        case CallOutcome::Ok: return "ok";
        case CallOutcome::TransientError: return "transient_error";
        case CallOutcome::PermanentError: return "permanent_error";
        case CallOutcome::ParseRejected: return "parse_rejected";
    }
    return "unknown";
}

void validate_request(const CompletionRequest &req) {
    if (req.messages.empty()) {
        throw ValidationError(ValidationCode::BadTurnSequence, "request '" + req.request_id + "' has no messages");
    }
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        const auto &m = req.messages[i];
        if (m.role == ChatRole::System && i != 0) {
            throw ValidationError(ValidationCode::BadTurnSequence, "system message must come first");
        }
        if (m.role != ChatRole::Assistant && m.content.empty()) {
            throw ValidationError(ValidationCode::BadTurnSequence,
                                  std::string("empty ") + to_string(m.role) + " message at position " +
                                      std::to_string(i));
        }
    }
}

std::string call_record_json(const CallRecord &r) {
    nlohmann::ordered_json j;
    j["request_id"] = r.request_id;
    j["role"] = to_string(r.role);
    if (r.reviewer_index >= 0) j["reviewer"] = r.reviewer_index;
    j["seed_id"] = r.seed_id;
    j["turn"] = r.turn_index;
    j["attempt"] = r.attempt_number;
    j["latency_ms"] = std::round(r.latency_ms * 1000.0) / 1000.0;
    j["outcome"] = to_string(r.outcome);
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

CallLog::CallLog(const std::string &jsonl_path, bool append)
    : sink_(jsonl_path, append ? std::ios::app : std::ios::trunc) {
    if (!sink_) throw IoError("cannot open call log '" + jsonl_path + "'");
}

void CallLog::append(CallRecord record) {
    std::lock_guard lock(mu_);
    if (sink_.is_open()) {
        sink_ << call_record_json(record) << '\n';
        sink_.flush();
    }
    records_.push_back(std::move(record));
}

std::vector<CallRecord> CallLog::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::chrono::milliseconds backoff_delay(const RetryPolicy &policy, int retry, double jitter_unit) {
    const double base = static_cast<double>(policy.base_delay_ms);
    const double cap = static_cast<double>(policy.max_delay_ms);
    const double raw = std::min(cap, base * std::ldexp(1.0, std::min(retry, 62)));
    const double factor = 0.5 + 0.5 * std::clamp(jitter_unit, 0.0, 1.0);
    return std::chrono::milliseconds(static_cast<long long>(raw * factor));
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options, std::shared_ptr<CallLog> log)
    : backend_(std::move(backend)), options_(std::move(options)), log_(std::move(log)),
      jitter_rng_(options_.jitter_seed) {
    if (!backend_) throw ConfigError("gateway needs a backend");
    if (options_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (options_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    if (!log_) log_ = std::make_shared<CallLog>();
    if (!options_.sleep) {
        options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

void Gateway::acquire_slot() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
    if (options_.min_interval_ms > 0) {
        const auto now = std::chrono::steady_clock::now();
        const auto start = std::max(now, next_start_);
        next_start_ = start + std::chrono::milliseconds(options_.min_interval_ms);
        lock.unlock();
        std::this_thread::sleep_until(start);
    }
}

void Gateway::release_slot() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::string Gateway::complete(const CompletionRequest &req, CallContext &ctx, const Acceptor &accept) {
    validate_request(req);
    const int max_attempts = options_.retry.max_attempts;
    for (int transport_try = 0;; ++transport_try) {
        CallRecord record;
        record.request_id = req.request_id + "#" + std::to_string(ctx.attempt);
        record.role = ctx.role;
        record.reviewer_index = ctx.reviewer_index;
        record.seed_id = ctx.seed_id;
        record.turn_index = ctx.turn_index;
        record.attempt_number = ctx.attempt;

        const CallContext this_call = ctx;
        ++ctx.attempt;

        acquire_slot();
        const auto t0 = std::chrono::steady_clock::now();
        std::string text;
        try {
            text = backend_->complete(req, this_call);
        } catch (const BackendError &e) {
            release_slot();
            record.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            record.outcome = e.retryable() ? CallOutcome::TransientError : CallOutcome::PermanentError;
            record.detail = e.what();
            log_->append(std::move(record));
            if (!e.retryable() || transport_try + 1 >= max_attempts) throw;
            double unit = 0.0;
            {
                std::lock_guard lock(mu_);
                unit = std::uniform_real_distribution<double>(0.0, 1.0)(jitter_rng_);
            }
            options_.sleep(backoff_delay(options_.retry, transport_try, unit));
            continue;
        } catch (...) {
            release_slot();
            throw;
        }
        release_slot();
        record.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        if (accept) {
            try {
                accept(text);
            } catch (const ParseError &e) {
                record.outcome = CallOutcome::ParseRejected;
                record.detail = e.what();
                log_->append(std::move(record));
                throw;
            }
        }
        record.outcome = CallOutcome::Ok;
        log_->append(std::move(record));
        return text;
    }
}

void GatewayPool::add(const std::string &backend_id, std::shared_ptr<Gateway> gateway) {
    gateways_[backend_id] = std::move(gateway);
}

Gateway &GatewayPool::at(const std::string &backend_id) const {
    if (const auto it = gateways_.find(backend_id); it != gateways_.end()) return *it->second;
    if (fallback_) return *fallback_;
    throw ConfigError("no backend configured with id '" + backend_id + "'");
}

GatewayPool GatewayPool::single(std::shared_ptr<Gateway> gateway) {
    GatewayPool pool;
    pool.fallback_ = std::move(gateway);
    return pool;
}

}  // namespace panelsynth
