#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "panelsynth/errors.hpp"
#include "panelsynth/gateway.hpp"

namespace panelsynth {

// Lookup key for a canned reply. Unset optionals and a seed_id of "*" match anything;
// when several entries match, the one with the most specific fields wins
// (seed > turn > attempt > reviewer).
//
// Turn numbering: candidate and reviewer calls use the index of the turn they answer or
// review; the chairman uses the index of the turn whose question it writes.
struct ScriptKey {
    RoleKind role = RoleKind::Candidate;
    std::optional<int> reviewer_index;
    std::string seed_id = "*";
    std::optional<int> turn_index;
    std::optional<int> attempt;

    bool operator==(const ScriptKey &) const = default;
};

std::string describe(const ScriptKey &key);

struct ScriptReply {
    std::string text;
    std::optional<BackendErrorKind> fault;
    std::chrono::milliseconds delay{0};
};

struct ScriptEntry {
    ScriptKey key;
    ScriptReply reply;
};

struct TranscriptEntry {
    CallContext context;
    std::string request_digest;  // sha256 of the rendered messages
    std::string reply;           // text, or "!<fault>" for injected faults

    bool operator==(const TranscriptEntry &other) const;
};

// Deterministic stand-in for a chat service. Replays canned replies, records every call,
// and tracks how many calls overlap in time.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> entries);

    std::string complete(const CompletionRequest &req, const CallContext &ctx) override;
    std::string describe() const override { return "scripted-mock"; }

    std::vector<TranscriptEntry> transcript() const;
    int max_in_flight() const noexcept { return max_in_flight_.load(); }
    std::size_t call_count() const;

private:
    const ScriptEntry *lookup(const CallContext &ctx) const;

    std::vector<ScriptEntry> entries_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_seed_;
    mutable std::mutex mu_;
    std::vector<TranscriptEntry> transcript_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

// Throws ConfigError(DuplicateKey) when two entries share a key.
std::shared_ptr<ScriptedBackend> script_mock(std::vector<ScriptEntry> entries);

// JSON form: {"entries": [{"role": "candidate", "seed_id": "s1", "turn": 0, "attempt": 0,
// "reviewer": 1, "text": "...", "error": "transient|permanent|timeout", "delay_ms": 5}]}
// Every field other than role is optional.
std::vector<ScriptEntry> load_mock_script(const std::string &path);
std::vector<ScriptEntry> parse_mock_script(const std::string &json_text);
std::string dump_mock_script(const std::vector<ScriptEntry> &entries);

// Digest of a message list; used for transcript comparison.
std::string messages_digest(const std::vector<ChatMessage> &messages);

}  // namespace panelsynth
