#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace panelsynth {

enum class RoleKind { Chairman, Candidate, Reviewer, Judge, Tagger };

const char *to_string(RoleKind role);
RoleKind role_from_string(std::string_view name);

// A seed record as read from disk, before normalization.
struct RawSeed {
    std::optional<std::string> id;
    std::string instruction;
    std::optional<std::string> response;
    std::string source_tag;
};

struct SeedInstruction {
    std::string id;
    std::string instruction;
    std::optional<std::string> response;
    std::string source_tag;

    bool operator==(const SeedInstruction &) const = default;
};

struct Critique {
    std::string reviewer_id;
    std::string text;

    bool operator==(const Critique &) const = default;
};

struct ReviewSet {
    std::vector<Critique> critiques;

    bool operator==(const ReviewSet &) const = default;
};

enum class TurnOrigin { Seed, ChairmanGenerated };

struct Turn {
    int index = 0;
    std::string instruction;
    std::string answer;
    // Absent on the last turn of a conversation.
    std::optional<ReviewSet> reviews;
    TurnOrigin origin = TurnOrigin::Seed;

    bool operator==(const Turn &) const = default;
};

enum class ConversationStatus { Complete, Failed };

struct AgentManifest {
    std::string chairman;
    std::string candidate;
    std::vector<std::string> reviewers;

    bool operator==(const AgentManifest &) const = default;
};

struct Conversation {
    std::string seed_id;
    std::vector<Turn> turns;
    ConversationStatus status = ConversationStatus::Complete;
    std::optional<std::string> failure_reason;
    AgentManifest agent_manifest;

    bool complete() const noexcept { return status == ConversationStatus::Complete; }
    bool operator==(const Conversation &) const = default;
};

struct AgentProfile {
    // Unique label within a run; used as the reviewer id in critiques.
    std::string name;
    std::string backend_id;
    std::string model_name;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    int word_limit = 300;

    bool operator==(const AgentProfile &) const = default;
};

struct RetryPolicy {
    int max_attempts = 5;
    int base_delay_ms = 1000;
    int max_delay_ms = 60000;

    bool operator==(const RetryPolicy &) const = default;
};

struct RunConfig {
    // (Q, A) pairs per exported conversation, the seed pair included.
    int total_turns = 3;
    int reviewer_count = 3;
    int max_parse_retries = 3;
    int concurrency_limit = 4;
    AgentProfile chairman;
    AgentProfile candidate;
    std::vector<AgentProfile> reviewers;
    std::optional<AgentProfile> difficulty_judge;
    std::optional<AgentProfile> tagger;
    RetryPolicy retry;

    bool operator==(const RunConfig &) const = default;
};

// Throws ConfigError when a limit or profile is out of range.
void validate_profile(const AgentProfile &profile, std::string_view role);
void validate_run_config(const RunConfig &cfg);

// Hex SHA-256 over a length-prefixed encoding of (instruction, response).
std::string seed_content_id(std::string_view instruction, const std::optional<std::string> &response);

std::string trim(std::string_view text);

SeedInstruction validate_seed(const RawSeed &raw);

// Validates each record and rejects repeated ids.
std::vector<SeedInstruction> validate_seeds(std::span<const RawSeed> raws);

// Checks turn numbering, nonempty text, and the review-on-every-turn-but-the-last rule.
// expected_turns < 0 skips the length check.
void validate_conversation(const Conversation &conv, int expected_turns = -1);

}  // namespace panelsynth
