#include "panelsynth/dialogue.hpp"

#include <cmath>
#include <unordered_set>

#include "panelsynth/errors.hpp"
#include "panelsynth/hashing.hpp"

namespace panelsynth {

const char *to_string(ValidationCode code) {
    switch (code) {
        case ValidationCode::EmptyInstruction: return "EmptyInstruction";
        case ValidationCode::EmptyAnswer: return "EmptyAnswer";
        case ValidationCode::EmptyResponse: return "EmptyResponse";
        case ValidationCode::DuplicateId: return "DuplicateId";
        case ValidationCode::EmptyReviewSet: return "EmptyReviewSet";
        case ValidationCode::EmptyDataset: return "EmptyDataset";
        case ValidationCode::EmptyRound: return "EmptyRound";
        case ValidationCode::FailedConversationInExport: return "FailedConversationInExport";
        case ValidationCode::BadTurnSequence: return "BadTurnSequence";
        case ValidationCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

const char *to_string(ParseCode code) {
    switch (code) {
        case ParseCode::MissingRequiredTag: return "MissingRequiredTag";
        case ParseCode::EmptyTagBody: return "EmptyTagBody";
        case ParseCode::UnterminatedTag: return "UnterminatedTag";
        case ParseCode::MalformedNesting: return "MalformedNesting";
        case ParseCode::BadJudgeJson: return "BadJudgeJson";
        case ParseCode::BadTaggerOutput: return "BadTaggerOutput";
    }
    return "Unknown";
}

const char *to_string(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::Transient: return "Transient";
        case BackendErrorKind::Permanent: return "Permanent";
        case BackendErrorKind::Timeout: return "Timeout";
    }
    return "Unknown";
}

const char *to_string(RoleKind role) {
    switch (role) {
        case RoleKind::Chairman: return "chairman";
        case RoleKind::Candidate: return "candidate";
        case RoleKind::Reviewer: return "reviewer";
        case RoleKind::Judge: return "judge";
        case RoleKind::Tagger: return "tagger";
    }
    return "unknown";
}

RoleKind role_from_string(std::string_view name) {
    if (name == "chairman") return RoleKind::Chairman;
    if (name == "candidate") return RoleKind::Candidate;
    if (name == "reviewer") return RoleKind::Reviewer;
    if (name == "judge") return RoleKind::Judge;
    if (name == "tagger") return RoleKind::Tagger;
    throw ConfigError("unknown role kind '" + std::string(name) + "'");
}

std::string trim(std::string_view text) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(ws);
    return std::string(text.substr(first, last - first + 1));
}

void validate_profile(const AgentProfile &profile, std::string_view role) {
    const std::string where = std::string(role) + " profile";
    if (profile.backend_id.empty()) throw ConfigError(where + ": backend_id is empty");
    if (profile.model_name.empty()) throw ConfigError(where + ": model_name is empty");
    if (!std::isfinite(profile.temperature) || profile.temperature < 0.0) {
        throw ConfigError(where + ": temperature must be finite and >= 0");
    }
    if (profile.max_output_tokens <= 0) throw ConfigError(where + ": max_output_tokens must be > 0");
    if (profile.word_limit <= 0) throw ConfigError(where + ": word_limit must be > 0");
}

void validate_run_config(const RunConfig &cfg) {
    if (cfg.total_turns < 1) throw ConfigError("total_turns must be >= 1");
    if (cfg.reviewer_count < 1) throw ConfigError("reviewer_count must be >= 1");
    if (cfg.max_parse_retries < 0) throw ConfigError("max_parse_retries must be >= 0");
    if (cfg.concurrency_limit < 1) throw ConfigError("concurrency_limit must be >= 1");
    if (cfg.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    if (cfg.retry.base_delay_ms < 0 || cfg.retry.max_delay_ms < cfg.retry.base_delay_ms) {
        throw ConfigError("retry delays must satisfy 0 <= base_delay_ms <= max_delay_ms");
    }
    if (static_cast<int>(cfg.reviewers.size()) != cfg.reviewer_count) {
        throw ConfigError("reviewer_count is " + std::to_string(cfg.reviewer_count) + " but " +
                          std::to_string(cfg.reviewers.size()) + " reviewer profiles are configured");
    }
    validate_profile(cfg.chairman, "chairman");
    validate_profile(cfg.candidate, "candidate");
    std::unordered_set<std::string> names;
    for (const auto &r : cfg.reviewers) {
        validate_profile(r, "reviewer");
        if (r.name.empty()) throw ConfigError("reviewer profile without a name");
        if (!names.insert(r.name).second) throw ConfigError("duplicate reviewer name '" + r.name + "'");
    }
    if (cfg.difficulty_judge) validate_profile(*cfg.difficulty_judge, "difficulty_judge");
    if (cfg.tagger) validate_profile(*cfg.tagger, "tagger");
}

std::string seed_content_id(std::string_view instruction, const std::optional<std::string> &response) {
    // Length prefixes keep ("ab", "c") and ("a", "bc") apart.
    std::string canonical;
    canonical += "i:" + std::to_string(instruction.size()) + ":";
    canonical += instruction;
    if (response) {
        canonical += ";r:" + std::to_string(response->size()) + ":";
        canonical += *response;
    } else {
        canonical += ";r:-";
    }
    return sha256_hex(canonical);
}

SeedInstruction validate_seed(const RawSeed &raw) {
    SeedInstruction seed;
    seed.instruction = trim(raw.instruction);
    if (seed.instruction.empty()) {
        throw ValidationError(ValidationCode::EmptyInstruction,
                              "seed" + (raw.id ? " '" + *raw.id + "'" : std::string()) + " has no instruction text");
    }
    if (raw.response) {
        auto response = trim(*raw.response);
        if (!response.empty()) seed.response = std::move(response);
    }
    seed.source_tag = raw.source_tag;
    if (raw.id && !trim(*raw.id).empty()) {
        seed.id = trim(*raw.id);
    } else {
        seed.id = seed_content_id(seed.instruction, seed.response);
    }
    return seed;
}

std::vector<SeedInstruction> validate_seeds(std::span<const RawSeed> raws) {
    std::vector<SeedInstruction> seeds;
    seeds.reserve(raws.size());
    std::unordered_set<std::string> seen;
    for (const auto &raw : raws) {
        auto seed = validate_seed(raw);
        if (!seen.insert(seed.id).second) {
            throw ValidationError(ValidationCode::DuplicateId, "seed id '" + seed.id + "' appears more than once");
        }
        seeds.push_back(std::move(seed));
    }
    return seeds;
}

void validate_conversation(const Conversation &conv, int expected_turns) {
    auto fail = [&](const std::string &what) {
        throw ValidationError(ValidationCode::BadTurnSequence, "conversation '" + conv.seed_id + "': " + what);
    };
    if (conv.status == ConversationStatus::Failed) {
        if (!conv.failure_reason || conv.failure_reason->empty()) fail("failed without a reason");
        return;
    }
    if (conv.turns.empty()) fail("no turns");
    if (expected_turns >= 0 && static_cast<int>(conv.turns.size()) != expected_turns) {
        fail("expected " + std::to_string(expected_turns) + " turns, found " + std::to_string(conv.turns.size()));
    }
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
        const auto &t = conv.turns[i];
        if (t.index != static_cast<int>(i)) fail("turn indices are not consecutive from 0");
        if (t.instruction.empty()) fail("turn " + std::to_string(i) + " has an empty instruction");
        if (t.answer.empty()) fail("turn " + std::to_string(i) + " has an empty answer");
        const bool last = i + 1 == conv.turns.size();
        if (last && t.reviews) fail("last turn carries reviews");
        if (!last && (!t.reviews || t.reviews->critiques.empty())) {
            fail("turn " + std::to_string(i) + " is missing its reviews");
        }
    }
}

}  // namespace panelsynth
