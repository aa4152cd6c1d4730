#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "panelsynth/dialogue.hpp"
#include "panelsynth/gateway.hpp"
#include "panelsynth/templates.hpp"

namespace panelsynth {

enum class FailureKind { ParseRetriesExhausted, BackendPermanent, RetriesExhausted, Timeout };

const char *to_string(FailureKind kind);

struct FailureInfo {
    FailureKind kind = FailureKind::BackendPermanent;
    std::string stage;  // "respond", "review", "ask"
    int turn_index = 0;
    int attempts = 0;
    std::string message;
};

struct DialogueResult {
    Conversation conversation;
    std::optional<FailureInfo> failure;
    // DuplicateTag warnings seen while parsing accepted completions.
    int parse_warnings = 0;
};

// Everything a dialogue needs besides its seed. Borrowed, not owned.
struct SynthesisEnv {
    const RunConfig &config;
    const TemplateSet &templates;
    const GatewayPool &gateways;
};

// Grows one seed into a conversation of config.total_turns (Q, A) pairs.
//
// Instruction-only seeds start at Respond; seeds with a response become turn 0 as-is and
// start at Review. Every turn but the last is reviewed by all reviewers (issued
// concurrently) and followed by the chairman's next question. A step whose completion
// fails to parse is re-sampled up to max_parse_retries times before the dialogue fails.
DialogueResult run_dialogue(const SeedInstruction &seed, const SynthesisEnv &env);

AgentManifest agent_manifest(const RunConfig &cfg);

struct BatchPaths {
    std::string output;       // ShareGPT-style JSONL
    std::string checkpoint;   // {seed_id, status, timestamp} per line
    std::string failure_log;  // {seed_id, stage, error, attempts} per line
};

// Derives checkpoint and failure-log names from the output path:
// data.jsonl -> data.checkpoint.jsonl, data.failures.jsonl.
BatchPaths batch_paths_for(const std::string &output);

struct BatchOptions {
    bool resume = false;
    // Polled before each dialogue starts; returning true drains the batch early.
    std::function<bool()> should_stop;
    // Called after a dialogue's records are durably written.
    std::function<void(const DialogueResult &)> on_written;
};

struct BatchSummary {
    std::size_t completed = 0;
    std::size_t failed = 0;
    std::size_t skipped_resumed = 0;
    std::map<std::string, std::size_t> error_counts;
    bool stopped_early = false;
};

// Runs up to config.concurrency_limit dialogues at a time. Records are written in seed
// order. With options.resume, seeds already in the checkpoint as complete, or already in
// the output file, are skipped. Throws IoError when a write fails; records written before
// the failure stay valid.
BatchSummary run_batch(std::span<const SeedInstruction> seeds, const SynthesisEnv &env, const BatchPaths &paths,
                       const BatchOptions &options = {});

// Seed ids recorded as complete in a checkpoint file (missing file -> empty).
std::vector<std::string> read_checkpoint_ids(const std::string &path);

}  // namespace panelsynth
