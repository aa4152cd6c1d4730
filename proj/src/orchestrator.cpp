#include "panelsynth/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "panelsynth/actions.hpp"
#include "panelsynth/agents.hpp"
#include "panelsynth/dataset_io.hpp"
#include "panelsynth/errors.hpp"

namespace panelsynth {

namespace {

// Raised inside a dialogue when a step cannot produce a usable completion.
struct StepFailed {
    FailureInfo info;
};

FailureKind failure_for(const BackendError &e) {
    switch (e.kind()) {
        case BackendErrorKind::Permanent: return FailureKind::BackendPermanent;
        case BackendErrorKind::Timeout: return FailureKind::Timeout;
        case BackendErrorKind::Transient: return FailureKind::RetriesExhausted;
    }
    return FailureKind::BackendPermanent;
}

struct StepResult {
    std::string body;
    int warnings = 0;
};

StepResult call_agent(const SynthesisEnv &env, const AgentProfile &profile, RoleKind role, int reviewer_index,
                      const std::string &seed_id, int turn_index, const char *stage,
                      std::vector<ChatMessage> messages) {
    CallContext ctx;
    ctx.role = role;
    ctx.reviewer_index = reviewer_index;
    ctx.seed_id = seed_id;
    ctx.turn_index = turn_index;

    CompletionRequest req;
    req.messages = std::move(messages);
    req.model_name = profile.model_name;
    req.temperature = profile.temperature;
    req.max_output_tokens = profile.max_output_tokens;
    req.request_id = seed_id + "/" + std::to_string(turn_index) + "/" + to_string(role);
    if (reviewer_index >= 0) req.request_id += std::to_string(reviewer_index);

    auto &gateway = env.gateways.at(profile.backend_id);
    const auto required = required_action_for(role);
    for (int parse_try = 0;; ++parse_try) {
        StepResult result;
        try {
            gateway.complete(req, ctx, [&](const std::string &raw) {
                auto parsed = parse_actions(raw, required);
                result.warnings = static_cast<int>(parsed.warnings.size());
                result.body = strip_think(std::move(parsed.actions)).at(required);
            });
            return result;
        } catch (const ParseError &e) {
            if (parse_try >= env.config.max_parse_retries) {
                throw StepFailed{{FailureKind::ParseRetriesExhausted, stage, turn_index, ctx.attempt, e.what()}};
            }
        } catch (const BackendError &e) {
            throw StepFailed{{failure_for(e), stage, turn_index, ctx.attempt, e.what()}};
        }
    }
}

ReviewSet review_turn(const SynthesisEnv &env, const std::string &seed_id, std::span<const Turn> history,
                      const Turn &turn, int &warnings) {
    const auto &cfg = env.config;
    std::vector<std::future<StepResult>> pending;
    pending.reserve(cfg.reviewers.size());
    for (std::size_t r = 0; r < cfg.reviewers.size(); ++r) {
        const auto &profile = cfg.reviewers[r];
        auto msgs = build_reviewer_messages(env.templates.reviewer, history, turn.instruction, turn.answer,
                                            profile.word_limit);
        pending.push_back(std::async(std::launch::async, [&env, &profile, &seed_id, r, idx = turn.index,
                                                          msgs = std::move(msgs)]() mutable {
            return call_agent(env, profile, RoleKind::Reviewer, static_cast<int>(r), seed_id, idx, "review",
                              std::move(msgs));
        }));
    }

    ReviewSet reviews;
    std::optional<StepFailed> first_failure;
    for (std::size_t r = 0; r < pending.size(); ++r) {
        try {
            auto result = pending[r].get();
            warnings += result.warnings;
            reviews.critiques.push_back({cfg.reviewers[r].name, std::move(result.body)});
        } catch (const StepFailed &f) {
            if (!first_failure) first_failure = f;
        }
    }
    if (first_failure) throw *first_failure;
    return reviews;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

const char *to_string(FailureKind kind) {
    switch (kind) {
        case FailureKind::ParseRetriesExhausted: return "ParseRetriesExhausted";
        case FailureKind::BackendPermanent: return "BackendPermanent";
        case FailureKind::RetriesExhausted: return "RetriesExhausted";
        case FailureKind::Timeout: return "Timeout";
    }
    return "Unknown";
}

AgentManifest agent_manifest(const RunConfig &cfg) {
    AgentManifest m;
    m.chairman = cfg.chairman.model_name;
    m.candidate = cfg.candidate.model_name;
    for (const auto &r : cfg.reviewers) m.reviewers.push_back(r.model_name);
    return m;
}

DialogueResult run_dialogue(const SeedInstruction &seed, const SynthesisEnv &env) {
    const auto &cfg = env.config;
    DialogueResult result;
    auto &conv = result.conversation;
    conv.seed_id = seed.id;
    conv.agent_manifest = agent_manifest(cfg);

    const auto respond = [&](const std::string &question, int index) {
        auto messages = build_candidate_messages(env.templates.candidate, conv.turns, question,
                                                 cfg.candidate.word_limit);
        auto step = call_agent(env, cfg.candidate, RoleKind::Candidate, -1, seed.id, index, "respond",
                               std::move(messages));
        result.parse_warnings += step.warnings;
        return std::move(step.body);
    };

    try {
        if (seed.response) {
            conv.turns.push_back({0, seed.instruction, *seed.response, std::nullopt, TurnOrigin::Seed});
        } else {
            auto answer = respond(seed.instruction, 0);
            conv.turns.push_back({0, seed.instruction, std::move(answer), std::nullopt, TurnOrigin::Seed});
        }

        while (static_cast<int>(conv.turns.size()) < cfg.total_turns) {
            const int next = static_cast<int>(conv.turns.size());
            const std::span<const Turn> history(conv.turns.data(), conv.turns.size() - 1);
            conv.turns.back().reviews = review_turn(env, seed.id, history, conv.turns.back(), result.parse_warnings);

            auto ask_messages = build_chairman_messages(env.templates.chairman, conv.turns, *conv.turns.back().reviews,
                                                        cfg.chairman.word_limit);
            auto ask = call_agent(env, cfg.chairman, RoleKind::Chairman, -1, seed.id, next, "ask",
                                  std::move(ask_messages));
            result.parse_warnings += ask.warnings;

            auto answer = respond(ask.body, next);
            conv.turns.push_back({next, std::move(ask.body), std::move(answer), std::nullopt,
                                  TurnOrigin::ChairmanGenerated});
        }
        conv.status = ConversationStatus::Complete;
    } catch (const StepFailed &f) {
        conv.status = ConversationStatus::Failed;
        conv.failure_reason = std::string(to_string(f.info.kind)) + " at " + f.info.stage + " of turn " +
                              std::to_string(f.info.turn_index) + ": " + f.info.message;
        result.failure = f.info;
    }
    return result;
}

BatchPaths batch_paths_for(const std::string &output) {
    std::filesystem::path p(output);
    auto stem = p;
    if (p.extension() == ".jsonl" || p.extension() == ".json") stem.replace_extension();
    return {output, stem.string() + ".checkpoint.jsonl", stem.string() + ".failures.jsonl"};
}

std::vector<std::string> read_checkpoint_ids(const std::string &path) {
    std::vector<std::string> ids;
    for (const auto &line : read_lines(path)) {
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            if (j.value("status", std::string()) == "complete") ids.push_back(j.at("seed_id").get<std::string>());
        } catch (const nlohmann::json::exception &) {
            // A torn final line from an interrupted run carries no completed work.
        }
    }
    return ids;
}

namespace {

class BatchWriter {
public:
    BatchWriter(const BatchPaths &paths, bool resume) {
        const auto mode = std::ios::binary | (resume ? std::ios::app : std::ios::trunc);
        output_.open(paths.output, mode);
        checkpoint_.open(paths.checkpoint, mode);
        failures_.open(paths.failure_log, mode);
        if (!output_) throw IoError("cannot open output '" + paths.output + "'");
        if (!checkpoint_) throw IoError("CheckpointWrite: cannot open '" + paths.checkpoint + "'");
        if (!failures_) throw IoError("cannot open failure log '" + paths.failure_log + "'");
    }

    void mark_done_without_checkpoint(const std::string &seed_id) { checkpoint_line(seed_id, "complete"); }

    void write(const DialogueResult &r) {
        const auto &conv = r.conversation;
        if (conv.complete()) {
            output_ << export_line(conv) << '\n';
            output_.flush();
            if (!output_) throw IoError("write to dataset failed");
            checkpoint_line(conv.seed_id, "complete");
        } else {
            nlohmann::ordered_json j;
            j["seed_id"] = conv.seed_id;
            j["stage"] = r.failure ? r.failure->stage : "";
            j["error"] = conv.failure_reason.value_or("");
            j["attempts"] = r.failure ? r.failure->attempts : 0;
            failures_ << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
            failures_.flush();
            if (!failures_) throw IoError("write to failure log failed");
            checkpoint_line(conv.seed_id, "failed");
        }
    }

private:
    void checkpoint_line(const std::string &seed_id, const char *status) {
        nlohmann::ordered_json j;
        j["seed_id"] = seed_id;
        j["status"] = status;
        j["timestamp"] = utc_timestamp();
        checkpoint_ << j.dump() << '\n';
        checkpoint_.flush();
        if (!checkpoint_) throw IoError("CheckpointWrite: checkpoint write failed");
    }

    std::ofstream output_;
    std::ofstream checkpoint_;
    std::ofstream failures_;
};

}  // namespace

BatchSummary run_batch(std::span<const SeedInstruction> seeds, const SynthesisEnv &env, const BatchPaths &paths,
                       const BatchOptions &options) {
    validate_run_config(env.config);
    BatchSummary summary;

    std::unordered_set<std::string> done;
    std::unordered_set<std::string> in_output;
    if (options.resume) {
        for (auto &id : read_checkpoint_ids(paths.checkpoint)) done.insert(std::move(id));
        for (const auto &line : read_lines(paths.output, /*repair_tail=*/true)) {
            if (trim(line).empty()) continue;
            try {
                in_output.insert(parse_export_line(line, 0).id);
            } catch (const FormatError &) {
            }
        }
        // Also drop a torn trailing line from the side logs before appending to them.
        read_lines(paths.checkpoint, true);
        read_lines(paths.failure_log, true);
    }

    BatchWriter writer(paths, options.resume);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto &id = seeds[i].id;
        if (done.count(id) || in_output.count(id)) {
            // Written to the dataset but killed before its checkpoint line landed.
            if (!done.count(id)) writer.mark_done_without_checkpoint(id);
            ++summary.skipped_resumed;
        } else {
            todo.push_back(i);
        }
    }

    std::mutex mu;
    std::map<std::size_t, DialogueResult> ready;  // keyed by position in todo
    std::size_t next_to_write = 0;
    std::atomic<std::size_t> next_to_run{0};
    std::atomic<bool> abort{false};
    std::atomic<bool> stopped{false};
    std::exception_ptr io_failure;

    const auto flush_ready = [&](bool drain) {
        while (!ready.empty()) {
            auto it = ready.begin();
            if (!drain && it->first != next_to_write) break;
            const auto &r = it->second;
            writer.write(r);
            if (r.conversation.complete()) {
                ++summary.completed;
            } else {
                ++summary.failed;
                ++summary.error_counts[r.failure ? to_string(r.failure->kind) : "Unknown"];
            }
            if (options.on_written) options.on_written(r);
            next_to_write = it->first + 1;
            ready.erase(it);
        }
    };

    const auto worker = [&] {
        while (!abort) {
            if (options.should_stop && options.should_stop()) {
                stopped = true;
                return;
            }
            const auto slot = next_to_run.fetch_add(1);
            if (slot >= todo.size()) return;
            auto result = run_dialogue(seeds[todo[slot]], env);
            std::lock_guard lock(mu);
            if (abort) return;
            ready.emplace(slot, std::move(result));
            try {
                flush_ready(false);
            } catch (...) {
                io_failure = std::current_exception();
                abort = true;
            }
        }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(env.config.concurrency_limit), todo.size());
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (io_failure) std::rethrow_exception(io_failure);

    // Work finished out of order when the batch stopped early.
    flush_ready(true);
    summary.stopped_early = stopped;
    return summary;
}

}  // namespace panelsynth
