#include <doctest.h>

#include <set>

#include "panelsynth/dataset_io.hpp"
#include "panelsynth/errors.hpp"
#include "panelsynth/orchestrator.hpp"
#include "testkit.hpp"

using namespace panelsynth;
using testkit::entry;
using testkit::fault;
using testkit::MockRig;
using testkit::seed;

namespace {

// Call-count recurrence, written independently of the orchestrator loop.
struct Counts {
    std::size_t candidate, chairman, per_reviewer;
};

Counts expected_counts(int n, bool has_response) {
    Counts c{0, 0, 0};
    int turns = 0;
    bool need_answer = !has_response;
    while (true) {
        if (need_answer) ++c.candidate;
        ++turns;
        if (turns == n) break;
        ++c.per_reviewer;
        ++c.chairman;
        need_answer = true;
    }
    return c;
}

std::vector<std::string> role_sequence(const CallLog &log) {
    std::vector<std::string> out;
    for (const auto &r : log.records()) out.push_back(to_string(r.role));
    return out;
}

}  // namespace

TEST_SUITE("orchestrator") {

TEST_CASE("instruction-only seed, 2 turns, 2 reviewers: order and counts") {
    MockRig rig(testkit::generic_script(), testkit::run_config(2, 2));
    const auto r = run_dialogue(seed("s", "Q0"), rig.env());
    REQUIRE(r.conversation.complete());
    CHECK_NOTHROW(validate_conversation(r.conversation, 2));
    CHECK(r.conversation.turns[0].instruction == "Q0");
    CHECK(r.conversation.turns[0].answer == "A scripted answer.");
    CHECK(r.conversation.turns[1].instruction == "Can you expand on that?");
    REQUIRE(r.conversation.turns[0].reviews);
    CHECK(r.conversation.turns[0].reviews->critiques.size() == 2);
    CHECK(r.conversation.turns[0].reviews->critiques[0].reviewer_id == "reviewer-1");
    CHECK(role_sequence(*rig.log) ==
          std::vector<std::string>{"candidate", "reviewer", "reviewer", "chairman", "candidate"});
    CHECK(rig.count(RoleKind::Reviewer, 0) == 1);
    CHECK(rig.count(RoleKind::Reviewer, 1) == 1);
}

TEST_CASE("response seed, 3 turns, 3 reviewers") {
    MockRig rig(testkit::generic_script(), testkit::run_config(3, 3));
    const auto r = run_dialogue(seed("s", "Q0", std::string("A0")), rig.env());
    REQUIRE(r.conversation.complete());
    CHECK(r.conversation.turns[0].answer == "A0");
    CHECK(r.conversation.turns[0].origin == TurnOrigin::Seed);
    CHECK(r.conversation.turns[2].origin == TurnOrigin::ChairmanGenerated);
    CHECK(rig.count(RoleKind::Candidate) == 2);
    CHECK(rig.count(RoleKind::Chairman) == 2);
    for (int k = 0; k < 3; ++k) CHECK(rig.count(RoleKind::Reviewer, k) == 2);
    CHECK(rig.log->records().front().role == RoleKind::Reviewer);
}

TEST_CASE("single turn: one respond call only") {
    MockRig rig(testkit::generic_script(), testkit::run_config(1, 3));
    const auto r = run_dialogue(seed("s", "Q0"), rig.env());
    REQUIRE(r.conversation.complete());
    CHECK(r.conversation.turns.size() == 1);
    CHECK_FALSE(r.conversation.turns[0].reviews);
    CHECK(role_sequence(*rig.log) == std::vector<std::string>{"candidate"});
}

TEST_CASE("call-count law over a grid") {
    for (int n : {1, 2, 3, 4, 5}) {
        for (int k : {1, 2, 3}) {
            for (bool resp : {false, true}) {
                if (resp && n == 1) continue;
                MockRig rig(testkit::generic_script(), testkit::run_config(n, k));
                const auto r = run_dialogue(seed("s", "Q", resp ? std::optional<std::string>("A") : std::nullopt),
                                            rig.env());
                REQUIRE(r.conversation.complete());
                const auto want = expected_counts(n, resp);
                CHECK(rig.count(RoleKind::Candidate) == want.candidate);
                CHECK(rig.count(RoleKind::Chairman) == want.chairman);
                for (int j = 0; j < k; ++j) CHECK(rig.count(RoleKind::Reviewer, j) == want.per_reviewer);
                CHECK(r.conversation.turns.size() == static_cast<std::size_t>(n));
            }
        }
    }
}

TEST_CASE("response seed with a single turn makes no calls") {
    MockRig rig(testkit::generic_script(), testkit::run_config(1, 2));
    const auto r = run_dialogue(seed("s", "Q", std::string("A")), rig.env());
    CHECK(r.conversation.complete());
    CHECK(rig.log->size() == 0);
}

TEST_CASE("parse retries exhausted") {
    auto cfg = testkit::run_config(2, 1);
    cfg.max_parse_retries = 1;
    MockRig rig({entry(RoleKind::Candidate, "no tags here")}, cfg);
    const auto r = run_dialogue(seed("s", "Q"), rig.env());
    CHECK_FALSE(r.conversation.complete());
    REQUIRE(r.failure);
    CHECK(r.failure->kind == FailureKind::ParseRetriesExhausted);
    CHECK(r.failure->stage == "respond");
    CHECK(rig.count(RoleKind::Candidate) == 2);
    for (const auto &rec : rig.log->records()) CHECK(rec.outcome == CallOutcome::ParseRejected);
}

TEST_CASE("parse retry recovers on a later attempt") {
    auto entries = testkit::generic_script();
    entries.push_back(entry(RoleKind::Candidate, "oops", "*", 0, std::nullopt, 0));
    MockRig rig(entries, testkit::run_config(1, 1));
    const auto r = run_dialogue(seed("s", "Q"), rig.env());
    CHECK(r.conversation.complete());
    CHECK(rig.count(RoleKind::Candidate) == 2);
}

TEST_CASE("think content and duplicate warnings") {
    MockRig rig({entry(RoleKind::Candidate, "<think>SECRET</think><respond>a</respond><respond>b</respond>")},
                testkit::run_config(1, 1));
    const auto r = run_dialogue(seed("s", "Q"), rig.env());
    CHECK(r.conversation.turns[0].answer == "a");
    CHECK(r.parse_warnings == 1);
}

TEST_CASE("permanent backend failure fails the dialogue at the failing stage") {
    auto entries = testkit::generic_script();
    entries.push_back(fault(RoleKind::Chairman, BackendErrorKind::Permanent, "s"));
    MockRig rig(entries, testkit::run_config(3, 2));
    const auto r = run_dialogue(seed("s", "Q"), rig.env());
    REQUIRE(r.failure);
    CHECK(r.failure->kind == FailureKind::BackendPermanent);
    CHECK(r.failure->stage == "ask");
    CHECK(r.failure->turn_index == 1);
}

TEST_CASE("reviewer calls overlap") {
    auto entries = testkit::generic_script();
    entries[1].reply.delay = std::chrono::milliseconds(30);
    MockRig rig(entries, testkit::run_config(2, 3));
    run_dialogue(seed("s", "Q"), rig.env());
    CHECK(rig.backend->max_in_flight() == 3);
}

TEST_CASE("batch: all succeed, output in seed order") {
    testkit::TempDir dir;
    auto cfg = testkit::run_config(2, 2);
    cfg.concurrency_limit = 3;
    auto entries = testkit::generic_script();
    // Slow first seed so later ones finish first.
    auto slow = entry(RoleKind::Candidate, "<respond>slow</respond>", "s0", 0);
    slow.reply.delay = std::chrono::milliseconds(40);
    entries.push_back(slow);
    MockRig rig(entries, cfg);
    const std::vector<SeedInstruction> seeds = {seed("s0", "Q0"), seed("s1", "Q1"), seed("s2", "Q2")};
    const auto paths = batch_paths_for(dir.file("data.jsonl"));
    const auto summary = run_batch(seeds, rig.env(), paths);
    CHECK(summary.completed == 3);
    CHECK(summary.failed == 0);
    CHECK(summary.skipped_resumed == 0);
    const auto dialogues = load_dialogues(paths.output);
    REQUIRE(dialogues.size() == 3);
    CHECK(dialogues[0].id == "s0");
    CHECK(dialogues[1].id == "s1");
    CHECK(dialogues[2].id == "s2");
    CHECK(read_checkpoint_ids(paths.checkpoint).size() == 3);
    CHECK(paths.checkpoint == dir.file("data.checkpoint.jsonl"));
}

TEST_CASE("batch: resume after interruption") {
    testkit::TempDir dir;
    auto cfg = testkit::run_config(2, 1);
    cfg.concurrency_limit = 1;
    const std::vector<SeedInstruction> seeds = {seed("s0", "Q0"), seed("s1", "Q1"), seed("s2", "Q2")};
    const auto paths = batch_paths_for(dir.file("data.jsonl"));
    {
        MockRig rig(testkit::generic_script(), cfg);
        int started = 0;
        BatchOptions opts;
        opts.should_stop = [&] { return started++ >= 2; };
        const auto first = run_batch(seeds, rig.env(), paths, opts);
        CHECK(first.completed == 2);
        CHECK(first.stopped_early);
    }
    MockRig rig(testkit::generic_script(), cfg);
    BatchOptions opts;
    opts.resume = true;
    const auto second = run_batch(seeds, rig.env(), paths, opts);
    CHECK(second.completed == 1);
    CHECK(second.failed == 0);
    CHECK(second.skipped_resumed == 2);
    std::set<std::string> ids;
    const auto dialogues = load_dialogues(paths.output);
    for (const auto &d : dialogues) ids.insert(d.id);
    CHECK(dialogues.size() == 3);
    CHECK(ids.size() == 3);
}

TEST_CASE("batch: resume repairs a torn tail and honors ids already in the output") {
    testkit::TempDir dir;
    auto cfg = testkit::run_config(1, 1);
    const std::vector<SeedInstruction> seeds = {seed("s0", "Q0"), seed("s1", "Q1")};
    const auto paths = batch_paths_for(dir.file("data.jsonl"));
    // s0 reached the dataset but not the checkpoint; s1 was cut mid-line.
    testkit::write_text(paths.output, R"({"id":"s0","conversations":[{"from":"human","value":"Q0"},{"from":"gpt","value":"x"}]})"
                                      "\n{\"id\":\"s1\",\"conv");
    MockRig rig(testkit::generic_script(), cfg);
    BatchOptions opts;
    opts.resume = true;
    const auto s = run_batch(seeds, rig.env(), paths, opts);
    CHECK(s.skipped_resumed == 1);
    CHECK(s.completed == 1);
    const auto dialogues = load_dialogues(paths.output);
    REQUIRE(dialogues.size() == 2);
    CHECK(dialogues[1].id == "s1");
    CHECK(read_checkpoint_ids(paths.checkpoint).size() == 2);
}

TEST_CASE("batch: permanent failure is logged, not exported") {
    testkit::TempDir dir;
    MockRig rig({fault(RoleKind::Candidate, BackendErrorKind::Permanent)}, testkit::run_config(2, 1));
    const std::vector<SeedInstruction> seeds = {seed("bad", "Q")};
    const auto paths = batch_paths_for(dir.file("data.jsonl"));
    const auto s = run_batch(seeds, rig.env(), paths);
    CHECK(s.completed == 0);
    CHECK(s.failed == 1);
    CHECK(s.skipped_resumed == 0);
    CHECK(s.error_counts.at("BackendPermanent") == 1);
    CHECK(testkit::read_text(paths.output).empty());
    const auto failures = testkit::read_nonempty_lines(paths.failure_log);
    REQUIRE(failures.size() == 1);
    const auto j = nlohmann::json::parse(failures[0]);
    CHECK(j["seed_id"] == "bad");
    CHECK(j["stage"] == "respond");
    CHECK(j["attempts"] == 1);
    CHECK(j.contains("error"));
}

TEST_CASE("failed seeds are retried on resume") {
    testkit::TempDir dir;
    const std::vector<SeedInstruction> seeds = {seed("s", "Q")};
    const auto paths = batch_paths_for(dir.file("data.jsonl"));
    {
        MockRig rig({fault(RoleKind::Candidate, BackendErrorKind::Permanent)}, testkit::run_config(1, 1));
        CHECK(run_batch(seeds, rig.env(), paths).failed == 1);
    }
    MockRig rig(testkit::generic_script(), testkit::run_config(1, 1));
    BatchOptions opts;
    opts.resume = true;
    const auto s = run_batch(seeds, rig.env(), paths, opts);
    CHECK(s.completed == 1);
    CHECK(s.skipped_resumed == 0);
}

TEST_CASE("agent manifest lists model names") {
    auto cfg = testkit::run_config(2, 2);
    cfg.chairman.model_name = "chair-m";
    cfg.reviewers[1].model_name = "rev-m";
    const auto m = agent_manifest(cfg);
    CHECK(m.chairman == "chair-m");
    CHECK(m.reviewers == std::vector<std::string>{"unset", "rev-m"});
}

}
