// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Everything runs against the scripted mock backend.

#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "panelsynth/actions.hpp"
#include "panelsynth/analysis.hpp"
#include "panelsynth/cli.hpp"
#include "panelsynth/dataset_io.hpp"
#include "panelsynth/errors.hpp"
#include "panelsynth/http_backend.hpp"
#include "panelsynth/metrics.hpp"
#include "panelsynth/orchestrator.hpp"
#include "testkit.hpp"

using namespace panelsynth;
using testkit::entry;
using testkit::fault;
using testkit::MockRig;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first failure message; later checks still run.
class Check {
public:
    void expect(bool ok, const std::string &what) {
        if (!ok && out_.pass) {
            out_.pass = false;
            out_.detail = what;
        }
    }
    Outcome done(std::string ok_detail) {
        if (out_.pass) out_.detail = std::move(ok_detail);
        return out_;
    }

private:
    Outcome out_;
};

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "panelsynth");
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string think_free_script(const std::string &marker) {
    return R"({"entries": [
      {"role": "candidate", "text": "<think>)" + marker + R"(-THINK-C</think><respond>Answer text.</respond>"},
      {"role": "reviewer", "text": "<think>)" + marker + R"(-THINK-R</think><criticize>)" + marker + R"(-CRITIQUE</criticize>"},
      {"role": "chairman", "text": "<think>)" + marker + R"(-THINK-H</think><ask>A follow-up question?</ask>"},
      {"role": "judge", "text": "{\"intent\": \"x\", \"knowledge\": \"y\", \"difficulty\": \"hard\"}"},
      {"role": "tagger", "text": "[\"general\", \"follow-up\"]"}]})";
}

// ---------------------------------------------------------------------------------------

Outcome trace_fidelity() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    int cases = 0;
    for (int n : {1, 2, 3, 5}) {
        for (int k : {1, 2, 3}) {
            for (bool response : {false, true}) {
                MockRig rig(testkit::generic_script(), testkit::run_config(n, k));
                const auto r = run_dialogue(
                    testkit::seed("s", "Q", response ? std::optional<std::string>("A") : std::nullopt), rig.env());
                const std::size_t cand = response ? n - 1 : n;
                const std::size_t rest = n - 1;
                std::ostringstream tag;
                tag << "N=" << n << " K=" << k << (response ? " with response" : " instruction-only");
                c.expect(r.conversation.complete(), tag.str() + ": dialogue failed");
                c.expect(rig.count(RoleKind::Candidate) == cand, tag.str() + ": candidate count");
                c.expect(rig.count(RoleKind::Chairman) == rest, tag.str() + ": chairman count");
                for (int j = 0; j < k; ++j) {
                    c.expect(rig.count(RoleKind::Reviewer, j) == rest, tag.str() + ": reviewer count");
                }
                ++cases;
            }
        }
    }
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    c.expect(ms < 5000.0, "took " + std::to_string(ms) + " ms");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d configurations, exact counts, %.0f ms", cases, ms);
    return c.done(buf);
}

Outcome entry_points() {
    Check c;
    for (int k : {1, 3}) {
        MockRig with(testkit::generic_script(), testkit::run_config(3, k));
        run_dialogue(testkit::seed("s", "Q", std::string("A")), with.env());
        const auto a = with.log->records();
        c.expect(!a.empty() && a.front().role == RoleKind::Reviewer, "response seed did not start at review");

        MockRig without(testkit::generic_script(), testkit::run_config(3, k));
        run_dialogue(testkit::seed("s", "Q"), without.env());
        const auto b = without.log->records();
        c.expect(!b.empty() && b.front().role == RoleKind::Candidate, "instruction seed did not start at respond");
    }
    return c.done("first call: Reviewer with response, Candidate without");
}

Outcome alpaca_scale_run() {
    Check c;
    testkit::TempDir dir;
    nlohmann::ordered_json alpaca = nlohmann::ordered_json::array();
    for (int i = 0; i < 10; ++i) {
        alpaca.push_back({{"instruction", "Seed instruction number " + std::to_string(i) + "."},
                          {"input", i % 3 == 0 ? "with some input" : ""},
                          {"output", "Seed answer " + std::to_string(i) + "."}});
    }
    testkit::write_text(dir.path() / "alpaca.json", alpaca.dump(2));
    testkit::write_text(dir.path() / "cfg.json", R"({"retry": {"base_delay_ms": 0, "max_delay_ms": 0}})");
    testkit::write_text(dir.path() / "mock.json", think_free_script("LEAK"));
    const int code = cli({"synthesize", "--config", dir.file("cfg.json"), "--seeds", dir.file("alpaca.json"), "--out",
                          dir.file("data.jsonl"), "--turns", "3", "--reviewers", "3", "--mock-script",
                          dir.file("mock.json")});
    c.expect(code == 0, "synthesize exit code " + std::to_string(code));
    const auto bytes = testkit::read_text(dir.path() / "data.jsonl");
    std::vector<DialogueRecord> dialogues;
    try {
        dialogues = load_dialogues(dir.file("data.jsonl"));
    } catch (const std::exception &e) {
        c.expect(false, e.what());
    }
    c.expect(dialogues.size() == 10, "expected 10 conversations, got " + std::to_string(dialogues.size()));
    for (const auto &d : dialogues) {
        c.expect(d.turns.size() == 3, d.id + " has " + std::to_string(d.turns.size()) + " pairs");
        c.expect(!d.turns.empty() && d.turns.back().second == "Answer text.", d.id + " does not end on an answer");
    }
    for (const auto *needle : {"<think", "</think", "THINK", "CRITIQUE", "<criticize", "<ask", "<respond"}) {
        c.expect(bytes.find(needle) == std::string::npos, std::string("export contains ") + needle);
    }
    return c.done("10 complete conversations x 3 pairs, no think/critique bytes in export");
}

// Naive scanner for well-formed input: first "<tag>" then the next "</tag>".
std::map<ActionKind, std::string> naive_scan(const std::string &raw) {
    std::map<ActionKind, std::string> out;
    for (const auto kind : kAllActionKinds) {
        const std::string open = "<" + std::string(tag_name(kind)) + ">";
        const std::string close = "</" + std::string(tag_name(kind)) + ">";
        const auto a = raw.find(open);
        if (a == std::string::npos) continue;
        const auto b = raw.find(close, a + open.size());
        out[kind] = trim(raw.substr(a + open.size(), b - a - open.size()));
    }
    return out;
}

Outcome parser_properties() {
    Check c;
    std::mt19937_64 rng(0xacce);
    const std::string body_chars = "abcdXYZ 0123.,!?\n<>/";
    const auto body = [&] {
        std::string s(1 + rng() % 30, 'a');
        for (auto &ch : s) ch = body_chars[rng() % body_chars.size()];
        return "b" + s + "e";
    };

    int round_trips = 0;
    while (round_trips < 10000) {
        ActionSet set;
        for (const auto kind : kAllActionKinds) {
            if (rng() % 2) set.insert(kind, body());
        }
        if (set.empty()) continue;
        ++round_trips;
        try {
            c.expect(scan_actions(render_actions(set)).actions == set, "round trip mismatch");
        } catch (const ParseError &e) {
            c.expect(false, std::string("round trip threw ") + e.what());
        }
    }

    const std::string fuzz_chars = "<>/ \n\tthinkaskrespondcriticizeTHINKASK";
    int fuzzed = 0;
    for (; fuzzed < 100000; ++fuzzed) {
        std::string s(rng() % 64, ' ');
        for (auto &ch : s) ch = rng() % 5 == 0 ? static_cast<char>(rng() % 256) : fuzz_chars[rng() % fuzz_chars.size()];
        try {
            scan_actions(s);
        } catch (const ParseError &) {
        } catch (const std::exception &e) {
            c.expect(false, std::string("non-ParseError escaped: ") + e.what());
        }
    }

    int duplicates = 0;
    for (int i = 0; i < 5000; ++i) {
        std::string raw;
        const int pieces = 1 + static_cast<int>(rng() % 6);
        for (int p = 0; p < pieces; ++p) {
            const auto kind = kAllActionKinds[rng() % 4];
            const auto name = std::string(tag_name(kind));
            if (rng() % 3 == 0) raw += "prose ";
            raw += "<" + name + ">" + "v" + std::to_string(rng() % 100) + "</" + name + ">";
        }
        const auto got = scan_actions(raw);
        duplicates += static_cast<int>(got.warnings.size());
        c.expect(got.actions.entries() == naive_scan(raw), "first-match disagreement on " + raw);
    }
    return c.done(std::to_string(round_trips) + " round trips, " + std::to_string(fuzzed) + " fuzz inputs, " +
                  std::to_string(duplicates) + " duplicate tags matched the naive scanner");
}

Outcome diversity_oracle() {
    Check c;
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const int nrounds = 1 + static_cast<int>(rng() % 5);
        const int vocab = 1 + static_cast<int>(rng() % 50);
        std::vector<std::vector<TagSet>> rounds(static_cast<std::size_t>(nrounds));
        const int items = 1 + static_cast<int>(rng() % 60);
        for (int i = 0; i < items; ++i) {
            TagSet ts{{"c" + std::to_string(i), 0}, {}};
            const int n = 1 + static_cast<int>(rng() % 5);
            for (int k = 0; k < n; ++k) ts.tags.insert("tag" + std::to_string(rng() % vocab));
            rounds[rng() % nrounds].push_back(ts);
        }
        // Brute force with plain nested loops over vectors.
        std::vector<std::string> universe;
        std::vector<std::vector<std::string>> first_seen(rounds.size());
        for (std::size_t r = 0; r < rounds.size(); ++r) {
            for (const auto &ts : rounds[r]) {
                for (const auto &t : ts.tags) {
                    bool known = false;
                    for (const auto &u : universe) known = known || u == t;
                    if (!known) {
                        universe.push_back(t);
                        first_seen[r].push_back(t);
                    }
                }
            }
        }
        const auto got = diversity_by_round(rounds);
        Fraction sum;
        for (std::size_t r = 0; r < rounds.size(); ++r) {
            const auto want = Fraction::of(static_cast<std::int64_t>(first_seen[r].size()),
                                           static_cast<std::int64_t>(universe.size()));
            c.expect(got.rounds[r].ratio == want, "trial " + std::to_string(trial) + " round " + std::to_string(r + 1));
            sum = sum + got.rounds[r].ratio;
        }
        c.expect(sum == Fraction{1, 1}, "ratios do not sum to 1 in trial " + std::to_string(trial));
    }
    return c.done("200 configurations equal brute force exactly; sums are 1/1");
}

Outcome difficulty_pipeline() {
    Check c;
    const std::string block =
        "## Output Format\n"
        "Given the user query, in your output, you first need to identify the user intent and the knowledge needed to "
        "solve the task in the user query. Then, rate the difficulty level of the user query as 'easy', 'medium', or "
        "'hard'.\n"
        "Now, please output the user intent and difficulty level below in a json format by filling in the placeholders "
        "in [...]:\n"
        "{\n\"intent\": \"The user wants to [....]\",\n"
        "\"knowledge\": \"To solve this problem, the models need to know [....]\",\n"
        "\"difficulty\": \"[easy/medium/hard]\"\n}";
    const auto prompt = render_difficulty_prompt(default_templates().difficulty_judge, "What is 2+2?");
    c.expect(prompt.find("## User Query\nWhat is 2+2?\n") != std::string::npos, "input not rendered");
    c.expect(prompt.size() >= block.size() && prompt.compare(prompt.size() - block.size(), block.size(), block) == 0,
             "output format block differs");

    int accepted = 0;
    for (const std::string label : {"easy", "medium", "hard"}) {
        for (unsigned mask = 0; mask < (1u << label.size()); ++mask) {
            std::string cased = label;
            for (std::size_t i = 0; i < cased.size(); ++i) {
                if (mask & (1u << i)) cased[i] = static_cast<char>(std::toupper(cased[i]));
            }
            const auto rec = parse_judge_output(R"({"difficulty": ")" + cased + R"("})", {"c", 0});
            c.expect(to_string(rec.difficulty) == label, "label " + cased);
            ++accepted;
        }
    }
    int rejected = 0;
    for (const auto *bad : {"impossible", "easyish", "", "very hard", "trivial"}) {
        try {
            parse_judge_output(std::string(R"({"difficulty": ")") + bad + R"("})", {"c", 0});
            c.expect(false, std::string("accepted ") + bad);
        } catch (const ParseError &e) {
            c.expect(e.code() == ParseCode::BadJudgeJson, "wrong error code");
            ++rejected;
        }
    }

    std::mt19937 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<std::optional<Difficulty>>> rounds(1 + rng() % 4);
        for (auto &r : rounds) {
            r.resize(1 + rng() % 30);
            for (auto &x : r) {
                const auto v = rng() % 4;
                x = v == 3 ? std::nullopt : std::optional<Difficulty>(static_cast<Difficulty>(v));
            }
        }
        const auto hist = difficulty_by_round(rounds);
        for (std::size_t r = 0; r < rounds.size(); ++r) {
            std::size_t classified = 0;
            for (const auto &x : rounds[r]) classified += x.has_value();
            c.expect(hist[r].easy + hist[r].medium + hist[r].hard == classified, "histogram total");
            c.expect(hist[r].unclassified == rounds[r].size() - classified, "unclassified tally");
        }
    }
    return c.done("verbatim output format; " + std::to_string(accepted) + " casings accepted, " +
                  std::to_string(rejected) + " out-of-enum rejected; histogram totals exact");
}

std::vector<std::pair<std::string, std::string>> read_transcript(const std::string &path) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string role;
    std::vector<std::string> lines;
    const auto flush = [&] {
        if (role.empty()) return;
        std::string text;
        for (std::size_t i = 0; i < lines.size(); ++i) text += (i ? "\n" : "") + lines[i];
        while (!text.empty() && text.back() == '\n') text.pop_back();
        while (!text.empty() && text.front() == '\n') text.erase(text.begin());
        out.emplace_back(role, text);
    };
    std::istringstream in(testkit::read_text(path));
    for (std::string line; std::getline(in, line);) {
        if (line == ">>chairman" || line == ">>candidate") {
            flush();
            role = line.substr(2);
            lines.clear();
        } else {
            lines.push_back(line);
        }
    }
    flush();
    return out;
}

Outcome fixture_regression() {
    Check c;
    const std::string dir = PANELSYNTH_FIXTURE_DIR;
    for (const std::string name : {"breadth_case", "depth_case"}) {
        const auto turns = read_transcript(dir + "/" + name + ".txt");
        c.expect(turns.size() == 4, name + ": transcript should have 4 utterances");
        if (turns.size() != 4) continue;
        const std::vector<ScriptEntry> script = {
            entry(RoleKind::Candidate, "<think>draft</think><respond>" + turns[1].second + "</respond>", name, 0),
            entry(RoleKind::Reviewer, "<criticize>Reviewed.</criticize>", name, 0),
            entry(RoleKind::Chairman, "<think>route</think><ask>" + turns[2].second + "</ask>", name, 1),
            entry(RoleKind::Candidate, "<respond>" + turns[3].second + "</respond>", name, 1)};
        MockRig rig(script, testkit::run_config(2, 2));
        const auto r = run_dialogue(testkit::seed(name, turns[0].second), rig.env());
        c.expect(r.conversation.complete(), name + ": dialogue failed");
        const auto expected = testkit::read_text(dir + "/" + name + ".expected.jsonl");
        c.expect(export_line(r.conversation) + "\n" == expected, name + ": export differs from the fixture");
    }
    return c.done("breadth and depth cases replay to byte-identical exports");
}

// Runs the CLI binary as a child; returns its pid.
pid_t spawn_cli(const std::vector<std::string> &args) {
    const pid_t pid = fork();
    if (pid == 0) {
        std::vector<char *> argv;
        std::string exe = PANELSYNTH_CLI_PATH;
        argv.push_back(exe.data());
        std::vector<std::string> copy = args;
        for (auto &a : copy) argv.push_back(a.data());
        argv.push_back(nullptr);
        const int null_fd = ::open("/dev/null", O_WRONLY);
        if (null_fd >= 0) {
            dup2(null_fd, 1);
            dup2(null_fd, 2);
        }
        execv(exe.c_str(), argv.data());
        _exit(127);
    }
    return pid;
}

int wait_exit(pid_t pid) {
    int status = 0;
    waitpid(pid, &status, 0);
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

Outcome resilience() {
    Check c;
    testkit::TempDir dir;
    std::string seeds;
    for (int i = 0; i < 20; ++i) {
        seeds += R"({"id":"seed-)" + std::to_string(i) + R"(","instruction":"Question )" + std::to_string(i) + "\"}\n";
    }
    testkit::write_text(dir.path() / "seeds.jsonl", seeds);
    testkit::write_text(dir.path() / "cfg.json", R"({"concurrency": 2, "retry": {"base_delay_ms": 0, "max_delay_ms": 0}})");
    testkit::write_text(dir.path() / "mock.json", R"({"entries": [
      {"role": "candidate", "text": "<respond>Answer.</respond>", "delay_ms": 25},
      {"role": "reviewer", "text": "<criticize>Fine.</criticize>", "delay_ms": 25},
      {"role": "chairman", "text": "<ask>More?</ask>", "delay_ms": 25}]})");
    const std::vector<std::string> args = {"synthesize",      "--config", dir.file("cfg.json"), "--seeds",
                                           dir.file("seeds.jsonl"), "--out",    dir.file("data.jsonl"), "--turns",
                                           "2",               "--reviewers", "2",              "--mock-script",
                                           dir.file("mock.json")};

    const pid_t first = spawn_cli(args);
    std::size_t before_kill = 0;
    for (int i = 0; i < 2000; ++i) {
        before_kill = testkit::read_nonempty_lines(dir.path() / "data.jsonl").size();
        if (before_kill >= 5) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    kill(first, SIGKILL);
    const int killed = wait_exit(first);
    c.expect(killed == 128 + SIGKILL, "first run was not killed (exit " + std::to_string(killed) + ")");
    const auto after_kill = testkit::read_nonempty_lines(dir.path() / "data.jsonl").size();
    c.expect(after_kill < 20, "first run finished before the kill");

    auto resume_args = args;
    resume_args.push_back("--resume");
    const int resumed = wait_exit(spawn_cli(resume_args));
    c.expect(resumed == 0, "resume exit code " + std::to_string(resumed));

    std::vector<std::string> ids;
    try {
        for (const auto &d : load_dialogues(dir.file("data.jsonl"))) ids.push_back(d.id);
    } catch (const std::exception &e) {
        c.expect(false, std::string("output unreadable after resume: ") + e.what());
    }
    const std::set<std::string> unique(ids.begin(), ids.end());
    c.expect(ids.size() == 20 && unique.size() == 20,
             "expected 20 unique ids, got " + std::to_string(ids.size()) + " records / " +
                 std::to_string(unique.size()) + " unique");

    // Retry cap under injected 429-class faults, through the mock and over real HTTP.
    auto cfg = testkit::run_config(1, 1);
    auto opts = testkit::fast_options();
    opts.retry.max_attempts = 3;
    MockRig always({fault(RoleKind::Candidate, BackendErrorKind::Transient)}, cfg, opts);
    const auto r = run_dialogue(testkit::seed("s", "Q"), always.env());
    c.expect(r.failure && r.failure->kind == FailureKind::RetriesExhausted, "transient faults did not exhaust");
    c.expect(always.log->size() == 3, "mock: " + std::to_string(always.log->size()) + " calls for a cap of 3");

    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
        ++hits;
        res.status = 429;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    {
        HttpBackendOptions http;
        http.base_url = "http://127.0.0.1:" + std::to_string(port);
        auto log = std::make_shared<CallLog>();
        Gateway g(std::make_shared<HttpChatBackend>(http), opts, log);
        CompletionRequest req;
        req.messages = {{ChatRole::User, "hi"}};
        req.request_id = "x";
        CallContext ctx;
        try {
            g.complete(req, ctx);
            c.expect(false, "HTTP 429s did not surface as an error");
        } catch (const BackendError &e) {
            c.expect(e.retryable(), "429 classified as permanent");
        }
        c.expect(hits == 3 && log->size() == 3, "HTTP: " + std::to_string(hits.load()) + " requests for a cap of 3");
    }
    server.stop();
    th.join();

    return c.done("killed after " + std::to_string(after_kill) + "/20, resume gave 20 unique ids; 429 cap of 3 held");
}

Outcome determinism() {
    Check c;
    testkit::TempDir a, b;
    std::string seeds;
    for (int i = 0; i < 6; ++i) {
        seeds += R"({"id":"d)" + std::to_string(i) + R"(","instruction":"Q)" + std::to_string(i) + "\"" +
                 (i % 2 ? R"(,"response":"R)" + std::to_string(i) + "\"" : std::string()) + "}\n";
    }
    for (const auto *dir : {&a, &b}) {
        testkit::write_text(dir->path() / "seeds.jsonl", seeds);
        testkit::write_text(dir->path() / "cfg.json", R"({"concurrency": 3, "retry": {"base_delay_ms": 0, "max_delay_ms": 0}})");
        testkit::write_text(dir->path() / "mock.json", think_free_script("D"));
        const int s = cli({"synthesize", "--config", dir->file("cfg.json"), "--seeds", dir->file("seeds.jsonl"), "--out",
                           dir->file("data.jsonl"), "--mock-script", dir->file("mock.json")});
        const int an = cli({"analyze", dir->file("data.jsonl"), "--config", dir->file("cfg.json"), "--mock-script",
                            dir->file("mock.json"), "--out", dir->file("report.json")});
        c.expect(s == 0 && an == 0, "a run failed");
    }
    for (const auto *name : {"data.jsonl", "data.manifest.json", "report.json", "report.txt"}) {
        const auto x = testkit::read_text(a.path() / name);
        c.expect(!x.empty(), std::string(name) + " is empty");
        c.expect(x == testkit::read_text(b.path() / name), std::string(name) + " differs between runs");
    }
    return c.done("dataset, manifest, and report are byte-identical across two runs");
}

}  // namespace

int main() {
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria = {
        {"trace-fidelity", trace_fidelity},         {"entry-points", entry_points},
        {"alpaca-scale-run", alpaca_scale_run},     {"parser-properties", parser_properties},
        {"diversity-oracle", diversity_oracle},     {"difficulty-pipeline", difficulty_pipeline},
        {"fixture-regression", fixture_regression}, {"resilience", resilience},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto &[name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
