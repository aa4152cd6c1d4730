#include "panelsynth/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "panelsynth/analysis.hpp"
#include "panelsynth/config.hpp"
#include "panelsynth/dataset_io.hpp"
#include "panelsynth/errors.hpp"
#include "panelsynth/hashing.hpp"
#include "panelsynth/mock_backend.hpp"
#include "panelsynth/orchestrator.hpp"

namespace panelsynth {

namespace {

namespace fs = std::filesystem;

constexpr const char *kVersion = PANELSYNTH_VERSION;

std::atomic<bool> g_stop{false};

extern "C" void on_stop_signal(int) { g_stop = true; }

// Installs SIGINT/SIGTERM handlers for the lifetime of the guard.
class StopSignalGuard {
public:
    StopSignalGuard() {
        g_stop = false;
        prev_int_ = std::signal(SIGINT, on_stop_signal);
        prev_term_ = std::signal(SIGTERM, on_stop_signal);
    }
    ~StopSignalGuard() {
        std::signal(SIGINT, prev_int_);
        std::signal(SIGTERM, prev_term_);
    }
    StopSignalGuard(const StopSignalGuard &) = delete;
    StopSignalGuard &operator=(const StopSignalGuard &) = delete;

private:
    void (*prev_int_)(int) = SIG_DFL;
    void (*prev_term_)(int) = SIG_DFL;
};

struct Flags {
    std::string config;
    std::optional<std::string> seeds;
    std::optional<std::string> seed_format;
    std::optional<std::string> out;
    std::optional<int> turns;
    std::optional<int> reviewers;
    std::optional<int> concurrency;
    std::optional<int> max_retries;
    std::optional<std::string> mock_script;
    std::optional<std::string> compare;
    bool resume = false;
    bool dry_run = false;
    bool allow_partial = false;
    std::string input;
};

// Path with its extension replaced: out/data.jsonl + ".calls.jsonl" -> out/data.calls.jsonl.
std::string sibling(const std::string &path, const std::string &suffix) {
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string &path, const std::string &text) {
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw IoError("cannot write '" + path + "'");
}

AppConfig effective_config(const Flags &f) {
    AppConfig cfg = load_app_config(f.config);
    auto &o = cfg.options;
    if (f.seeds) o.seeds = *f.seeds;
    if (f.seed_format) o.seed_format = *f.seed_format;
    if (f.out) o.out = *f.out;
    if (f.mock_script) o.mock_script = *f.mock_script;
    if (f.compare) o.compare = *f.compare;
    o.resume = o.resume || f.resume;
    o.dry_run = o.dry_run || f.dry_run;
    o.allow_partial = o.allow_partial || f.allow_partial;
    if (f.turns) cfg.run.total_turns = *f.turns;
    if (f.reviewers) set_reviewer_count(cfg.run, *f.reviewers);
    if (f.concurrency) cfg.run.concurrency_limit = *f.concurrency;
    if (f.max_retries) cfg.run.max_parse_retries = *f.max_retries;
    return cfg;
}

std::vector<const AgentProfile *> dialogue_profiles(const RunConfig &run) {
    std::vector<const AgentProfile *> out{&run.chairman, &run.candidate};
    for (const auto &r : run.reviewers) out.push_back(&r);
    return out;
}

// Either one scripted backend behind every role, or one HTTP gateway per configured backend.
GatewayPool make_gateways(const AppConfig &cfg, const std::vector<const AgentProfile *> &profiles,
                          std::shared_ptr<CallLog> log) {
    if (!cfg.options.mock_script.empty()) {
        GatewayOptions g;
        g.retry = cfg.run.retry;
        g.max_in_flight = std::max(1, cfg.run.concurrency_limit * (cfg.run.reviewer_count + 1));
        auto backend = script_mock(load_mock_script(cfg.options.mock_script));
        return GatewayPool::single(std::make_shared<Gateway>(backend, g, std::move(log)));
    }
    GatewayPool pool = build_gateways(cfg, std::move(log));
    for (const auto *p : profiles) {
        const auto it = cfg.backends.find(p->backend_id);
        if (it == cfg.backends.end()) {
            throw ConfigError("role '" + p->name + "' uses unknown backend '" + p->backend_id + "'");
        }
        if (it->second.kind == "mock") {
            throw ConfigError("backend '" + p->backend_id + "' is a mock backend; pass --mock-script");
        }
    }
    return pool;
}

SeedFormat resolve_seed_format(const CliOptions &o) {
    if (o.seed_format == "alpaca") return SeedFormat::AlpacaJson;
    if (o.seed_format == "jsonl") return SeedFormat::InstructionJsonl;
    if (!o.seed_format.empty()) throw ConfigError("seed format must be 'alpaca' or 'jsonl'");
    const auto fmt = seed_format_for_path(o.seeds);
    if (!fmt) throw ConfigError("cannot infer seed format of '" + o.seeds + "'; pass --seed-format");
    return *fmt;
}

struct CallPlan {
    std::size_t candidate = 0;
    std::size_t reviewer = 0;
    std::size_t chairman = 0;
    std::size_t total() const { return candidate + reviewer + chairman; }
};

CallPlan plan_calls(std::span<const SeedInstruction> seeds, const RunConfig &run) {
    CallPlan plan;
    const auto n = static_cast<std::size_t>(run.total_turns);
    const auto k = static_cast<std::size_t>(run.reviewer_count);
    for (const auto &s : seeds) {
        plan.candidate += s.response ? n - 1 : n;
        plan.chairman += n - 1;
        plan.reviewer += k * (n - 1);
    }
    return plan;
}

std::string seeds_digest(std::span<const SeedInstruction> seeds) {
    std::string ids;
    for (const auto &s : seeds) ids += s.id + "\n";
    return sha256_hex(ids);
}

std::string manifest_text(const AppConfig &cfg, const TemplateSet &templates, std::span<const SeedInstruction> seeds) {
    nlohmann::ordered_json m;
    m["tool"] = "panelsynth";
    m["version"] = kVersion;
    m["run"] = run_config_to_json(cfg.run);
    auto &tm = m["templates"] = nlohmann::ordered_json::object();
    for (const auto &[slot, digest] : template_digests(templates)) tm[slot] = digest;
    if (!cfg.options.mock_script.empty()) {
        m["backends"] = {{"mock", {{"kind", "mock"}, {"script_sha256", sha256_hex(read_file(cfg.options.mock_script))}}}};
    } else {
        auto &bm = m["backends"] = nlohmann::ordered_json::object();
        for (const auto &[id, b] : cfg.backends) {
            bm[id] = {{"kind", b.kind}, {"base_url", b.base_url}, {"path", b.path}};
        }
    }
    m["seeds"] = {{"count", seeds.size()}, {"ids_sha256", seeds_digest(seeds)}};
    return m.dump(2) + "\n";
}

int cmd_synthesize(const Flags &f, std::ostream &out, std::ostream &err) {
    const AppConfig cfg = effective_config(f);
    const auto &o = cfg.options;
    validate_run_config(cfg.run);
    if (o.seeds.empty()) throw ConfigError("no seed file given (--seeds or options.seeds)");
    if (o.out.empty()) throw ConfigError("no output file given (--out or options.out)");
    const auto format = resolve_seed_format(o);
    const TemplateSet templates = resolve_templates(cfg);
    const auto seeds = load_seeds(o.seeds, format);

    if (o.dry_run) {
        const auto plan = plan_calls(seeds, cfg.run);
        out << "dry run: " << seeds.size() << " seeds, " << cfg.run.total_turns << " turns, "
            << cfg.run.reviewer_count << " reviewers\n"
            << "planned calls: candidate " << plan.candidate << ", reviewer " << plan.reviewer << ", chairman "
            << plan.chairman << ", total " << plan.total() << " (before retries)\n";
        for (const auto &[slot, digest] : template_digests(templates)) {
            out << "template " << slot << " " << digest.substr(0, 12) << "\n";
        }
        return 0;
    }

    if (const auto dir = fs::path(o.out).parent_path(); !dir.empty()) fs::create_directories(dir);
    auto log = std::make_shared<CallLog>(sibling(o.out, ".calls.jsonl"), o.resume);
    const GatewayPool gateways = make_gateways(cfg, dialogue_profiles(cfg.run), log);
    write_file(sibling(o.out, ".manifest.json"), manifest_text(cfg, templates, seeds));

    const SynthesisEnv env{cfg.run, templates, gateways};
    BatchOptions options;
    options.resume = o.resume;
    options.should_stop = [] { return g_stop.load(); };
    options.on_written = [&err](const DialogueResult &r) {
        if (r.failure) {
            err << "failed " << r.conversation.seed_id << " at " << r.failure->stage << " turn " << r.failure->turn_index
                << ": " << r.failure->message << "\n";
        }
    };
    BatchSummary summary;
    {
        StopSignalGuard guard;
        summary = run_batch(seeds, env, batch_paths_for(o.out), options);
    }

    out << "completed " << summary.completed << ", failed " << summary.failed << ", skipped (resumed) "
        << summary.skipped_resumed << ", calls " << log->size() << "\n";
    for (const auto &[kind, count] : summary.error_counts) out << "  " << kind << ": " << count << "\n";
    if (summary.stopped_early) out << "stopped early; rerun with --resume to continue\n";
    if (summary.failed > 0 && !o.allow_partial) return 1;
    return summary.stopped_early ? 1 : 0;
}

AnalysisReport analyze_file(const std::string &path, const AnalysisAgents &agents) {
    const auto dialogues = load_dialogues(path);
    return analyze_dialogues(dialogues, agents);
}

int cmd_analyze(const Flags &f, std::ostream &out) {
    const AppConfig cfg = effective_config(f);
    const auto &o = cfg.options;
    if (!cfg.run.difficulty_judge || !cfg.run.tagger) throw ConfigError("analysis needs difficulty_judge and tagger roles");
    const TemplateSet templates = resolve_templates(cfg);
    // options.out names the synthesized dataset; only --out moves the report.
    const std::string report_path = f.out ? *f.out : sibling(f.input, ".report.json");
    if (std::filesystem::weakly_canonical(report_path) == std::filesystem::weakly_canonical(f.input)) {
        throw ConfigError("report path " + report_path + " would overwrite the input");
    }

    auto log = std::make_shared<CallLog>(sibling(report_path, ".calls.jsonl"));
    const GatewayPool gateways = make_gateways(cfg, {&*cfg.run.difficulty_judge, &*cfg.run.tagger}, log);
    AnalysisAgents agents{
        MeasurementAgent{gateways.at(cfg.run.difficulty_judge->backend_id), *cfg.run.difficulty_judge,
                         templates.difficulty_judge, cfg.run.max_parse_retries},
        MeasurementAgent{gateways.at(cfg.run.tagger->backend_id), *cfg.run.tagger, templates.tagger,
                         cfg.run.max_parse_retries},
        cfg.run.concurrency_limit};

    const auto report = analyze_file(f.input, agents);
    std::optional<AnalysisReport> baseline;
    if (!o.compare.empty()) baseline = analyze_file(o.compare, agents);

    const auto table = report_table(report, baseline);
    write_file(report_path, report_json(report, baseline));
    write_file(sibling(report_path, ".txt"), table);
    out << table;
    return 0;
}

int cmd_validate(const Flags &f, std::ostream &out) {
    const auto violations = check_file(f.input);
    if (violations.empty()) {
        out << f.input << ": ok\n";
        return 0;
    }
    const std::size_t shown = std::min<std::size_t>(violations.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        out << f.input << ":" << violations[i].line << ": " << violations[i].message << "\n";
    }
    if (violations.size() > shown) out << "... " << violations.size() - shown << " more\n";
    return 1;
}

void add_run_flags(CLI::App &cmd, Flags &f) {
    cmd.add_option("--config", f.config, "JSON config file")->required();
    cmd.add_option("--concurrency", f.concurrency, "Dialogues (or analysis items) in flight")->check(CLI::PositiveNumber);
    cmd.add_option("--max-retries", f.max_retries, "Re-samples after an unparseable completion")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--mock-script", f.mock_script, "Serve every role from a scripted mock");
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Multi-agent dialogue synthesis and analysis", "panelsynth"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Flags f;

    auto *synth = app.add_subcommand("synthesize", "Grow seed instructions into multi-turn dialogues");
    add_run_flags(*synth, f);
    synth->add_option("--seeds", f.seeds, "Seed file (.json Alpaca array or .jsonl)");
    synth->add_option("--seed-format", f.seed_format, "alpaca or jsonl")->check(CLI::IsMember({"alpaca", "jsonl"}));
    synth->add_option("--out", f.out, "Output JSONL");
    synth->add_option("--turns", f.turns, "Question-answer pairs per dialogue")->check(CLI::PositiveNumber);
    synth->add_option("--reviewers", f.reviewers, "Reviewer count")->check(CLI::PositiveNumber);
    synth->add_flag("--resume", f.resume, "Skip seeds already completed");
    synth->add_flag("--dry-run", f.dry_run, "Validate inputs and print the call plan");
    synth->add_flag("--allow-partial", f.allow_partial, "Exit 0 even if some dialogues failed");

    auto *analyze = app.add_subcommand("analyze", "Measure per-round difficulty and tag diversity");
    add_run_flags(*analyze, f);
    analyze->add_option("input", f.input, "Dialogue JSONL")->required();
    analyze->add_option("--out", f.out, "Report JSON (a .txt table is written beside it)");
    analyze->add_option("--compare", f.compare, "Baseline dialogue JSONL");

    auto *validate = app.add_subcommand("validate", "Check a seed or dialogue file");
    validate->add_option("input", f.input, "File to check")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion &) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synthesize(f, out, err);
        if (analyze->parsed()) return cmd_analyze(f, out);
        return cmd_validate(f, out);
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError &e) {
        err << "format error: " << e.what() << "\n";
        return 3;
    } catch (const IoError &e) {
        err << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError &e) {
        err << "invalid input: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error &e) {
        err << "io error: " << e.what() << "\n";
        return 3;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace panelsynth
