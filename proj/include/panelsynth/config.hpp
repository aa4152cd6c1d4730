#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "panelsynth/dialogue.hpp"
#include "panelsynth/gateway.hpp"
#include "panelsynth/templates.hpp"

namespace panelsynth {

struct BackendConfig {
    std::string kind = "openai";  // "openai" (HTTP chat completions) or "mock"
    std::string base_url;
    std::string path = "/v1/chat/completions";
    // Name of the environment variable holding the API key; defaults to
    // <BACKEND_ID>_API_KEY with the id upper-cased and '-' mapped to '_'.
    std::string api_key_env;
    int max_in_flight = 8;
    int min_interval_ms = 0;
    int timeout_s = 120;
};

// Config-file equivalents of the CLI's path and mode flags.
struct CliOptions {
    std::string seeds;
    std::string seed_format;  // "alpaca" or "jsonl"; empty = by extension
    std::string out;
    std::string mock_script;
    std::string compare;
    bool resume = false;
    bool dry_run = false;
    bool allow_partial = false;
};

// Everything a run is configured with. Loaded from a JSON file; CLI flags override.
struct AppConfig {
    RunConfig run;
    std::map<std::string, BackendConfig> backends;
    // Directory of *.tmpl overrides, and per-slot file overrides on top of it.
    std::string template_dir;
    std::map<std::string, std::string> template_files;
    CliOptions options;
};

std::string default_api_key_env(const std::string &backend_id);

// Defaults: total_turns 3, reviewer_count 3, max_parse_retries 3, concurrency 4,
// temperature 0.7 for dialogue roles and 0.0 for the judge and tagger.
AppConfig default_app_config();

// Throws ConfigError on unknown keys or out-of-range values. The returned RunConfig is
// not yet validated, so flags can still adjust it.
AppConfig app_config_from_json(const nlohmann::json &doc);
AppConfig load_app_config(const std::string &path);

// Resizes the reviewer list to `count`: a single profile is replicated, otherwise the
// configured list must already match.
void set_reviewer_count(RunConfig &cfg, int count);

nlohmann::ordered_json run_config_to_json(const RunConfig &cfg);
nlohmann::ordered_json profile_to_json(const AgentProfile &profile);

TemplateSet resolve_templates(const AppConfig &cfg);

// One gateway per configured backend, all writing to `log`.
GatewayPool build_gateways(const AppConfig &cfg, std::shared_ptr<CallLog> log);

}  // namespace panelsynth
