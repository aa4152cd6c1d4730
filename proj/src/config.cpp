#include "panelsynth/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>

#include "panelsynth/errors.hpp"
#include "panelsynth/http_backend.hpp"

namespace panelsynth {

namespace {

using nlohmann::json;

void reject_unknown(const json &obj, const std::set<std::string> &allowed, const std::string &where) {
    for (const auto &[key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_into(const json &obj, const char *key, T &out, const std::string &where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception &) {
        throw ConfigError(where + ": '" + key + "' has the wrong type");
    }
}

AgentProfile profile_from_json(const json &obj, AgentProfile base, const std::string &where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown(obj, {"name", "backend", "model", "temperature", "max_output_tokens", "word_limit"}, where);
    read_into(obj, "name", base.name, where);
    read_into(obj, "backend", base.backend_id, where);
    read_into(obj, "model", base.model_name, where);
    read_into(obj, "temperature", base.temperature, where);
    read_into(obj, "max_output_tokens", base.max_output_tokens, where);
    read_into(obj, "word_limit", base.word_limit, where);
    return base;
}

AgentProfile generation_profile(const std::string &name) {
    AgentProfile p;
    p.name = name;
    p.backend_id = "default";
    p.model_name = "unset";
    p.temperature = 0.7;
    return p;
}

AgentProfile measurement_profile(const std::string &name) {
    auto p = generation_profile(name);
    p.temperature = 0.0;
    return p;
}

}  // namespace

std::string default_api_key_env(const std::string &backend_id) {
    std::string name;
    for (const char c : backend_id) {
        name += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                                                           : '_';
    }
    return name + "_API_KEY";
}

AppConfig default_app_config() {
    AppConfig cfg;
    cfg.run.chairman = generation_profile("chairman");
    cfg.run.candidate = generation_profile("candidate");
    for (int i = 1; i <= cfg.run.reviewer_count; ++i) {
        cfg.run.reviewers.push_back(generation_profile("reviewer-" + std::to_string(i)));
    }
    cfg.run.difficulty_judge = measurement_profile("difficulty_judge");
    cfg.run.tagger = measurement_profile("tagger");
    return cfg;
}

AppConfig app_config_from_json(const json &doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(doc,
                   {"total_turns", "reviewer_count", "max_parse_retries", "concurrency", "retry", "backends", "roles",
                    "templates", "options"},
                   "config");
    AppConfig cfg = default_app_config();
    auto &run = cfg.run;
    read_into(doc, "total_turns", run.total_turns, "config");
    read_into(doc, "max_parse_retries", run.max_parse_retries, "config");
    read_into(doc, "concurrency", run.concurrency_limit, "config");

    if (const auto it = doc.find("retry"); it != doc.end()) {
        reject_unknown(*it, {"max_attempts", "base_delay_ms", "max_delay_ms"}, "retry");
        read_into(*it, "max_attempts", run.retry.max_attempts, "retry");
        read_into(*it, "base_delay_ms", run.retry.base_delay_ms, "retry");
        read_into(*it, "max_delay_ms", run.retry.max_delay_ms, "retry");
    }

    if (const auto it = doc.find("backends"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("'backends' must be an object keyed by backend id");
        for (const auto &[id, b] : it->items()) {
            const auto where = "backend '" + id + "'";
            reject_unknown(b, {"kind", "base_url", "path", "api_key_env", "max_in_flight", "min_interval_ms", "timeout_s"},
                           where);
            BackendConfig bc;
            read_into(b, "kind", bc.kind, where);
            read_into(b, "base_url", bc.base_url, where);
            read_into(b, "path", bc.path, where);
            read_into(b, "api_key_env", bc.api_key_env, where);
            read_into(b, "max_in_flight", bc.max_in_flight, where);
            read_into(b, "min_interval_ms", bc.min_interval_ms, where);
            read_into(b, "timeout_s", bc.timeout_s, where);
            if (bc.kind != "openai" && bc.kind != "mock") throw ConfigError(where + ": kind must be 'openai' or 'mock'");
            if (bc.kind == "openai" && bc.base_url.empty()) throw ConfigError(where + ": base_url is required");
            if (bc.api_key_env.empty()) bc.api_key_env = default_api_key_env(id);
            cfg.backends[id] = bc;
        }
    }

    if (const auto it = doc.find("roles"); it != doc.end()) {
        const auto &roles = *it;
        reject_unknown(roles, {"chairman", "candidate", "reviewers", "difficulty_judge", "tagger"}, "roles");
        if (roles.contains("chairman")) run.chairman = profile_from_json(roles["chairman"], run.chairman, "roles.chairman");
        if (roles.contains("candidate")) {
            run.candidate = profile_from_json(roles["candidate"], run.candidate, "roles.candidate");
        }
        if (roles.contains("reviewers")) {
            const auto &list = roles["reviewers"];
            if (!list.is_array() || list.empty()) throw ConfigError("roles.reviewers must be a nonempty array");
            run.reviewers.clear();
            for (std::size_t i = 0; i < list.size(); ++i) {
                run.reviewers.push_back(profile_from_json(list[i], generation_profile("reviewer-" + std::to_string(i + 1)),
                                                          "roles.reviewers[" + std::to_string(i) + "]"));
            }
            run.reviewer_count = static_cast<int>(run.reviewers.size());
        }
        if (roles.contains("difficulty_judge")) {
            run.difficulty_judge = profile_from_json(roles["difficulty_judge"], *run.difficulty_judge, "roles.difficulty_judge");
        }
        if (roles.contains("tagger")) run.tagger = profile_from_json(roles["tagger"], *run.tagger, "roles.tagger");
    }

    if (doc.contains("reviewer_count")) {
        int count = 0;
        read_into(doc, "reviewer_count", count, "config");
        set_reviewer_count(run, count);
    }

    if (const auto it = doc.find("templates"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("'templates' must be an object");
        for (const auto &[slot, value] : it->items()) {
            if (!value.is_string()) throw ConfigError("templates." + slot + " must be a path");
            if (slot == "dir") {
                cfg.template_dir = value.get<std::string>();
            } else {
                cfg.template_files[slot] = value.get<std::string>();
            }
        }
    }
    if (const auto it = doc.find("options"); it != doc.end()) {
        const auto &o = *it;
        reject_unknown(o, {"seeds", "seed_format", "out", "mock_script", "compare", "resume", "dry_run", "allow_partial"},
                       "options");
        read_into(o, "seeds", cfg.options.seeds, "options");
        read_into(o, "seed_format", cfg.options.seed_format, "options");
        read_into(o, "out", cfg.options.out, "options");
        read_into(o, "mock_script", cfg.options.mock_script, "options");
        read_into(o, "compare", cfg.options.compare, "options");
        read_into(o, "resume", cfg.options.resume, "options");
        read_into(o, "dry_run", cfg.options.dry_run, "options");
        read_into(o, "allow_partial", cfg.options.allow_partial, "options");
    }
    return cfg;
}

AppConfig load_app_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return app_config_from_json(doc);
}

void set_reviewer_count(RunConfig &cfg, int count) {
    if (count < 1) throw ConfigError("reviewer count must be >= 1");
    const auto have = static_cast<int>(cfg.reviewers.size());
    if (have == count) {
        cfg.reviewer_count = count;
        return;
    }
    if (have == 0) throw ConfigError("no reviewer profile to replicate");
    if (have != 1 && count > have) {
        throw ConfigError(std::to_string(count) + " reviewers requested but " + std::to_string(have) +
                          " reviewer profiles are configured");
    }
    if (count < have) {
        cfg.reviewers.resize(static_cast<std::size_t>(count));
    } else {
        const auto base = cfg.reviewers.front();
        cfg.reviewers.clear();
        for (int i = 1; i <= count; ++i) {
            auto p = base;
            p.name = "reviewer-" + std::to_string(i);
            cfg.reviewers.push_back(std::move(p));
        }
    }
    cfg.reviewer_count = count;
}

nlohmann::ordered_json profile_to_json(const AgentProfile &p) {
    nlohmann::ordered_json j;
    j["name"] = p.name;
    j["backend"] = p.backend_id;
    j["model"] = p.model_name;
    j["temperature"] = p.temperature;
    j["max_output_tokens"] = p.max_output_tokens;
    j["word_limit"] = p.word_limit;
    return j;
}

nlohmann::ordered_json run_config_to_json(const RunConfig &cfg) {
    nlohmann::ordered_json j;
    j["total_turns"] = cfg.total_turns;
    j["reviewer_count"] = cfg.reviewer_count;
    j["max_parse_retries"] = cfg.max_parse_retries;
    j["concurrency"] = cfg.concurrency_limit;
    j["retry"] = {{"max_attempts", cfg.retry.max_attempts},
                  {"base_delay_ms", cfg.retry.base_delay_ms},
                  {"max_delay_ms", cfg.retry.max_delay_ms}};
    auto &roles = j["roles"];
    roles["chairman"] = profile_to_json(cfg.chairman);
    roles["candidate"] = profile_to_json(cfg.candidate);
    roles["reviewers"] = nlohmann::ordered_json::array();
    for (const auto &r : cfg.reviewers) roles["reviewers"].push_back(profile_to_json(r));
    if (cfg.difficulty_judge) roles["difficulty_judge"] = profile_to_json(*cfg.difficulty_judge);
    if (cfg.tagger) roles["tagger"] = profile_to_json(*cfg.tagger);
    return j;
}

TemplateSet resolve_templates(const AppConfig &cfg) {
    TemplateSet set = cfg.template_dir.empty() ? default_templates() : load_templates(cfg.template_dir);
    for (const auto &[slot, path] : cfg.template_files) override_template(set, slot, path);
    return set;
}

GatewayPool build_gateways(const AppConfig &cfg, std::shared_ptr<CallLog> log) {
    GatewayPool pool;
    for (const auto &[id, b] : cfg.backends) {
        if (b.kind != "openai") continue;
        HttpBackendOptions opts;
        opts.base_url = b.base_url;
        opts.path = b.path;
        opts.read_timeout_s = b.timeout_s;
        if (const char *key = std::getenv(b.api_key_env.c_str())) opts.api_key = key;
        GatewayOptions g;
        g.max_in_flight = b.max_in_flight;
        g.min_interval_ms = b.min_interval_ms;
        g.retry = cfg.run.retry;
        pool.add(id, std::make_shared<Gateway>(std::make_shared<HttpChatBackend>(opts), g, log));
    }
    return pool;
}

}  // namespace panelsynth
