#include "panelsynth/mock_backend.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "panelsynth/hashing.hpp"

namespace panelsynth {

namespace {

const std::string kWildcard = "*";

int specificity(const ScriptKey &key) {
    int score = 0;
    if (key.seed_id != "*") score += 8;
    if (key.turn_index) score += 4;
    if (key.attempt) score += 2;
    if (key.reviewer_index) score += 1;
    return score;
}

bool matches(const ScriptKey &key, const CallContext &ctx) {
    if (key.role != ctx.role) return false;
    if (key.seed_id != "*" && key.seed_id != ctx.seed_id) return false;
    if (key.turn_index && *key.turn_index != ctx.turn_index) return false;
    if (key.attempt && *key.attempt != ctx.attempt) return false;
    if (key.reviewer_index && *key.reviewer_index != ctx.reviewer_index) return false;
    return true;
}

std::string context_key(const CallContext &ctx) {
    std::string s = std::string(to_string(ctx.role));
    if (ctx.reviewer_index >= 0) s += "[" + std::to_string(ctx.reviewer_index) + "]";
    s += " seed=" + ctx.seed_id + " turn=" + std::to_string(ctx.turn_index) + " attempt=" + std::to_string(ctx.attempt);
    return s;
}

BackendErrorKind fault_from_string(const std::string &name) {
    if (name == "transient") return BackendErrorKind::Transient;
    if (name == "permanent") return BackendErrorKind::Permanent;
    if (name == "timeout") return BackendErrorKind::Timeout;
    throw ConfigError("unknown mock fault '" + name + "'");
}

const char *fault_name(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::Transient: return "transient";
        case BackendErrorKind::Permanent: return "permanent";
        case BackendErrorKind::Timeout: return "timeout";
    }
    return "transient";
}

}  // namespace

std::string describe(const ScriptKey &key) {
    std::string s = std::string(to_string(key.role));
    if (key.reviewer_index) s += "[" + std::to_string(*key.reviewer_index) + "]";
    s += " seed=" + key.seed_id;
    s += " turn=" + (key.turn_index ? std::to_string(*key.turn_index) : std::string("*"));
    s += " attempt=" + (key.attempt ? std::to_string(*key.attempt) : std::string("*"));
    return s;
}

bool TranscriptEntry::operator==(const TranscriptEntry &o) const {
    return context.role == o.context.role && context.reviewer_index == o.context.reviewer_index &&
           context.seed_id == o.context.seed_id && context.turn_index == o.context.turn_index &&
           context.attempt == o.context.attempt && request_digest == o.request_digest && reply == o.reply;
}

std::string messages_digest(const std::vector<ChatMessage> &messages) {
    std::string canonical;
    for (const auto &m : messages) {
        canonical += to_string(m.role);
        canonical += ':' + std::to_string(m.content.size()) + ':';
        canonical += m.content;
    }
    return sha256_hex(canonical);
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) {
    std::unordered_set<std::string> keys;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto &key = entries_[i].key;
        if (!keys.insert(panelsynth::describe(key)).second) {
            throw ConfigError("DuplicateKey: mock script has two entries for " + panelsynth::describe(key));
        }
        by_seed_[key.seed_id].push_back(i);
    }
}

const ScriptEntry *ScriptedBackend::lookup(const CallContext &ctx) const {
    const ScriptEntry *best = nullptr;
    int best_score = -1;
    for (const auto *seed : {&ctx.seed_id, &kWildcard}) {
        const auto it = by_seed_.find(*seed);
        if (it == by_seed_.end()) continue;
        for (const auto i : it->second) {
            const auto &e = entries_[i];
            if (!matches(e.key, ctx)) continue;
            const int score = specificity(e.key);
            if (score > best_score) {
                best = &e;
                best_score = score;
            }
        }
    }
    return best;
}

std::string ScriptedBackend::complete(const CompletionRequest &req, const CallContext &ctx) {
    const int now = ++in_flight_;
    for (int seen = max_in_flight_.load(); now > seen && !max_in_flight_.compare_exchange_weak(seen, now);) {
    }
    struct Leave {
        std::atomic<int> &n;
        ~Leave() { --n; }
    } leave{in_flight_};

    const auto *entry = lookup(ctx);
    TranscriptEntry t{ctx, messages_digest(req.messages), {}};
    if (!entry) {
        t.reply = "!missing";
        {
            std::lock_guard lock(mu_);
            transcript_.push_back(std::move(t));
        }
        throw BackendError(BackendErrorKind::Permanent, "mock script has no entry for " + context_key(ctx));
    }
    if (entry->reply.delay.count() > 0) std::this_thread::sleep_for(entry->reply.delay);
    t.reply = entry->reply.fault ? std::string("!") + fault_name(*entry->reply.fault) : entry->reply.text;
    {
        std::lock_guard lock(mu_);
        transcript_.push_back(std::move(t));
    }
    if (entry->reply.fault) {
        throw BackendError(*entry->reply.fault, "injected fault for " + context_key(ctx));
    }
    return entry->reply.text;
}

std::vector<TranscriptEntry> ScriptedBackend::transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
}

std::size_t ScriptedBackend::call_count() const {
    std::lock_guard lock(mu_);
    return transcript_.size();
}

std::shared_ptr<ScriptedBackend> script_mock(std::vector<ScriptEntry> entries) {
    return std::make_shared<ScriptedBackend>(std::move(entries));
}

std::vector<ScriptEntry> parse_mock_script(const std::string &json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
    }
    const auto &list = doc.is_object() ? doc.value("entries", nlohmann::json::array()) : doc;
    if (!list.is_array()) throw ConfigError("mock script must be an array or have an 'entries' array");
    std::vector<ScriptEntry> entries;
    for (const auto &item : list) {
        if (!item.is_object() || !item.contains("role")) throw ConfigError("mock entry without a role");
        try {
            for (const auto &[k, _] : item.items()) {
                static const std::set<std::string> known = {"role",  "reviewer", "seed_id", "turn",
                                                            "attempt", "text",   "error",   "delay_ms"};
                if (!known.count(k)) throw ConfigError("mock entry has unknown key '" + k + "'");
            }
            ScriptEntry e;
            e.key.role = role_from_string(item.at("role").get<std::string>());
            if (item.contains("reviewer")) e.key.reviewer_index = item.at("reviewer").get<int>();
            e.key.seed_id = item.value("seed_id", std::string("*"));
            if (item.contains("turn")) e.key.turn_index = item.at("turn").get<int>();
            if (item.contains("attempt")) e.key.attempt = item.at("attempt").get<int>();
            e.reply.text = item.value("text", std::string());
            if (item.contains("error")) e.reply.fault = fault_from_string(item.at("error").get<std::string>());
            e.reply.delay = std::chrono::milliseconds(item.value("delay_ms", 0));
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception &ex) {
            throw ConfigError(std::string("bad mock entry: ") + ex.what());
        }
    }
    return entries;
}

std::vector<ScriptEntry> load_mock_script(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read mock script '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_mock_script(ss.str());
}

std::string dump_mock_script(const std::vector<ScriptEntry> &entries) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto &e : entries) {
        nlohmann::ordered_json j;
        j["role"] = to_string(e.key.role);
        if (e.key.reviewer_index) j["reviewer"] = *e.key.reviewer_index;
        j["seed_id"] = e.key.seed_id;
        if (e.key.turn_index) j["turn"] = *e.key.turn_index;
        if (e.key.attempt) j["attempt"] = *e.key.attempt;
        if (e.reply.fault) {
            j["error"] = fault_name(*e.reply.fault);
        } else {
            j["text"] = e.reply.text;
        }
        if (e.reply.delay.count() > 0) j["delay_ms"] = e.reply.delay.count();
        list.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["entries"] = std::move(list);
    return doc.dump(2);
}

}  // namespace panelsynth
