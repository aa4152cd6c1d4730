#include "panelsynth/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include <json.hpp>

#include "panelsynth/agents.hpp"
#include "panelsynth/errors.hpp"

namespace panelsynth {

namespace {

using nlohmann::json;

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// First balanced JSON value starting with `open` in `raw`, tolerant of surrounding prose.
std::optional<json> first_json(std::string_view raw, char open) {
    const char close = open == '{' ? '}' : ']';
    for (auto start = raw.find(open); start != std::string_view::npos; start = raw.find(open, start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            const char c = raw[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{' || c == '[') {
                ++depth;
            } else if (c == '}' || c == ']') {
                if (--depth == 0) {
                    if (c != close) break;
                    try {
                        return json::parse(raw.substr(start, i - start + 1));
                    } catch (const json::parse_error &) {
                        break;
                    }
                }
            }
        }
    }
    return std::nullopt;
}

std::string describe_ref(const InstructionRef &ref) {
    return ref.conversation_id + "#" + std::to_string(ref.turn_index);
}

CompletionRequest measurement_request(const MeasurementAgent &agent, std::string prompt, const InstructionRef &ref,
                                      RoleKind role) {
    CompletionRequest req;
    req.messages.push_back({ChatRole::User, std::move(prompt)});
    req.model_name = agent.profile.model_name;
    req.temperature = agent.profile.temperature;
    req.max_output_tokens = agent.profile.max_output_tokens;
    req.request_id = describe_ref(ref) + "/" + to_string(role);
    return req;
}

template <typename T, typename Parse>
std::optional<T> measure(const MeasurementAgent &agent, CompletionRequest req, const InstructionRef &ref,
                         RoleKind role, Parse parse) {
    CallContext ctx;
    ctx.role = role;
    ctx.seed_id = ref.conversation_id;
    ctx.turn_index = ref.turn_index;
    for (int attempt = 0; attempt <= agent.max_parse_retries; ++attempt) {
        std::optional<T> out;
        try {
            agent.gateway.complete(req, ctx, [&](const std::string &raw) { out = parse(raw); });
            return out;
        } catch (const ParseError &) {
        }
    }
    return std::nullopt;
}

}  // namespace

Fraction Fraction::of(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("fraction with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const auto g = std::gcd(num < 0 ? -num : num, den);
    return g > 1 ? Fraction{num / g, den / g} : Fraction{num, den};
}

Fraction Fraction::operator+(const Fraction &o) const { return of(num * o.den + o.num * den, den * o.den); }

Fraction Fraction::operator-(const Fraction &o) const { return of(num * o.den - o.num * den, den * o.den); }

std::set<std::string> normalize_tags(std::span<const std::string> raw) {
    std::set<std::string> tags;
    for (const auto &t : raw) {
        auto norm = ascii_lower(trim(t));
        if (!norm.empty()) tags.insert(std::move(norm));
    }
    return tags;
}

TagSet parse_tagger_output(std::string_view raw, InstructionRef ref) {
    const auto doc = first_json(raw, '[');
    if (!doc) throw ParseError(ParseCode::BadTaggerOutput, "no JSON array in tagger output for " + describe_ref(ref));
    std::vector<std::string> raw_tags;
    for (const auto &item : *doc) {
        if (item.is_string()) {
            raw_tags.push_back(item.get<std::string>());
        } else if (item.is_object() && item.contains("tag") && item["tag"].is_string()) {
            raw_tags.push_back(item["tag"].get<std::string>());
        } else {
            throw ParseError(ParseCode::BadTaggerOutput, "tagger array holds a non-tag element for " + describe_ref(ref));
        }
    }
    TagSet set{std::move(ref), normalize_tags(raw_tags)};
    if (set.tags.empty()) throw ParseError(ParseCode::BadTaggerOutput, "tagger returned no tags for " + describe_ref(set.ref));
    return set;
}

const char *to_string(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        case Difficulty::Hard: return "hard";
    }
    return "easy";
}

std::optional<Difficulty> difficulty_from_string(std::string_view label) {
    const auto norm = ascii_lower(trim(label));
    if (norm == "easy") return Difficulty::Easy;
    if (norm == "medium") return Difficulty::Medium;
    if (norm == "hard") return Difficulty::Hard;
    return std::nullopt;
}

std::string render_difficulty_prompt(const PromptTemplate &tmpl, std::string_view instruction) {
    return render_placeholders(tmpl.text, {{"input", std::string(instruction)}});
}

std::string render_tagger_prompt(const PromptTemplate &tmpl, std::string_view instruction) {
    return render_placeholders(tmpl.text, {{"input", std::string(instruction)}});
}

DifficultyRecord parse_judge_output(std::string_view raw, InstructionRef ref) {
    const auto doc = first_json(raw, '{');
    if (!doc) throw ParseError(ParseCode::BadJudgeJson, "no JSON object in judge output for " + describe_ref(ref));
    const auto it = doc->find("difficulty");
    if (it == doc->end() || !it->is_string()) {
        throw ParseError(ParseCode::BadJudgeJson, "judge output lacks a difficulty string for " + describe_ref(ref));
    }
    const auto label = difficulty_from_string(it->get<std::string>());
    if (!label) {
        throw ParseError(ParseCode::BadJudgeJson,
                         "difficulty '" + it->get<std::string>() + "' is not easy/medium/hard for " + describe_ref(ref));
    }
    DifficultyRecord record;
    record.ref = std::move(ref);
    record.difficulty = *label;
    if (const auto i = doc->find("intent"); i != doc->end() && i->is_string()) record.intent = i->get<std::string>();
    if (const auto k = doc->find("knowledge"); k != doc->end() && k->is_string()) record.knowledge = k->get<std::string>();
    return record;
}

std::optional<DifficultyRecord> classify_difficulty(std::string_view instruction, const InstructionRef &ref,
                                                    const MeasurementAgent &judge) {
    if (trim(instruction).empty()) throw ValidationError(ValidationCode::EmptyInstruction, "nothing to classify");
    auto req = measurement_request(judge, render_difficulty_prompt(judge.prompt, instruction), ref, RoleKind::Judge);
    return measure<DifficultyRecord>(judge, std::move(req), ref, RoleKind::Judge,
                                     [&](const std::string &raw) { return parse_judge_output(raw, ref); });
}

std::optional<TagSet> tag_instruction(std::string_view instruction, const InstructionRef &ref,
                                      const MeasurementAgent &tagger) {
    if (trim(instruction).empty()) throw ValidationError(ValidationCode::EmptyInstruction, "nothing to tag");
    auto req = measurement_request(tagger, render_tagger_prompt(tagger.prompt, instruction), ref, RoleKind::Tagger);
    return measure<TagSet>(tagger, std::move(req), ref, RoleKind::Tagger,
                           [&](const std::string &raw) { return parse_tagger_output(raw, ref); });
}

DiversityResult diversity_by_round(std::span<const std::vector<TagSet>> rounds) {
    std::set<std::string> seen;
    std::vector<std::size_t> fresh(rounds.size(), 0);
    for (std::size_t r = 0; r < rounds.size(); ++r) {
        std::set<std::string> round_tags;
        for (const auto &ts : rounds[r]) round_tags.insert(ts.tags.begin(), ts.tags.end());
        for (const auto &tag : round_tags) {
            if (seen.insert(tag).second) ++fresh[r];
        }
    }
    if (seen.empty()) throw ValidationError(ValidationCode::EmptyDataset, "no tagged instructions");

    DiversityResult out;
    out.unique_tags = seen.size();
    for (std::size_t r = 0; r < rounds.size(); ++r) {
        out.rounds.push_back({static_cast<int>(r + 1), fresh[r],
                              Fraction::of(static_cast<std::int64_t>(fresh[r]), static_cast<std::int64_t>(seen.size()))});
    }
    return out;
}

std::vector<DifficultyHistogram> difficulty_by_round(std::span<const std::vector<std::optional<Difficulty>>> rounds) {
    std::vector<DifficultyHistogram> out;
    for (std::size_t r = 0; r < rounds.size(); ++r) {
        if (rounds[r].empty()) {
            throw ValidationError(ValidationCode::EmptyRound, "round " + std::to_string(r + 1) + " has no instructions");
        }
        DifficultyHistogram h;
        h.round = static_cast<int>(r + 1);
        for (const auto &label : rounds[r]) {
            if (!label) {
                ++h.unclassified;
                continue;
            }
            switch (*label) {
                case Difficulty::Easy: ++h.easy; break;
                case Difficulty::Medium: ++h.medium; break;
                case Difficulty::Hard: ++h.hard; break;
            }
        }
        h.hard_share = h.classified() == 0
                           ? Fraction{}
                           : Fraction::of(static_cast<std::int64_t>(h.hard), static_cast<std::int64_t>(h.classified()));
        out.push_back(h);
    }
    return out;
}

const char *to_string(EvolutionDirection d) { return d == EvolutionDirection::Breadth ? "breadth" : "depth"; }

std::optional<EvolutionDirection> parse_direction_output(std::string_view raw) {
    const auto pick = [](std::string_view text) -> std::optional<EvolutionDirection> {
        const auto lower = ascii_lower(text);
        const bool breadth = lower.find("breadth") != std::string::npos;
        const bool depth = lower.find("depth") != std::string::npos;
        if (breadth == depth) return std::nullopt;
        return breadth ? EvolutionDirection::Breadth : EvolutionDirection::Depth;
    };
    if (const auto doc = first_json(raw, '{')) {
        if (const auto it = doc->find("direction"); it != doc->end() && it->is_string()) {
            return pick(it->get<std::string>());
        }
    }
    return pick(raw);
}

std::string render_direction_prompt(const PromptTemplate &tmpl, const EvolutionStep &step) {
    return render_placeholders(tmpl.text, {{"question", step.question},
                                           {"answer", step.answer},
                                           {"reviews", format_committee_comments(step.reviews)},
                                           {"follow_up", step.follow_up}});
}

std::optional<EvolutionDirection> annotate_evolution_direction(const EvolutionStep &step, const InstructionRef &ref,
                                                               const MeasurementAgent &judge) {
    auto req = measurement_request(judge, render_direction_prompt(judge.prompt, step), ref, RoleKind::Judge);
    req.request_id += "/direction";
    auto label = measure<EvolutionDirection>(judge, std::move(req), ref, RoleKind::Judge, [](const std::string &raw) {
        const auto d = parse_direction_output(raw);
        if (!d) throw ParseError(ParseCode::BadJudgeJson, "no direction label");
        return *d;
    });
    return label;
}

}  // namespace panelsynth
