#include "panelsynth/actions.hpp"

#include <cctype>

#include "panelsynth/dialogue.hpp"
#include "panelsynth/errors.hpp"

namespace panelsynth {

namespace {

struct TagMatch {
    ActionKind kind;
    bool closing;
    std::size_t begin;
    std::size_t end;  // one past '>'
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Recognizes "<name>" or "</name>" at `at`, allowing blanks around the name.
std::optional<TagMatch> match_tag(std::string_view raw, std::size_t at) {
    if (at >= raw.size() || raw[at] != '<') return std::nullopt;
    std::size_t i = at + 1;
    while (i < raw.size() && is_space(raw[i])) ++i;
    bool closing = false;
    if (i < raw.size() && raw[i] == '/') {
        closing = true;
        ++i;
        while (i < raw.size() && is_space(raw[i])) ++i;
    }
    const std::size_t name_begin = i;
    while (i < raw.size() && is_alpha(raw[i])) ++i;
    if (i == name_begin) return std::nullopt;
    const auto kind = action_from_tag(raw.substr(name_begin, i - name_begin));
    if (!kind) return std::nullopt;
    while (i < raw.size() && is_space(raw[i])) ++i;
    if (i >= raw.size() || raw[i] != '>') return std::nullopt;
    return TagMatch{*kind, closing, at, i + 1};
}

}  // namespace

std::string_view tag_name(ActionKind kind) {
    switch (kind) {
        case ActionKind::Think: return "think";
        case ActionKind::Ask: return "ask";
        case ActionKind::Respond: return "respond";
        case ActionKind::Criticize: return "criticize";
    }
    return "";
}

std::optional<ActionKind> action_from_tag(std::string_view name) {
    for (const auto kind : kAllActionKinds) {
        const auto wire = tag_name(kind);
        if (wire.size() != name.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < wire.size() && same; ++i) {
            same = std::tolower(static_cast<unsigned char>(name[i])) == wire[i];
        }
        if (same) return kind;
    }
    return std::nullopt;
}

const std::string *ActionSet::find(ActionKind kind) const {
    const auto it = entries_.find(kind);
    return it == entries_.end() ? nullptr : &it->second;
}

bool ActionSet::insert(ActionKind kind, std::string body) {
    return entries_.emplace(kind, std::move(body)).second;
}

ParseResult scan_actions(std::string_view raw) {
    ParseResult result;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        const auto lt = raw.find('<', pos);
        if (lt == std::string_view::npos) break;
        const auto open = match_tag(raw, lt);
        if (!open || open->closing) {
            pos = lt + 1;
            continue;
        }
        const auto name = std::string(tag_name(open->kind));

        std::optional<TagMatch> close;
        for (auto p = raw.find('<', open->end); p != std::string_view::npos; p = raw.find('<', p + 1)) {
            const auto tag = match_tag(raw, p);
            if (!tag || tag->kind != open->kind) continue;
            if (!tag->closing) {
                throw ParseError(ParseCode::MalformedNesting,
                                 "<" + name + "> opened again at offset " + std::to_string(p) + " before being closed");
            }
            close = tag;
            break;
        }
        if (!close) {
            throw ParseError(ParseCode::UnterminatedTag,
                             "<" + name + "> at offset " + std::to_string(lt) + " has no closing tag");
        }

        auto body = trim(raw.substr(open->end, close->begin - open->end));
        if (body.empty()) {
            throw ParseError(ParseCode::EmptyTagBody, "<" + name + "> at offset " + std::to_string(lt) + " is empty");
        }
        if (!result.actions.insert(open->kind, std::move(body))) {
            result.warnings.push_back({ParseWarning::Kind::DuplicateTag, open->kind, lt});
        }
        pos = close->end;
    }
    return result;
}

ParseResult parse_actions(std::string_view raw, ActionKind required) {
    auto result = scan_actions(raw);
    if (!result.actions.contains(required)) {
        throw ParseError(ParseCode::MissingRequiredTag, "expected a <" + std::string(tag_name(required)) + "> tag");
    }
    return result;
}

ActionSet strip_think(ActionSet actions) {
    actions.erase(ActionKind::Think);
    return actions;
}

std::string render_actions(const ActionSet &actions) {
    std::string out;
    for (const auto &[kind, body] : actions.entries()) {
        const auto name = tag_name(kind);
        out += '<';
        out += name;
        out += '>';
        out += body;
        out += "</";
        out += name;
        out += '>';
    }
    return out;
}

}  // namespace panelsynth
