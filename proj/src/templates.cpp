#include "panelsynth/templates.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "panelsynth/errors.hpp"
#include "panelsynth/hashing.hpp"

namespace panelsynth {

namespace detail {
// Generated at configure time from templates/*.tmpl.
std::string_view default_template_text(std::string_view slot);
}  // namespace detail

namespace {

struct Section {
    std::string name;
    std::string arg;
    std::vector<std::string> lines;
};

struct ParsedFile {
    std::map<std::string, std::string> fields;
    std::vector<Section> sections;
};

std::string join_body(const std::vector<std::string> &lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out;
}

ParsedFile split_sections(std::string_view text, std::string_view origin) {
    ParsedFile file;
    Section *current = nullptr;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string line(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        if (line.rfind("@@ ", 0) != 0) {
            if (current) {
                current->lines.push_back(std::move(line));
            } else if (!trim(line).empty()) {
                throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": text before the first section");
            }
            if (nl == text.size()) break;
            continue;
        }
        const auto directive = trim(std::string_view(line).substr(3));
        if (const auto colon = directive.find(':'); colon != std::string::npos) {
            file.fields[trim(directive.substr(0, colon))] = trim(directive.substr(colon + 1));
            current = nullptr;
        } else {
            Section s;
            const auto space = directive.find(' ');
            s.name = directive.substr(0, space);
            if (space != std::string::npos) s.arg = trim(directive.substr(space + 1));
            file.sections.push_back(std::move(s));
            current = &file.sections.back();
        }
        if (nl == text.size()) break;
    }
    return file;
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ActionKind required_action_for(RoleKind role) {
    switch (role) {
        case RoleKind::Chairman: return ActionKind::Ask;
        case RoleKind::Candidate: return ActionKind::Respond;
        case RoleKind::Reviewer: return ActionKind::Criticize;
        default: break;
    }
    throw ConfigError(std::string("role '") + to_string(role) + "' has no action template");
}

std::vector<std::string> placeholders(std::string_view text) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') {
                ++i;
                continue;
            }
            const auto close = text.find('}', i);
            if (close == std::string_view::npos) break;
            names.emplace_back(text.substr(i + 1, close - i - 1));
            i = close;
        } else if (text[i] == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            ++i;
        }
    }
    return names;
}

std::string render_placeholders(std::string_view text, const std::map<std::string, std::string> &values) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') {
                out += '{';
                ++i;
                continue;
            }
            const auto close = text.find('}', i);
            if (close == std::string_view::npos) throw ConfigError("unmatched '{' in template");
            const std::string name(text.substr(i + 1, close - i - 1));
            const auto it = values.find(name);
            if (it == values.end()) throw ConfigError("template placeholder {" + name + "} has no value");
            out += it->second;
            i = close;
        } else if (c == '}') {
            if (i + 1 < text.size() && text[i + 1] == '}') {
                out += '}';
                ++i;
                continue;
            }
            throw ConfigError("unmatched '}' in template");
        } else {
            out += c;
        }
    }
    return out;
}

RoleTemplate parse_role_template(std::string_view text, std::string_view origin) {
    const auto file = split_sections(text, origin);
    const auto where = std::string(origin);
    RoleTemplate t;
    t.source = std::string(text);

    const auto role_it = file.fields.find("role");
    if (role_it == file.fields.end()) throw ConfigError(where + ": missing '@@ role:' field");
    t.role = role_from_string(role_it->second);
    t.required_action = required_action_for(t.role);
    if (const auto it = file.fields.find("required_action"); it != file.fields.end()) {
        const auto kind = action_from_tag(it->second);
        if (!kind || *kind != t.required_action) {
            throw ConfigError(where + ": required_action for " + role_it->second + " must be '" +
                              std::string(tag_name(t.required_action)) + "'");
        }
    }

    bool have_system = false;
    bool have_guide = false;
    for (const auto &s : file.sections) {
        if (s.name == "system") {
            t.system_text = join_body(s.lines);
            have_system = true;
        } else if (s.name == "few_shot") {
            ChatMessage m;
            if (s.arg == "user") {
                m.role = ChatRole::User;
            } else if (s.arg == "assistant") {
                m.role = ChatRole::Assistant;
            } else {
                throw ConfigError(where + ": few_shot section needs 'user' or 'assistant'");
            }
            m.content = join_body(s.lines);
            if (m.content.empty()) throw ConfigError(where + ": empty few_shot message");
            t.few_shot.push_back(std::move(m));
        } else if (s.name == "action_guide") {
            t.action_guide_text = join_body(s.lines);
            have_guide = true;
        } else {
            throw ConfigError(where + ": unknown section '" + s.name + "'");
        }
    }
    if (!have_system || t.system_text.empty()) throw ConfigError(where + ": missing system section");
    if (!have_guide) throw ConfigError(where + ": missing action_guide section");

    bool word_limit = false;
    bool input = false;
    for (const auto &name : placeholders(t.action_guide_text)) {
        if (name == "word_limit") {
            word_limit = true;
        } else if (name == "input") {
            input = true;
        } else {
            throw ConfigError(where + ": unknown placeholder {" + name + "} in action_guide");
        }
    }
    if (!word_limit) throw ConfigError(where + ": action_guide must contain the {word_limit} clause");
    if (!input) throw ConfigError(where + ": action_guide must contain {input}");
    return t;
}

PromptTemplate parse_prompt_template(std::string_view text, std::string_view name) {
    const auto file = split_sections(text, name);
    PromptTemplate t;
    t.name = std::string(name);
    t.source = std::string(text);
    bool found = false;
    for (const auto &s : file.sections) {
        if (s.name != "prompt") throw ConfigError(t.name + ": unknown section '" + s.name + "'");
        t.text = join_body(s.lines);
        found = true;
    }
    if (!found || t.text.empty()) throw ConfigError(t.name + ": missing prompt section");
    // Validates brace structure.
    std::map<std::string, std::string> probe;
    for (const auto &p : placeholders(t.text)) probe[p] = "";
    render_placeholders(t.text, probe);
    return t;
}

const TemplateSet &default_templates() {
    static const TemplateSet set = [] {
        TemplateSet s;
        s.chairman = parse_role_template(detail::default_template_text("chairman"), "chairman.tmpl");
        s.candidate = parse_role_template(detail::default_template_text("candidate"), "candidate.tmpl");
        s.reviewer = parse_role_template(detail::default_template_text("reviewer"), "reviewer.tmpl");
        s.difficulty_judge =
            parse_prompt_template(detail::default_template_text("difficulty_judge"), "difficulty_judge");
        s.tagger = parse_prompt_template(detail::default_template_text("tagger"), "tagger");
        s.direction = parse_prompt_template(detail::default_template_text("direction"), "direction");
        return s;
    }();
    return set;
}

void override_template(TemplateSet &set, const std::string &slot, const std::string &path) {
    const auto text = read_file(path);
    auto expect_role = [&](RoleTemplate t, RoleKind role) {
        if (t.role != role) throw ConfigError(path + ": template is for role '" + to_string(t.role) + "'");
        return t;
    };
    if (slot == "chairman") {
        set.chairman = expect_role(parse_role_template(text, path), RoleKind::Chairman);
    } else if (slot == "candidate") {
        set.candidate = expect_role(parse_role_template(text, path), RoleKind::Candidate);
    } else if (slot == "reviewer") {
        set.reviewer = expect_role(parse_role_template(text, path), RoleKind::Reviewer);
    } else if (slot == "difficulty_judge") {
        set.difficulty_judge = parse_prompt_template(text, slot);
    } else if (slot == "tagger") {
        set.tagger = parse_prompt_template(text, slot);
    } else if (slot == "direction") {
        set.direction = parse_prompt_template(text, slot);
    } else {
        throw ConfigError("unknown template slot '" + slot + "'");
    }
}

TemplateSet load_templates(const std::string &dir) {
    TemplateSet set = default_templates();
    for (const char *slot : {"chairman", "candidate", "reviewer", "difficulty_judge", "tagger", "direction"}) {
        const auto path = std::filesystem::path(dir) / (std::string(slot) + ".tmpl");
        if (std::filesystem::exists(path)) override_template(set, slot, path.string());
    }
    return set;
}

std::map<std::string, std::string> template_digests(const TemplateSet &set) {
    return {
        {"chairman", sha256_hex(set.chairman.source)},
        {"candidate", sha256_hex(set.candidate.source)},
        {"reviewer", sha256_hex(set.reviewer.source)},
        {"difficulty_judge", sha256_hex(set.difficulty_judge.source)},
        {"tagger", sha256_hex(set.tagger.source)},
        {"direction", sha256_hex(set.direction.source)},
    };
}

}  // namespace panelsynth
