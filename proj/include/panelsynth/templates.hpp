#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "panelsynth/actions.hpp"
#include "panelsynth/dialogue.hpp"
#include "panelsynth/gateway.hpp"

namespace panelsynth {

// Prompt template for one dialogue role.
//
// Template files are UTF-8 text split into sections by directive lines beginning
// with "@@ ":
//
//   @@ role: chairman            header field
//   @@ required_action: ask      header field
//   @@ system                    section, body runs to the next directive
//   @@ few_shot user             repeatable; order is kept
//   @@ few_shot assistant
//   @@ action_guide              must contain {word_limit} and {input}
//
// Bodies lose their trailing newlines. Placeholders are written {name}; literal braces
// are doubled.
struct RoleTemplate {
    RoleKind role = RoleKind::Candidate;
    ActionKind required_action = ActionKind::Respond;
    std::string system_text;
    std::vector<ChatMessage> few_shot;
    std::string action_guide_text;
    // File contents the template was parsed from; hashed into run manifests.
    std::string source;
};

// Single-body prompt (one "@@ prompt" section), sent as one user message.
struct PromptTemplate {
    std::string name;
    std::string text;
    std::string source;
};

struct TemplateSet {
    RoleTemplate chairman;
    RoleTemplate candidate;
    RoleTemplate reviewer;
    PromptTemplate difficulty_judge;
    PromptTemplate tagger;
    PromptTemplate direction;
};

ActionKind required_action_for(RoleKind role);

// Throws ConfigError naming `origin` on a malformed template.
RoleTemplate parse_role_template(std::string_view text, std::string_view origin);
PromptTemplate parse_prompt_template(std::string_view text, std::string_view name);

// Substitutes {name} placeholders and collapses doubled braces. Throws ConfigError on an
// unknown placeholder or an unmatched brace.
std::string render_placeholders(std::string_view text, const std::map<std::string, std::string> &values);

// Placeholder names used in `text`.
std::vector<std::string> placeholders(std::string_view text);

// Templates compiled into the library from the repository's templates/ directory.
const TemplateSet &default_templates();

// Defaults, with any of chairman.tmpl, candidate.tmpl, reviewer.tmpl,
// difficulty_judge.tmpl, tagger.tmpl, direction.tmpl found in `dir` taking precedence.
TemplateSet load_templates(const std::string &dir);

// Replaces one template of `set` from a file; `slot` is the file stem listed above.
void override_template(TemplateSet &set, const std::string &slot, const std::string &path);

std::map<std::string, std::string> template_digests(const TemplateSet &set);

}  // namespace panelsynth
