#include "panelsynth/agents.hpp"

#include "panelsynth/actions.hpp"
#include "panelsynth/errors.hpp"

namespace panelsynth {

namespace {

std::vector<ChatMessage> preamble(const RoleTemplate &tmpl) {
    std::vector<ChatMessage> messages;
    messages.push_back({ChatRole::System, tmpl.system_text});
    messages.insert(messages.end(), tmpl.few_shot.begin(), tmpl.few_shot.end());
    return messages;
}

}  // namespace

std::string render_action_guide(const RoleTemplate &tmpl, int word_limit, std::string_view input) {
    return render_placeholders(tmpl.action_guide_text,
                               {{"word_limit", std::to_string(word_limit)}, {"input", std::string(input)}});
}

std::string format_committee_comments(const ReviewSet &reviews) {
    std::string out;
    for (std::size_t i = 0; i < reviews.critiques.size(); ++i) {
        if (i) out += '\n';
        out += "Judge " + std::to_string(i + 1) + ": " + reviews.critiques[i].text;
    }
    return out;
}

std::vector<ChatMessage> build_candidate_messages(const RoleTemplate &tmpl, std::span<const Turn> history,
                                                  std::string_view question, int word_limit) {
    if (trim(question).empty()) {
        throw ValidationError(ValidationCode::EmptyInstruction, "candidate prompt needs a question");
    }
    auto messages = preamble(tmpl);
    for (const auto &turn : history) {
        messages.push_back({ChatRole::User, turn.instruction});
        messages.push_back({ChatRole::Assistant, turn.answer});
    }
    messages.push_back({ChatRole::User, render_action_guide(tmpl, word_limit, question)});
    return messages;
}

std::vector<ChatMessage> build_reviewer_messages(const RoleTemplate &tmpl, std::span<const Turn> history,
                                                 std::string_view question, std::string_view answer,
                                                 int word_limit) {
    if (trim(answer).empty()) throw ValidationError(ValidationCode::EmptyAnswer, "reviewer prompt needs an answer");
    if (trim(question).empty()) {
        throw ValidationError(ValidationCode::EmptyInstruction, "reviewer prompt needs the question under review");
    }
    auto messages = preamble(tmpl);
    for (const auto &turn : history) {
        messages.push_back({ChatRole::Assistant, turn.instruction});
        messages.push_back({ChatRole::User, turn.answer});
    }
    messages.push_back({ChatRole::Assistant, std::string(question)});
    messages.push_back({ChatRole::User, render_action_guide(tmpl, word_limit, answer)});
    return messages;
}

std::vector<ChatMessage> build_chairman_messages(const RoleTemplate &tmpl, std::span<const Turn> dialogue,
                                                 const ReviewSet &reviews, int word_limit) {
    if (reviews.critiques.empty()) {
        throw ValidationError(ValidationCode::EmptyReviewSet, "the chairman cannot ask without committee comments");
    }
    auto messages = preamble(tmpl);
    for (const auto &turn : dialogue) {
        messages.push_back({ChatRole::User, turn.instruction});
        messages.push_back({ChatRole::Assistant, turn.answer});
    }
    messages.push_back({ChatRole::User, render_action_guide(tmpl, word_limit, format_committee_comments(reviews))});
    return messages;
}

std::string extract_action(std::string_view raw, RoleKind role) {
    const auto required = required_action_for(role);
    const auto actions = strip_think(parse_actions(raw, required).actions);
    return actions.at(required);
}

}  // namespace panelsynth
