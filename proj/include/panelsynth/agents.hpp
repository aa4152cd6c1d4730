#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelsynth/dialogue.hpp"
#include "panelsynth/gateway.hpp"
#include "panelsynth/templates.hpp"

namespace panelsynth {

// Fills the {word_limit} and {input} slots of a role's action guide.
std::string render_action_guide(const RoleTemplate &tmpl, int word_limit, std::string_view input);

// "Judge 1: ...\nJudge 2: ..." in reviewer order.
std::string format_committee_comments(const ReviewSet &reviews);

// Candidate prompt: system text, few-shot exchange, every prior turn as a user question
// followed by an assistant answer, then the action guide carrying `question`.
// Throws ValidationError(EmptyInstruction) when the question is blank.
std::vector<ChatMessage> build_candidate_messages(const RoleTemplate &tmpl, std::span<const Turn> history,
                                                  std::string_view question, int word_limit);

// Reviewer prompt. The panel is the speaker here, so prior questions are assistant
// messages and prior answers user messages; the question under review closes the
// history and the answer rides in the action guide. `history` holds the turns before
// the one under review. Throws ValidationError(EmptyAnswer) on a blank answer.
std::vector<ChatMessage> build_reviewer_messages(const RoleTemplate &tmpl, std::span<const Turn> history,
                                                 std::string_view question, std::string_view answer,
                                                 int word_limit);

// Chairman prompt: system text, few-shot exchange, the whole dialogue so far, then the
// action guide carrying the committee comments.
// Throws ValidationError(EmptyReviewSet) when there are no critiques.
std::vector<ChatMessage> build_chairman_messages(const RoleTemplate &tmpl, std::span<const Turn> dialogue,
                                                 const ReviewSet &reviews, int word_limit);

// Parses a completion for the role's required action and returns its body. Think content
// is dropped. Throws ParseError on a protocol violation.
std::string extract_action(std::string_view raw, RoleKind role);

}  // namespace panelsynth
