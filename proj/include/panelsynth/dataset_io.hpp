#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "panelsynth/dialogue.hpp"

namespace panelsynth {

enum class SeedFormat { AlpacaJson, InstructionJsonl };

// ".json" -> AlpacaJson, ".jsonl" -> InstructionJsonl.
std::optional<SeedFormat> seed_format_for_path(const std::string &path);

// Alpaca arrays map instruction/input/output to instruction (+ "\n\n" + input) and
// response. JSONL lines accept id, instruction, input, response (or output), source.
// Throws IoError, FormatError, or ValidationError (message names the line or record).
std::vector<RawSeed> read_seed_records(const std::string &path, SeedFormat format);
std::vector<SeedInstruction> load_seeds(const std::string &path, SeedFormat format);

// One JSONL line in the InstructionJsonl format, without the newline.
std::string seed_to_json(const SeedInstruction &seed);

// Exported conversation: (question, answer) pairs only.
struct DialogueRecord {
    std::string id;
    std::vector<std::pair<std::string, std::string>> turns;

    bool operator==(const DialogueRecord &) const = default;
};

DialogueRecord to_record(const Conversation &conv);

// {"id": ..., "conversations": [{"from": "human", "value": Q0}, {"from": "gpt", "value": A0}, ...]}
// with keys in that order, UTF-8, no trailing newline.
// Throws ValidationError(FailedConversationInExport) for a failed conversation.
std::string export_line(const Conversation &conv);
std::string export_line(const DialogueRecord &record);

// Writes one line per conversation (LF endings) and returns the count written.
std::size_t export_conversations(std::span<const Conversation> convs, const std::string &path);

// Throws FormatError naming line_no when the line is not a well-formed dialogue record.
DialogueRecord parse_export_line(std::string_view line, std::size_t line_no);
std::vector<DialogueRecord> load_dialogues(const std::string &path);

struct Violation {
    std::size_t line = 0;
    std::string message;
};

// Schema and invariant check of a seed or dialogue file; the kind is detected from the
// content. An empty file is a violation.
std::vector<Violation> check_file(const std::string &path);

// Reads `path` line by line; a trailing line without '\n' is dropped from the file when
// `repair_tail` is set (a torn write from an interrupted run).
std::vector<std::string> read_lines(const std::string &path, bool repair_tail = false);

}  // namespace panelsynth
