#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelsynth/dialogue.hpp"
#include "panelsynth/gateway.hpp"
#include "panelsynth/templates.hpp"

namespace panelsynth {

// Exact ratio with den > 0, always reduced.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Fraction of(std::int64_t num, std::int64_t den);
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    Fraction operator+(const Fraction &o) const;
    Fraction operator-(const Fraction &o) const;
    bool operator==(const Fraction &) const = default;
};

struct InstructionRef {
    std::string conversation_id;
    int turn_index = 0;

    bool operator==(const InstructionRef &) const = default;
};

struct TagSet {
    InstructionRef ref;
    std::set<std::string> tags;  // lowercase, trimmed, nonempty

    bool operator==(const TagSet &) const = default;
};

// ASCII-lowercases, trims, drops empties, deduplicates.
std::set<std::string> normalize_tags(std::span<const std::string> raw);

// Accepts a JSON array of strings or of {"tag": ...} objects, optionally wrapped in prose
// or a code fence. Throws ParseError(BadTaggerOutput) when no tag survives.
TagSet parse_tagger_output(std::string_view raw, InstructionRef ref);

enum class Difficulty { Easy, Medium, Hard };

const char *to_string(Difficulty d);
std::optional<Difficulty> difficulty_from_string(std::string_view label);

struct DifficultyRecord {
    InstructionRef ref;
    std::string intent;
    std::string knowledge;
    Difficulty difficulty = Difficulty::Easy;
};

std::string render_difficulty_prompt(const PromptTemplate &tmpl, std::string_view instruction);
std::string render_tagger_prompt(const PromptTemplate &tmpl, std::string_view instruction);

// Reads the first JSON object in the judge's reply. Throws ParseError(BadJudgeJson) when
// it is missing, malformed, or its difficulty is not easy/medium/hard (any case).
DifficultyRecord parse_judge_output(std::string_view raw, InstructionRef ref);

// Where a measurement call goes.
struct MeasurementAgent {
    Gateway &gateway;
    const AgentProfile &profile;
    const PromptTemplate &prompt;
    int max_parse_retries = 3;
};

// nullopt when every attempt produced unparseable output (Unclassified / Untagged).
// BackendError propagates.
std::optional<DifficultyRecord> classify_difficulty(std::string_view instruction, const InstructionRef &ref,
                                                    const MeasurementAgent &judge);
std::optional<TagSet> tag_instruction(std::string_view instruction, const InstructionRef &ref,
                                      const MeasurementAgent &tagger);

struct RoundNovelty {
    int round = 1;
    std::size_t new_tags = 0;
    Fraction ratio;
};

struct DiversityResult {
    std::vector<RoundNovelty> rounds;
    std::size_t unique_tags = 0;
};

// rounds[r] holds the tag sets of round r + 1. The ratio for round r is the number of
// tags first seen in r over the number of unique tags in the whole dataset.
// Throws ValidationError(EmptyDataset) when no tag appears anywhere.
DiversityResult diversity_by_round(std::span<const std::vector<TagSet>> rounds);

struct DifficultyHistogram {
    int round = 1;
    std::size_t easy = 0;
    std::size_t medium = 0;
    std::size_t hard = 0;
    std::size_t unclassified = 0;
    Fraction hard_share;  // hard / classified; 0 when nothing was classified

    std::size_t classified() const noexcept { return easy + medium + hard; }
};

// nullopt entries are Unclassified. Throws ValidationError(EmptyRound) for a round with no
// entries at all.
std::vector<DifficultyHistogram> difficulty_by_round(std::span<const std::vector<std::optional<Difficulty>>> rounds);

enum class EvolutionDirection { Breadth, Depth };

const char *to_string(EvolutionDirection d);

// Finds "breadth" or "depth" in the reply (JSON "direction" field first, then a bare
// word); nullopt when neither or both appear.
std::optional<EvolutionDirection> parse_direction_output(std::string_view raw);

struct EvolutionStep {
    std::string question;
    std::string answer;
    ReviewSet reviews;
    std::string follow_up;
};

std::string render_direction_prompt(const PromptTemplate &tmpl, const EvolutionStep &step);

// Labels whether a follow-up widened the topic or dug into a weakness. nullopt = Unlabeled.
std::optional<EvolutionDirection> annotate_evolution_direction(const EvolutionStep &step, const InstructionRef &ref,
                                                               const MeasurementAgent &judge);

}  // namespace panelsynth
