#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "panelsynth/dataset_io.hpp"
#include "panelsynth/metrics.hpp"

namespace panelsynth {

struct RoundReport {
    int round = 1;
    std::size_t instructions = 0;
    std::size_t untagged = 0;
    std::size_t new_tags = 0;
    Fraction new_tag_ratio;
    DifficultyHistogram difficulty;
};

struct AnalysisReport {
    std::vector<RoundReport> rounds;
    std::size_t unique_tags = 0;
    std::size_t instruction_count = 0;
    std::size_t conversation_count = 0;
};

// Per-instruction measurements grouped by round (round r + 1 at index r). A nullopt tag set
// is Untagged; a nullopt difficulty is Unclassified.
struct RoundMeasurements {
    std::vector<std::vector<std::optional<TagSet>>> tags;
    std::vector<std::vector<std::optional<Difficulty>>> difficulty;
};

AnalysisReport build_report(const RoundMeasurements &m, std::size_t conversation_count);

struct AnalysisAgents {
    MeasurementAgent judge;
    MeasurementAgent tagger;
    int concurrency = 4;
};

// Round r holds the r-th question of every conversation.
RoundMeasurements measure_dialogues(std::span<const DialogueRecord> dialogues, const AnalysisAgents &agents);

AnalysisReport analyze_dialogues(std::span<const DialogueRecord> dialogues, const AnalysisAgents &agents);

struct RoundDelta {
    int round = 1;
    Fraction hard_share_delta;     // primary minus baseline
    Fraction new_tag_ratio_delta;  // primary minus baseline
};

struct Comparison {
    std::vector<RoundDelta> rounds;  // rounds present in both reports
};

Comparison compare_reports(const AnalysisReport &primary, const AnalysisReport &baseline);

// Stable JSON rendering (fixed key order, two-space indent, trailing newline).
std::string report_json(const AnalysisReport &report, const std::optional<AnalysisReport> &baseline = std::nullopt);
std::string report_table(const AnalysisReport &report, const std::optional<AnalysisReport> &baseline = std::nullopt);

}  // namespace panelsynth
