#include "panelsynth/analysis.hpp"

#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "panelsynth/errors.hpp"

namespace panelsynth {

namespace {

nlohmann::ordered_json fraction_json(const Fraction &f) {
    nlohmann::ordered_json j;
    j["num"] = f.num;
    j["den"] = f.den;
    j["value"] = f.value();
    return j;
}

std::string percent(const Fraction &f) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * f.value());
    return buf;
}

std::string signed_percent(const Fraction &f) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f", 100.0 * f.value());
    return buf;
}

}  // namespace

AnalysisReport build_report(const RoundMeasurements &m, std::size_t conversation_count) {
    if (m.tags.size() != m.difficulty.size()) {
        throw ValidationError(ValidationCode::EmptyRound, "tag and difficulty rounds differ in count");
    }
    std::vector<std::vector<TagSet>> tagged(m.tags.size());
    AnalysisReport report;
    report.conversation_count = conversation_count;
    for (std::size_t r = 0; r < m.tags.size(); ++r) {
        RoundReport rr;
        rr.round = static_cast<int>(r + 1);
        rr.instructions = m.tags[r].size();
        for (const auto &t : m.tags[r]) {
            if (t) {
                tagged[r].push_back(*t);
            } else {
                ++rr.untagged;
            }
        }
        report.instruction_count += rr.instructions;
        report.rounds.push_back(rr);
    }
    const auto diversity = diversity_by_round(tagged);
    const auto hist = difficulty_by_round(m.difficulty);
    report.unique_tags = diversity.unique_tags;
    for (std::size_t r = 0; r < report.rounds.size(); ++r) {
        report.rounds[r].new_tags = diversity.rounds[r].new_tags;
        report.rounds[r].new_tag_ratio = diversity.rounds[r].ratio;
        report.rounds[r].difficulty = hist[r];
    }
    return report;
}

RoundMeasurements measure_dialogues(std::span<const DialogueRecord> dialogues, const AnalysisAgents &agents) {
    struct Item {
        std::size_t round;
        std::size_t slot;
        const std::string *text;
        InstructionRef ref;
    };
    std::vector<Item> items;
    RoundMeasurements m;
    for (const auto &d : dialogues) {
        for (std::size_t t = 0; t < d.turns.size(); ++t) {
            if (m.tags.size() <= t) {
                m.tags.resize(t + 1);
                m.difficulty.resize(t + 1);
            }
            items.push_back({t, m.tags[t].size(), &d.turns[t].first, {d.id, static_cast<int>(t)}});
            m.tags[t].emplace_back();
            m.difficulty[t].emplace_back();
        }
    }
    if (items.empty()) throw ValidationError(ValidationCode::EmptyDataset, "no instructions to analyze");

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    const auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            const auto &item = items[i];
            try {
                auto tags = tag_instruction(*item.text, item.ref, agents.tagger);
                auto difficulty = classify_difficulty(*item.text, item.ref, agents.judge);
                std::lock_guard lock(mu);
                m.tags[item.round][item.slot] = std::move(tags);
                if (difficulty) m.difficulty[item.round][item.slot] = difficulty->difficulty;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = items.size();
            }
        }
    };
    {
        const auto n = std::max(1, std::min<int>(agents.concurrency, static_cast<int>(items.size())));
        std::vector<std::jthread> pool;
        for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return m;
}

AnalysisReport analyze_dialogues(std::span<const DialogueRecord> dialogues, const AnalysisAgents &agents) {
    return build_report(measure_dialogues(dialogues, agents), dialogues.size());
}

Comparison compare_reports(const AnalysisReport &primary, const AnalysisReport &baseline) {
    Comparison c;
    const auto n = std::min(primary.rounds.size(), baseline.rounds.size());
    for (std::size_t r = 0; r < n; ++r) {
        const auto &a = primary.rounds[r];
        const auto &b = baseline.rounds[r];
        c.rounds.push_back({a.round, a.difficulty.hard_share - b.difficulty.hard_share, a.new_tag_ratio - b.new_tag_ratio});
    }
    return c;
}

std::string report_json(const AnalysisReport &report, const std::optional<AnalysisReport> &baseline) {
    const auto render = [](const AnalysisReport &rep) {
        nlohmann::ordered_json j;
        j["conversations"] = rep.conversation_count;
        j["instructions"] = rep.instruction_count;
        j["unique_tags"] = rep.unique_tags;
        auto &rounds = j["rounds"] = nlohmann::ordered_json::array();
        for (const auto &r : rep.rounds) {
            nlohmann::ordered_json jr;
            jr["round"] = r.round;
            jr["instructions"] = r.instructions;
            jr["untagged"] = r.untagged;
            jr["new_tags"] = r.new_tags;
            jr["new_tag_ratio"] = fraction_json(r.new_tag_ratio);
            nlohmann::ordered_json h;
            h["easy"] = r.difficulty.easy;
            h["medium"] = r.difficulty.medium;
            h["hard"] = r.difficulty.hard;
            h["unclassified"] = r.difficulty.unclassified;
            jr["difficulty"] = h;
            jr["hard_share"] = fraction_json(r.difficulty.hard_share);
            rounds.push_back(std::move(jr));
        }
        return j;
    };
    nlohmann::ordered_json doc = render(report);
    if (baseline) {
        doc["baseline"] = render(*baseline);
        auto &deltas = doc["deltas"] = nlohmann::ordered_json::array();
        for (const auto &d : compare_reports(report, *baseline).rounds) {
            nlohmann::ordered_json jd;
            jd["round"] = d.round;
            jd["hard_share_delta"] = fraction_json(d.hard_share_delta);
            jd["new_tag_ratio_delta"] = fraction_json(d.new_tag_ratio_delta);
            deltas.push_back(std::move(jd));
        }
    }
    return doc.dump(2) + "\n";
}

std::string report_table(const AnalysisReport &report, const std::optional<AnalysisReport> &baseline) {
    std::ostringstream out;
    char line[160];
    out << "conversations: " << report.conversation_count << "  instructions: " << report.instruction_count
        << "  unique tags: " << report.unique_tags << "\n\n";
    std::snprintf(line, sizeof line, "%-6s %8s %9s %10s %6s %7s %6s %8s %11s\n", "round", "instr", "new tags",
                  "new ratio", "easy", "medium", "hard", "unclass", "hard share");
    out << line;
    for (const auto &r : report.rounds) {
        std::snprintf(line, sizeof line, "%-6d %8zu %9zu %10s %6zu %7zu %6zu %8zu %11s\n", r.round, r.instructions,
                      r.new_tags, percent(r.new_tag_ratio).c_str(), r.difficulty.easy, r.difficulty.medium,
                      r.difficulty.hard, r.difficulty.unclassified, percent(r.difficulty.hard_share).c_str());
        out << line;
    }
    if (baseline) {
        out << "\ndelta vs baseline (percentage points)\n";
        std::snprintf(line, sizeof line, "%-6s %12s %12s\n", "round", "hard share", "new ratio");
        out << line;
        for (const auto &d : compare_reports(report, *baseline).rounds) {
            std::snprintf(line, sizeof line, "%-6d %12s %12s\n", d.round, signed_percent(d.hard_share_delta).c_str(),
                          signed_percent(d.new_tag_ratio_delta).c_str());
            out << line;
        }
    }
    return out.str();
}

}  // namespace panelsynth
