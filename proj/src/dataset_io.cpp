#include "panelsynth/dataset_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "panelsynth/errors.hpp"

namespace panelsynth {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string read_all(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

// Line on which each element of a top-level JSON array starts.
std::vector<std::size_t> array_element_lines(std::string_view text) {
    std::vector<std::size_t> lines;
    std::size_t line = 1;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    bool expect_element = false;
    for (const char c : text) {
        if (c == '\n') ++line;
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
        const bool blank = c == ' ' || c == '\t' || c == '\r' || c == '\n';
        if (depth == 1 && expect_element && !blank && c != ']') {
            lines.push_back(line);
            expect_element = false;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[' || c == '{') {
            if (++depth == 1) expect_element = true;
        } else if (c == ']' || c == '}') {
            --depth;
        } else if (c == ',' && depth == 1) {
            expect_element = true;
        }
    }
    return lines;
}

std::optional<std::string> optional_string(const json &obj, const char *key, std::size_t line) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FormatError(line, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

RawSeed raw_seed_from_object(const json &obj, std::size_t line, const std::string &source_tag, bool alpaca) {
    if (!obj.is_object()) throw FormatError(line, "expected a JSON object");
    RawSeed raw;
    raw.source_tag = source_tag;
    const auto instruction = optional_string(obj, "instruction", line);
    if (!instruction) throw FormatError(line, "missing 'instruction'");
    raw.instruction = *instruction;
    if (const auto input = optional_string(obj, "input", line); input && !trim(*input).empty()) {
        raw.instruction = trim(raw.instruction) + "\n\n" + trim(*input);
    }
    if (alpaca) {
        raw.response = optional_string(obj, "output", line);
    } else {
        raw.id = optional_string(obj, "id", line);
        raw.response = optional_string(obj, "response", line);
        if (!raw.response) raw.response = optional_string(obj, "output", line);
        if (const auto src = optional_string(obj, "source", line)) raw.source_tag = *src;
    }
    return raw;
}

std::string dump_line(const ordered_json &j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

}  // namespace

std::optional<SeedFormat> seed_format_for_path(const std::string &path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".json") return SeedFormat::AlpacaJson;
    if (ext == ".jsonl") return SeedFormat::InstructionJsonl;
    return std::nullopt;
}

std::vector<std::string> read_lines(const std::string &path, bool repair_tail) {
    std::vector<std::string> lines;
    if (!std::filesystem::exists(path)) return lines;
    const auto text = read_all(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            if (repair_tail) {
                std::filesystem::resize_file(path, pos);
            } else {
                lines.push_back(text.substr(pos));
            }
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::vector<RawSeed> read_seed_records(const std::string &path, SeedFormat format) {
    const auto text = read_all(path);
    const auto source_tag = std::filesystem::path(path).stem().string();
    std::vector<RawSeed> raws;

    if (format == SeedFormat::AlpacaJson) {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error &e) {
            throw FormatError(line_of_offset(text, e.byte), e.what());
        }
        if (!doc.is_array()) throw FormatError(1, "Alpaca data must be a JSON array of records");
        const auto lines = array_element_lines(text);
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto line = i < lines.size() ? lines[i] : 0;
            raws.push_back(raw_seed_from_object(doc[i], line, source_tag, true));
        }
        return raws;
    }

    std::size_t line_no = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error &e) {
            throw FormatError(line_no, e.what());
        }
        raws.push_back(raw_seed_from_object(obj, line_no, source_tag, false));
    }
    return raws;
}

std::vector<SeedInstruction> load_seeds(const std::string &path, SeedFormat format) {
    const auto raws = read_seed_records(path, format);
    return validate_seeds(raws);
}

std::string seed_to_json(const SeedInstruction &seed) {
    ordered_json j;
    j["id"] = seed.id;
    j["instruction"] = seed.instruction;
    if (seed.response) j["response"] = *seed.response;
    if (!seed.source_tag.empty()) j["source"] = seed.source_tag;
    return dump_line(j);
}

DialogueRecord to_record(const Conversation &conv) {
    if (!conv.complete()) {
        throw ValidationError(ValidationCode::FailedConversationInExport,
                              "conversation '" + conv.seed_id + "' did not complete");
    }
    validate_conversation(conv);
    DialogueRecord record;
    record.id = conv.seed_id;
    for (const auto &t : conv.turns) record.turns.emplace_back(t.instruction, t.answer);
    return record;
}

std::string export_line(const DialogueRecord &record) {
    ordered_json j;
    j["id"] = record.id;
    auto &turns = j["conversations"] = ordered_json::array();
    for (const auto &[q, a] : record.turns) {
        ordered_json human;
        human["from"] = "human";
        human["value"] = q;
        ordered_json gpt;
        gpt["from"] = "gpt";
        gpt["value"] = a;
        turns.push_back(std::move(human));
        turns.push_back(std::move(gpt));
    }
    try {
        return dump_line(j);
    } catch (const json::type_error &e) {
        throw ValidationError(ValidationCode::BadTurnSequence,
                              "conversation '" + record.id + "' is not valid UTF-8: " + e.what());
    }
}

std::string export_line(const Conversation &conv) { return export_line(to_record(conv)); }

std::size_t export_conversations(std::span<const Conversation> convs, const std::string &path) {
    std::vector<std::string> lines;
    lines.reserve(convs.size());
    for (const auto &c : convs) lines.push_back(export_line(c));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto &l : lines) out << l << '\n';
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
    return lines.size();
}

DialogueRecord parse_export_line(std::string_view line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error &e) {
        throw FormatError(line_no, e.what());
    }
    if (!obj.is_object()) throw FormatError(line_no, "expected a JSON object");
    DialogueRecord record;
    const auto id = obj.find("id");
    if (id == obj.end() || !id->is_string() || id->get<std::string>().empty()) {
        throw FormatError(line_no, "missing or empty 'id'");
    }
    record.id = id->get<std::string>();
    const auto conv = obj.find("conversations");
    if (conv == obj.end() || !conv->is_array() || conv->empty()) {
        throw FormatError(line_no, "missing or empty 'conversations' array");
    }
    if (conv->size() % 2 != 0) throw FormatError(line_no, "conversation does not end on a gpt message");
    for (std::size_t i = 0; i < conv->size(); ++i) {
        const auto &msg = (*conv)[i];
        const char *expected = i % 2 == 0 ? "human" : "gpt";
        if (!msg.is_object() || !msg.contains("from") || !msg.contains("value") || !msg["from"].is_string() ||
            !msg["value"].is_string()) {
            throw FormatError(line_no, "message " + std::to_string(i) + " needs string 'from' and 'value'");
        }
        if (msg["from"].get<std::string>() != expected) {
            throw FormatError(line_no, "message " + std::to_string(i) + " should be from '" + expected +
                                           "' (roles must alternate human/gpt)");
        }
        if (trim(msg["value"].get<std::string>()).empty()) {
            throw FormatError(line_no, "message " + std::to_string(i) + " is empty");
        }
    }
    for (std::size_t i = 0; i < conv->size(); i += 2) {
        record.turns.emplace_back((*conv)[i]["value"].get<std::string>(), (*conv)[i + 1]["value"].get<std::string>());
    }
    return record;
}

std::vector<DialogueRecord> load_dialogues(const std::string &path) {
    if (!std::filesystem::exists(path)) throw IoError("cannot read '" + path + "'");
    std::vector<DialogueRecord> records;
    std::unordered_set<std::string> ids;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        auto record = parse_export_line(lines[i], i + 1);
        if (!ids.insert(record.id).second) throw FormatError(i + 1, "duplicate id '" + record.id + "'");
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<Violation> check_file(const std::string &path) {
    std::vector<Violation> out;
    std::string text;
    try {
        text = read_all(path);
    } catch (const IoError &e) {
        out.push_back({0, e.what()});
        return out;
    }
    if (trim(text).empty()) {
        out.push_back({0, "file is empty"});
        return out;
    }

    if (trim(text).front() == '[') {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error &e) {
            out.push_back({line_of_offset(text, e.byte), e.what()});
            return out;
        }
        const auto lines = array_element_lines(text);
        std::unordered_set<std::string> ids;
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto line = i < lines.size() ? lines[i] : 0;
            try {
                const auto seed = validate_seed(raw_seed_from_object(doc[i], line, "", true));
                if (!ids.insert(seed.id).second) out.push_back({line, "duplicate seed (same content as an earlier record)"});
            } catch (const FormatError &e) {
                out.push_back({e.line(), e.cause()});
            } catch (const ValidationError &e) {
                out.push_back({line, e.what()});
            }
        }
        if (doc.empty()) out.push_back({1, "array has no records"});
        return out;
    }

    enum class Kind { Unknown, Seeds, Dialogues } kind = Kind::Unknown;
    std::unordered_set<std::string> ids;
    std::size_t records = 0;
    std::istringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++records;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error &e) {
            out.push_back({line_no, e.what()});
            continue;
        }
        const Kind this_kind = obj.is_object() && obj.contains("conversations") ? Kind::Dialogues : Kind::Seeds;
        if (kind == Kind::Unknown) kind = this_kind;
        if (this_kind != kind) {
            out.push_back({line_no, "record kind differs from the first record"});
            continue;
        }
        try {
            std::string id;
            if (kind == Kind::Dialogues) {
                id = parse_export_line(line, line_no).id;
            } else {
                id = validate_seed(raw_seed_from_object(obj, line_no, "", false)).id;
            }
            if (!ids.insert(id).second) out.push_back({line_no, "duplicate id '" + id + "'"});
        } catch (const FormatError &e) {
            out.push_back({e.line(), e.cause()});
        } catch (const ValidationError &e) {
            out.push_back({line_no, e.what()});
        }
    }
    if (records == 0) out.push_back({0, "file has no records"});
    return out;
}

}  // namespace panelsynth
