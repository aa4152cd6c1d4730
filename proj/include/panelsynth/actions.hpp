#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace panelsynth {

// Tagged actions an agent may emit: <think>, <ask>, <respond>, <criticize>.
enum class ActionKind { Think, Ask, Respond, Criticize };

inline constexpr std::array<ActionKind, 4> kAllActionKinds = {
    ActionKind::Think, ActionKind::Ask, ActionKind::Respond, ActionKind::Criticize};

// Lowercase wire name of the tag.
std::string_view tag_name(ActionKind kind);
// Case-insensitive lookup; nullopt for anything that is not one of the four tags.
std::optional<ActionKind> action_from_tag(std::string_view name);

class ActionSet {
public:
    ActionSet() = default;

    bool contains(ActionKind kind) const { return entries_.count(kind) != 0; }
    const std::string *find(ActionKind kind) const;
    const std::string &at(ActionKind kind) const { return entries_.at(kind); }
    // Returns false and leaves the set unchanged when kind is already present.
    bool insert(ActionKind kind, std::string body);
    void erase(ActionKind kind) { entries_.erase(kind); }

    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<ActionKind, std::string> &entries() const noexcept { return entries_; }

    bool operator==(const ActionSet &) const = default;

private:
    std::map<ActionKind, std::string> entries_;
};

struct ParseWarning {
    enum class Kind { DuplicateTag };
    Kind kind = Kind::DuplicateTag;
    ActionKind action = ActionKind::Think;
    // Byte offset of the ignored opener.
    std::size_t offset = 0;

    bool operator==(const ParseWarning &) const = default;
};

struct ParseResult {
    ActionSet actions;
    std::vector<ParseWarning> warnings;
};

// Collects every well-formed tag span; prose outside tags is ignored. The first occurrence
// of a repeated kind wins and later ones produce a DuplicateTag warning.
// Throws ParseError(UnterminatedTag | MalformedNesting | EmptyTagBody).
ParseResult scan_actions(std::string_view raw);

// scan_actions plus a check that `required` is present.
// Throws ParseError(MissingRequiredTag) in addition to the scan errors.
ParseResult parse_actions(std::string_view raw, ActionKind required);

ActionSet strip_think(ActionSet actions);

// Canonical wire form: one <tag>body</tag> per entry in enum order, no separators.
std::string render_actions(const ActionSet &actions);

}  // namespace panelsynth
