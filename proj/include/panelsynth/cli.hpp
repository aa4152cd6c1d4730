#pragma once

#include <iosfwd>

namespace panelsynth {

// Exit codes: 0 success, 1 failed dialogues (without --allow-partial) or validation
// violations, 2 bad configuration or usage, 3 unreadable or malformed input files.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace panelsynth
