#pragma once

#include <iosfwd>

namespace sdid::cli {

// Entry point behind the sdid_event binary, callable in-process for tests.
// Subcommands: estimate (ATT + event-study table from a long CSV) and
// generate (synthetic panel from a JSON spec). Exit codes: 0 success,
// 1 usage error, 2 validation error, 3 solver failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdid::cli
