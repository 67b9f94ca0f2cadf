// SPDX-License-Identifier: Apache-2.0

// Command-line surface: ask, bench, simulate, replay and frames.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace vidscout {

enum ExitCode : int {
    kExitAnswered = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitDegraded = 3,
    kExitErrored = 4,
};

/// Parses "7", "1..200" or "1,5,9" (ranges allowed inside lists).
/// Throws ValidationError.
std::vector<std::uint64_t> parse_seed_spec(std::string_view spec);

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace vidscout
