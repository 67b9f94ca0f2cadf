// SPDX-License-Identifier: Apache-2.0

// Rule-based temporal cue extraction for query text.
//
// Recognized forms:
//   mm:ss, hh:mm:ss          timestamps ("1:23", "07:15", "1:02:03")
//   <t> - <t>, <t> to <t>    exact ranges (hyphen, en dash, em dash or "to")
//   between <t> and <t>
//   at <t>                   single timestamp; a bare <t> is treated the same
//   around / about <t>       approximate time
//   opening, beginning       start of the video
//   end, ending              end of the video
// After "at", "around", "from" and friends a bare integer counts as seconds.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "vidscout/core.hpp"

namespace vidscout {

enum class CueKind {
    exact_range,
    single_timestamp,
    approximate,
    positional_open,
    positional_end,
    none,
};

std::string_view to_string(CueKind kind) noexcept;

struct TimeCue {
    CueKind kind = CueKind::none;
    std::vector<double> values; // seconds; 2 for ranges, 1 for points, 0 otherwise
    std::size_t span_begin = 0; // byte offsets into the query text
    std::size_t span_end = 0;

    bool operator==(const TimeCue&) const = default;
};

enum class QueryClass { factual, reasoning };

std::string_view to_string(QueryClass cls) noexcept;

/// Padding applied around timestamps for reasoning questions and vague times.
inline constexpr double kContextPadSec = 15.0;
/// Window length for "opening" / "end" cues.
inline constexpr double kPositionalWindowSec = 30.0;
/// Forward window after a single timestamp in factual questions.
inline constexpr double kForwardWindowSec = 1.0;

/// Cues in textual order; a single none-cue when nothing matches.
std::vector<TimeCue> parse_time_cues(std::string_view text);

/// Leftmost keyword wins; at a given position the longest keyword wins, so
/// "how many" is factual even though "how" alone is a reasoning keyword.
/// Text without keywords is factual.
QueryClass classify_query(std::string_view text);

/// Compiles cues into sorted, disjoint regions inside [0, duration]. Returns
/// an empty list when no cue yields a region (the caller scans uniformly).
std::vector<TimeRange> apply_timestamp_rules(std::span<const TimeCue> cues, QueryClass cls,
                                             double duration_sec);

/// Sorts and merges overlapping or touching ranges.
std::vector<TimeRange> merge_ranges(std::vector<TimeRange> ranges);

/// Clamps to [0, duration]. A range that collapses while its anchor lies in
/// [0, duration] is widened to a window of up to 1 s; otherwise nullopt.
std::optional<TimeRange> clamp_range(TimeRange range, double duration_sec);

} // namespace vidscout
