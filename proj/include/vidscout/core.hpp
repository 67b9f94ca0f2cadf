// SPDX-License-Identifier: Apache-2.0

// Shared domain types for the plan / observe / reflect engine, their
// configuration defaults, and the canonical JSON encoding used in traces.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vidscout {

using json = nlohmann::json;

struct FrameManifest;

// ---------------------------------------------------------------------------
// Query / video
// ---------------------------------------------------------------------------

struct OptionChoice {
    char letter = 'A';
    std::string text;

    bool operator==(const OptionChoice&) const = default;
};

struct Query {
    std::string text;
    std::vector<OptionChoice> options; // empty for open-ended questions
    std::string video_id;

    /// Builds a query with letters assigned A, B, C, ... in order.
    static Query make(std::string text, const std::vector<std::string>& option_texts,
                      std::string video_id);

    bool operator==(const Query&) const = default;
};

/// Throws ValidationError unless the text is non-empty and option letters
/// are unique and contiguous from 'A'.
void validate(const Query& query);

struct VideoMeta {
    std::string video_id;
    double duration_sec = 0.0;
    std::string frame_source; // manifest path, or a synthetic source tag
    std::shared_ptr<const FrameManifest> frames;

    bool operator==(const VideoMeta& o) const
    {
        return video_id == o.video_id && duration_sec == o.duration_sec
               && frame_source == o.frame_source;
    }
};

void validate(const VideoMeta& meta);

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

enum class SpatialRes { low, medium };

constexpr std::int64_t tokens_per_frame(SpatialRes res) noexcept
{
    return res == SpatialRes::low ? 66 : 258;
}

constexpr int rank(SpatialRes res) noexcept { return res == SpatialRes::low ? 0 : 1; }

std::string_view to_string(SpatialRes res) noexcept;
std::optional<SpatialRes> parse_spatial_res(std::string_view text);

struct TimeRange {
    double start = 0.0;
    double end = 0.0;

    double length() const noexcept { return end - start; }
    bool operator==(const TimeRange&) const = default;
};

enum class WhereMode { uniform, region };

std::string_view to_string(WhereMode mode) noexcept;

struct Plan {
    std::string what;
    WhereMode where = WhereMode::uniform;
    std::vector<TimeRange> regions; // empty iff uniform
    double fps = 0.5;
    SpatialRes res = SpatialRes::low;
    int round = 1;

    bool operator==(const Plan&) const = default;
};

// ---------------------------------------------------------------------------
// Evidence
// ---------------------------------------------------------------------------

struct EvidenceItem {
    std::int64_t start_sec = 0;
    std::int64_t end_sec = 0;
    std::string description;
    int round = 1;

    bool operator==(const EvidenceItem&) const = default;
};

/// Cumulative evidence list. Append-only: a ledger at round r is always a
/// prefix of the same ledger at any later round.
class EvidenceLedger {
public:
    EvidenceLedger() = default;

    /// Appends one round's slice. Items must carry a round number no smaller
    /// than anything already stored.
    void append(std::span<const EvidenceItem> slice);

    const std::vector<EvidenceItem>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    /// Items recorded for the given round, in insertion order.
    std::vector<EvidenceItem> slice(int round) const;

    /// Items ordered by (start, end), ties kept in insertion order.
    std::vector<EvidenceItem> sorted_by_interval() const;

    bool operator==(const EvidenceLedger&) const = default;

private:
    std::vector<EvidenceItem> items_;
};

// ---------------------------------------------------------------------------
// Reflection / history
// ---------------------------------------------------------------------------

struct Reflection {
    double confidence = 0.0;
    bool sufficient = false;
    std::string justification;
    std::string reasoning;

    bool operator==(const Reflection&) const = default;
};

struct HistoryEntry {
    Plan plan;
    std::vector<EvidenceItem> evidence;
    std::string justification;

    bool operator==(const HistoryEntry&) const = default;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct FpsBounds {
    double min = 0.25;
    double max = 2.0;

    double clamp(double fps) const noexcept;
    bool operator==(const FpsBounds&) const = default;
};

struct BackendPolicy {
    double timeout_s = 120.0;
    int max_retries = 3;
    double backoff_initial_s = 1.0; // doubles per retry: 1 s, 2 s, 4 s

    bool operator==(const BackendPolicy&) const = default;
};

struct SessionConfig {
    int max_rounds = 3;
    double confidence_threshold = 0.7;
    std::int64_t token_budget = 128000;
    std::int64_t text_reserve_tokens = 4096;
    FpsBounds fps_bounds;
    BackendPolicy backend;

    /// Tokens available for frames in a single observer request.
    std::int64_t frame_budget() const noexcept { return token_budget - text_reserve_tokens; }

    bool operator==(const SessionConfig&) const = default;
};

SessionConfig default_config();

/// Returns a normalized copy (swapped fps bounds are reordered) or throws
/// ConfigError.
SessionConfig validate_config(SessionConfig cfg);

// ---------------------------------------------------------------------------
// Accounting
// ---------------------------------------------------------------------------

struct RoundAccounting {
    int round = 0;
    std::int64_t input_tokens = 0;
    std::int64_t frame_count = 0;
    int backend_calls = 0;
    std::int64_t wall_time_ms = 0;

    RoundAccounting& operator+=(const RoundAccounting& o);
    bool operator==(const RoundAccounting&) const = default;
};

class Accounting {
public:
    /// Entry for `round`, created (in round order) on first use.
    RoundAccounting& at_round(int round);

    const std::vector<RoundAccounting>& rounds() const noexcept { return rounds_; }

    /// Sum over all rounds; `round` is the number of rounds recorded.
    RoundAccounting total() const;

    bool operator==(const Accounting&) const = default;

private:
    std::vector<RoundAccounting> rounds_;
};

enum class HaltReason { confidence, forced };

std::string_view to_string(HaltReason reason) noexcept;

// ---------------------------------------------------------------------------
// Token estimation
// ---------------------------------------------------------------------------

/// ceil(chars / 4). Good enough for reserve accounting on English prompts.
std::int64_t estimate_text_tokens(std::string_view text) noexcept;

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

void to_json(json& j, const OptionChoice& v);
void from_json(const json& j, OptionChoice& v);
void to_json(json& j, const Query& v);
void from_json(const json& j, Query& v);
void to_json(json& j, const VideoMeta& v);
void from_json(const json& j, VideoMeta& v);
void to_json(json& j, SpatialRes v);
void from_json(const json& j, SpatialRes& v);
void to_json(json& j, WhereMode v);
void from_json(const json& j, WhereMode& v);
void to_json(json& j, const TimeRange& v);
void from_json(const json& j, TimeRange& v);
void to_json(json& j, const Plan& v);
void from_json(const json& j, Plan& v);
void to_json(json& j, const EvidenceItem& v);
void from_json(const json& j, EvidenceItem& v);
void to_json(json& j, const EvidenceLedger& v);
void from_json(const json& j, EvidenceLedger& v);
void to_json(json& j, const Reflection& v);
void from_json(const json& j, Reflection& v);
void to_json(json& j, const HistoryEntry& v);
void from_json(const json& j, HistoryEntry& v);
void to_json(json& j, const FpsBounds& v);
void from_json(const json& j, FpsBounds& v);
void to_json(json& j, const BackendPolicy& v);
void from_json(const json& j, BackendPolicy& v);
void to_json(json& j, const SessionConfig& v);
void from_json(const json& j, SessionConfig& v);
void to_json(json& j, const RoundAccounting& v);
void from_json(const json& j, RoundAccounting& v);
void to_json(json& j, const Accounting& v);
void from_json(const json& j, Accounting& v);
void to_json(json& j, HaltReason v);
void from_json(const json& j, HaltReason& v);

} // namespace vidscout
