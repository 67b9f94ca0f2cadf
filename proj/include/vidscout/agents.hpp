// SPDX-License-Identifier: Apache-2.0

// Planner, observer and reflector: prompt construction, backend calls,
// response parsing and validation.
//
// Every model reply is parsed leniently and then validated, so a plan or
// evidence item leaving this module always satisfies the core invariants.
// Malformed replies get one re-ask before each agent degrades in its own
// documented way.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vidscout/core.hpp"
#include "vidscout/gateway.hpp"
#include "vidscout/media.hpp"

namespace vidscout {

struct ObservationResult {
    std::string detailed_response;
    std::vector<EvidenceItem> key_evidence;
    std::string reasoning;
    bool no_relevant = false;

    bool operator==(const ObservationResult&) const = default;
};

void to_json(json& j, const ObservationResult& v);
void from_json(const json& j, ObservationResult& v);

struct PlannerOutput {
    std::string reasoning;
    Plan plan;
};

/// Exact sentence an observer uses when a segment holds nothing relevant.
inline constexpr std::string_view kNoRelevantSentence =
    "No relevant information found in this time segment.";

/// Padding around evidence intervals when a failed replan falls back.
inline constexpr double kFallbackEvidencePadSec = 15.0;

/// Character cap on the prior-evidence summary sent to the observer.
inline constexpr std::size_t kObserverContextChars = 4000;

// ---------------------------------------------------------------------------
// Model channel: routes calls to per-role backends and books every call.
// ---------------------------------------------------------------------------

struct AgentBackends {
    Backend* planner = nullptr;
    Backend* observer = nullptr;
    Backend* reflector = nullptr;

    AgentBackends() = default;
    explicit AgentBackends(Backend& all) : planner(&all), observer(&all), reflector(&all) {}
    AgentBackends(Backend& p, Backend& o, Backend& r) : planner(&p), observer(&o), reflector(&r) {}

    Backend& for_role(AgentRole role) const;
};

struct CallRecord {
    int round = 0;
    AgentRole role = AgentRole::planner;
    int attempt = 0; // 0 for the first ask, 1 for a re-ask
    std::string digest;
    std::int64_t input_tokens = 0;
    bool input_estimated = true;
    std::optional<std::int64_t> output_tokens;
    std::int64_t frame_count = 0;
    std::int64_t frame_token_cost = 0;
    std::int64_t latency_ms = 0;
    std::int64_t wall_ms = 0;
};

void to_json(json& j, const CallRecord& v);

using TokenEstimator = std::function<std::int64_t(std::string_view)>;

class ModelChannel {
public:
    ModelChannel(AgentBackends backends, Clock& clock, Accounting& accounting,
                 TokenEstimator estimator = estimate_text_tokens);

    void set_round(int round) noexcept { round_ = round; }
    int round() const noexcept { return round_; }

    /// Sends and books tokens, frames and the call count to the current round.
    /// Input tokens are the provider's count when reported, otherwise frame
    /// cost plus the text estimate.
    BackendResponse send(const BackendRequest& req, std::int64_t frame_token_cost = 0,
                         int attempt = 0);

    const std::vector<CallRecord>& calls() const noexcept { return calls_; }
    Clock& clock() noexcept { return clock_; }
    const TokenEstimator& estimator() const noexcept { return estimator_; }

    /// Logical calls (re-asks excluded) for a role.
    int calls_for(AgentRole role) const;

private:
    AgentBackends backends_;
    Clock& clock_;
    Accounting& accounting_;
    TokenEstimator estimator_;
    int round_ = 1;
    std::vector<CallRecord> calls_;
};

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

/// Clamps fps to the configured bounds, clamps and merges regions, and
/// coerces region mode without regions to a uniform scan.
Plan validate_plan(Plan plan, double duration_sec, const SessionConfig& cfg,
                   std::string_view default_what);

/// Lenient parse of a planner JSON reply; throws MalformedOutput.
PlannerOutput parse_planner_output(const json& reply, const VideoMeta& meta,
                                   const SessionConfig& cfg, std::string_view default_what,
                                   int round);

/// Throws PlannerFailure when the reply stays malformed after one re-ask.
Plan plan_init(const Query& query, const VideoMeta& meta, ModelChannel& channel,
               const SessionConfig& cfg);

Plan plan_replan(const Query& query, const VideoMeta& meta, std::span<const HistoryEntry> history,
                 std::string_view justification, ModelChannel& channel, const SessionConfig& cfg);

/// Deterministic plan from the query's own temporal cues: regions at 2 fps
/// and medium resolution when cues exist, else a 0.5 fps low-res scan.
Plan rule_based_plan(const Query& query, const VideoMeta& meta, const SessionConfig& cfg);

/// Replacement for a failed replan: the previous plan narrowed to all
/// evidence intervals so far, padded by 15 s. Without any evidence, a
/// denser medium-resolution uniform scan.
Plan fallback_replan(std::span<const HistoryEntry> history, const VideoMeta& meta,
                     const SessionConfig& cfg);

// ---------------------------------------------------------------------------
// Observer
// ---------------------------------------------------------------------------

/// floor(start), ceil(end), clamped to [0, ceil(duration)].
EvidenceItem round_evidence(double start, double end, std::string description,
                            double duration_sec, int round);

/// Lenient parse of an observer JSON reply; throws MalformedOutput.
ObservationResult parse_observation(const json& reply, double duration_sec, int round);

/// Builds the clip, attaches the resolved frames and extracts evidence.
/// A reply that stays malformed yields an empty no_relevant result.
ObservationResult observe(const Query& query, const Plan& plan, const VideoMeta& meta,
                          const EvidenceLedger& prior, ModelChannel& channel,
                          const SessionConfig& cfg, SampledClip* clip_out = nullptr);

/// Most recent rounds first, capped at kObserverContextChars.
std::string summarize_context(const EvidenceLedger& ledger,
                              std::size_t max_chars = kObserverContextChars);

// ---------------------------------------------------------------------------
// Reflector
// ---------------------------------------------------------------------------

/// A numeric confidence wins when present; otherwise sufficient maps to 1/0.
/// `sufficient` is then recomputed against the threshold.
Reflection parse_reflection(const json& reply, double threshold);

Reflection reflect(const Query& query, const VideoMeta& meta, const EvidenceLedger& ledger,
                   ModelChannel& channel, const SessionConfig& cfg);

/// Option letter (or the free-text answer for open-ended queries) stated
/// by a justification. Throws ExtractionFailure.
std::string extract_answer(std::string_view justification, std::span<const OptionChoice> options);

struct ForcedAnswer {
    std::string answer;
    std::string justification;
    bool degraded = false;
};

/// Must-answer reflector call. Never throws for unparseable replies: falls
/// back to the first option letter and marks the answer degraded.
ForcedAnswer force_answer(const Query& query, const VideoMeta& meta, const EvidenceLedger& ledger,
                          ModelChannel& channel, const SessionConfig& cfg);

} // namespace vidscout
