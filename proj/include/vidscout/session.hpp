// SPDX-License-Identifier: Apache-2.0

// Bounded plan / observe / reflect loop.
//
//   plan_init
//   for r in 1..max_rounds:
//       observe -> append slice to ledger -> reflect on the whole ledger
//       confidence >= threshold: extract the answer, stop (halted_by=confidence)
//       r == max_rounds:         forced answer, stop (halted_by=forced)
//       history += (plan, slice, justification); plan_replan
//
// The returned history omits the halting round; the per-round trace keeps
// every round.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidscout/agents.hpp"
#include "vidscout/core.hpp"
#include "vidscout/errors.hpp"
#include "vidscout/gateway.hpp"

namespace vidscout {

struct ClipSummary {
    std::int64_t frame_count = 0;
    SpatialRes res = SpatialRes::low;
    std::int64_t token_cost = 0;
    std::vector<TimeRange> regions;
};

struct RoundTrace {
    int round = 0;
    Plan plan;
    bool plan_fallback = false; // planner failed; plan came from the rule-based fallback
    ClipSummary clip;
    ObservationResult observation;
    std::optional<Reflection> reflection;
    std::int64_t wall_time_ms = 0;
};

void to_json(json& j, const RoundTrace& v);

enum class SessionStatus { answered, degraded, errored };

std::string_view to_string(SessionStatus status) noexcept;

struct SessionResult {
    std::string answer;
    std::string justification;
    EvidenceLedger ledger;
    std::vector<HistoryEntry> history;
    Accounting accounting;
    int rounds_used = 0;
    HaltReason halted_by = HaltReason::confidence;
    bool degraded = false;
    std::string forced_justification; // set when the forced-answer call ran

    Query query;
    VideoMeta video;
    SessionConfig config;
    std::vector<RoundTrace> rounds;
    std::vector<CallRecord> calls;

    SessionStatus status() const noexcept
    {
        return degraded ? SessionStatus::degraded : SessionStatus::answered;
    }
};

/// Unrecoverable failure; carries everything recorded up to the failure.
class SessionError : public Error {
public:
    SessionError(std::string kind, const std::string& message, SessionResult partial)
        : Error(message), kind_(std::move(kind)), partial_(std::move(partial))
    {}

    const std::string& kind() const noexcept { return kind_; }
    const SessionResult& partial() const noexcept { return partial_; }

private:
    std::string kind_;
    SessionResult partial_;
};

struct SessionOptions {
    Clock* clock = nullptr; // defaults to a steady clock
    TokenEstimator estimator;
};

SessionResult run_session(const VideoMeta& meta, const Query& query, const SessionConfig& cfg,
                          const AgentBackends& backends, SessionOptions options = {});

json trace_json(const SessionResult& result);
json trace_json(const SessionError& error);

/// Writes the canonical trace (pretty JSON, trailing newline).
void emit_trace(const SessionResult& result, const std::filesystem::path& path);
void emit_trace(const SessionError& error, const std::filesystem::path& path);

} // namespace vidscout
