// SPDX-License-Identifier: Apache-2.0

#include "vidscout/session.hpp"

#include <fstream>

namespace vidscout {

std::string_view to_string(SessionStatus status) noexcept
{
    switch (status) {
    case SessionStatus::answered: return "answered";
    case SessionStatus::degraded: return "degraded";
    case SessionStatus::errored: break;
    }
    return "errored";
}

void to_json(json& j, const RoundTrace& v)
{
    j = json{{"round", v.round},
             {"plan", v.plan},
             {"plan_fallback", v.plan_fallback},
             {"clip",
              {{"frame_count", v.clip.frame_count},
               {"res", v.clip.res},
               {"token_cost", v.clip.token_cost},
               {"regions", v.clip.regions}}},
             {"observation", v.observation},
             {"reflection", v.reflection ? json(*v.reflection) : json()},
             {"wall_time_ms", v.wall_time_ms}};
}

namespace {

// Runs the loop, recording into `res` as it goes so that a failure can
// hand back everything gathered so far.
// `trace` is the round in progress; `open` says whether it is unfinished.
void run_loop(SessionResult& res, ModelChannel& channel, RoundTrace& trace, bool& open)
{
    const auto& query = res.query;
    const auto& meta = res.video;
    const auto& cfg = res.config;
    Clock& clock = channel.clock();

    auto round_started = clock.now_ms();
    auto close_round = [&](RoundTrace& trace) {
        const auto now = clock.now_ms();
        trace.wall_time_ms = now - round_started;
        res.accounting.at_round(trace.round).wall_time_ms += trace.wall_time_ms;
        round_started = now;
        res.rounds.push_back(std::move(trace));
        open = false;
    };

    channel.set_round(1);
    trace = RoundTrace{};
    trace.round = 1;
    open = true;
    try {
        trace.plan = plan_init(query, meta, channel, cfg);
    } catch (const PlannerFailure&) {
        trace.plan = rule_based_plan(query, meta, cfg);
        trace.plan_fallback = true;
    }

    for (int r = 1; r <= cfg.max_rounds; ++r) {
        trace.round = r;
        trace.plan.round = r;
        res.accounting.at_round(r);

        SampledClip clip;
        trace.observation = observe(query, trace.plan, meta, res.ledger, channel, cfg, &clip);
        trace.clip = {static_cast<std::int64_t>(clip.timestamps.size()), clip.res,
                      clip.frame_token_cost, clip.regions_covered};

        auto slice = trace.observation.key_evidence;
        for (auto& item : slice)
            item.round = r;
        res.ledger.append(slice);

        const Reflection reflection = reflect(query, meta, res.ledger, channel, cfg);
        trace.reflection = reflection;
        res.rounds_used = r;
        res.justification = reflection.justification;

        if (reflection.sufficient) {
            res.halted_by = HaltReason::confidence;
            try {
                res.answer = extract_answer(reflection.justification, query.options);
            } catch (const ExtractionFailure&) {
                const auto forced = force_answer(query, meta, res.ledger, channel, cfg);
                res.answer = forced.answer;
                res.degraded = forced.degraded;
                res.forced_justification = forced.justification;
            }
            close_round(trace);
            return;
        }
        if (r == cfg.max_rounds) {
            res.halted_by = HaltReason::forced;
            const auto forced = force_answer(query, meta, res.ledger, channel, cfg);
            res.answer = forced.answer;
            res.degraded = forced.degraded;
            res.forced_justification = forced.justification;
            close_round(trace);
            return;
        }

        res.history.push_back({trace.plan, slice, reflection.justification});
        close_round(trace);

        channel.set_round(r + 1);
        trace = RoundTrace{};
        trace.round = r + 1;
        open = true;
        try {
            trace.plan = plan_replan(query, meta, res.history, reflection.justification, channel,
                                     cfg);
        } catch (const PlannerFailure&) {
            trace.plan = fallback_replan(res.history, meta, cfg);
            trace.plan_fallback = true;
        }
    }
}

} // namespace

SessionResult run_session(const VideoMeta& meta, const Query& query, const SessionConfig& cfg,
                          const AgentBackends& backends, SessionOptions options)
{
    validate(query);
    validate(meta);
    // Structural checks only: thresholds outside [0, 1] are allowed here and
    // simply make halting impossible (or immediate).
    if (cfg.max_rounds < 1)
        throw ConfigError("max_rounds must be at least 1");
    if (cfg.text_reserve_tokens >= cfg.token_budget)
        throw ConfigError("text_reserve_tokens must be smaller than token_budget");

    SteadyClock steady;
    Clock& clock = options.clock ? *options.clock : steady;

    SessionResult res;
    res.query = query;
    res.video = meta;
    res.config = cfg;
    ModelChannel channel(backends, clock, res.accounting, options.estimator);

    RoundTrace current;
    bool open = false;
    auto fail = [&](std::string kind, const std::exception& e) {
        if (open)
            res.rounds.push_back(current);
        res.calls = channel.calls();
        return SessionError(std::move(kind), e.what(), res);
    };
    try {
        run_loop(res, channel, current, open);
    } catch (const ReplayMiss& e) {
        throw fail("replay_miss", e);
    } catch (const TimeoutError& e) {
        throw fail("timeout", e);
    } catch (const RetriesExhausted& e) {
        throw fail("retries_exhausted", e);
    } catch (const BackendError& e) {
        throw fail("backend", e);
    } catch (const BudgetTooSmall& e) {
        throw fail("budget_too_small", e);
    } catch (const ValidationError& e) {
        throw fail("validation", e);
    }
    res.calls = channel.calls();
    return res;
}

// ---------------------------------------------------------------------------

namespace {

json result_envelope(const SessionResult& r)
{
    return {{"query", r.query},
            {"video", r.video},
            {"config", r.config},
            {"answer", r.answer},
            {"justification", r.justification},
            {"forced_justification", r.forced_justification},
            {"rounds_used", r.rounds_used},
            {"halted_by", r.halted_by},
            {"degraded", r.degraded},
            {"ledger", r.ledger},
            {"history", r.history},
            {"accounting", r.accounting},
            {"rounds", r.rounds},
            {"calls", r.calls}};
}

void write_json(const json& j, const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    out.flush();
    if (!out)
        throw Error("cannot write trace file: " + path.string());
}

} // namespace

json trace_json(const SessionResult& result)
{
    json j = result_envelope(result);
    j["trace_version"] = 1;
    j["status"] = std::string(to_string(result.status()));
    j["error"] = nullptr;
    return j;
}

json trace_json(const SessionError& error)
{
    json j = result_envelope(error.partial());
    j["trace_version"] = 1;
    j["status"] = std::string(to_string(SessionStatus::errored));
    j["error"] = {{"kind", error.kind()}, {"message", error.what()}};
    return j;
}

void emit_trace(const SessionResult& result, const std::filesystem::path& path)
{
    write_json(trace_json(result), path);
}

void emit_trace(const SessionError& error, const std::filesystem::path& path)
{
    write_json(trace_json(error), path);
}

} // namespace vidscout
