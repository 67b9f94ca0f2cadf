// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vidscout/errors.hpp"
#include "vidscout/session.hpp"

using namespace vidscout;
using namespace vidscout::testing;

namespace {

VideoMeta golden_video()
{
    auto meta = synthetic_video(180, 2, "harbor");
    meta.frame_source = "synthetic:2";
    return meta;
}

SessionResult run_scripted(ScriptedBackend& backend, const SessionConfig& cfg,
                           const VideoMeta& meta = synthetic_video(180, 2),
                           const Query& query = golden_query())
{
    VirtualClock clock;
    SessionOptions options;
    options.clock = &clock;
    return run_session(meta, query, cfg, AgentBackends(backend), options);
}

// Enough plain replies for any session of up to `rounds` rounds.
void fill(ScriptedBackend& b, int rounds, double confidence, const std::string& justification)
{
    for (int i = 0; i < 2 * rounds + 2; ++i) {
        b.enqueue(AgentRole::planner, planner_text("uniform", 0.5, "low"));
        b.enqueue(AgentRole::observer, observer_text({{10.2, 14.8, "something seen"}}));
        b.enqueue(AgentRole::reflector, reflector_text(confidence, justification));
    }
}

} // namespace

TEST(GoldenSession, CoarseToFineThenHalt)
{
    const auto cassette = data_dir() / "harbor" / "cassette.jsonl";
    std::vector<std::string> traces;
    for (int run = 0; run < 3; ++run) {
        CassetteReplayer replay(cassette, ReplayMode::in_order);
        VirtualClock clock;
        SessionOptions options;
        options.clock = &clock;
        const auto res =
            run_session(golden_video(), golden_query(), default_config(), AgentBackends(replay), options);

        EXPECT_EQ(res.answer, "D");
        EXPECT_EQ(res.rounds_used, 2);
        EXPECT_EQ(res.halted_by, HaltReason::confidence);
        EXPECT_FALSE(res.degraded);
        EXPECT_EQ(res.history.size(), 1u);
        ASSERT_EQ(res.rounds.size(), 2u);

        const auto& p1 = res.rounds[0].plan;
        EXPECT_EQ(p1.where, WhereMode::uniform);
        EXPECT_DOUBLE_EQ(p1.fps, 0.5);
        EXPECT_EQ(p1.res, SpatialRes::low);
        const auto& p2 = res.rounds[1].plan;
        EXPECT_EQ(p2.where, WhereMode::region);
        EXPECT_EQ(p2.regions, (std::vector<TimeRange>{{60, 70}}));
        EXPECT_DOUBLE_EQ(p2.fps, 2.0);
        EXPECT_EQ(p2.res, SpatialRes::medium);

        EXPECT_EQ(res.rounds[0].clip.frame_count, 90);
        EXPECT_EQ(res.rounds[1].clip.frame_count, 20);
        EXPECT_EQ(res.rounds[1].clip.token_cost, 5160);

        int observer_calls = 0;
        for (const auto& c : res.calls)
            observer_calls += c.role == AgentRole::observer ? 1 : 0;
        EXPECT_EQ(observer_calls, 2);
        EXPECT_EQ(replay.remaining(), 0u);
        traces.push_back(trace_json(res).dump(2) + "\n");
    }
    EXPECT_EQ(traces[0], traces[1]);
    EXPECT_EQ(traces[1], traces[2]);
    EXPECT_EQ(traces[0], read_file(data_dir() / "harbor" / "trace.json"));
}

TEST(GoldenSession, TraceFileMatchesRecordedBytes)
{
    TempDir dir;
    CassetteReplayer replay(data_dir() / "harbor" / "cassette.jsonl", ReplayMode::lookup);
    VirtualClock clock;
    SessionOptions options;
    options.clock = &clock;
    const auto res =
        run_session(golden_video(), golden_query(), default_config(), AgentBackends(replay), options);
    emit_trace(res, dir / "t.json");
    EXPECT_EQ(read_file(dir / "t.json"), read_file(data_dir() / "harbor" / "trace.json"));
}

TEST(Halting, ZeroThresholdStopsInRoundOne)
{
    ScriptedBackend b;
    fill(b, 3, 0.05, "Answer: (B)");
    auto cfg = default_config();
    cfg.confidence_threshold = 0.0;
    const auto res = run_scripted(b, cfg);
    EXPECT_EQ(res.rounds_used, 1);
    EXPECT_EQ(res.halted_by, HaltReason::confidence);
    EXPECT_EQ(res.answer, "B");
    EXPECT_TRUE(res.history.empty());
}

TEST(Halting, ThresholdAboveOneAlwaysForces)
{
    ScriptedBackend b;
    fill(b, 3, 1.0, "Answer: (C)");
    auto cfg = default_config();
    cfg.confidence_threshold = 1.01;
    const auto res = run_scripted(b, cfg);
    EXPECT_EQ(res.rounds_used, 3);
    EXPECT_EQ(res.halted_by, HaltReason::forced);
    EXPECT_EQ(res.history.size(), 2u);
}

TEST(Halting, ConfidentReflectorUsesOneRound)
{
    ScriptedBackend b;
    fill(b, 3, 0.9, "The answer is (A).");
    const auto res = run_scripted(b, default_config());
    EXPECT_EQ(res.rounds_used, 1);
    EXPECT_EQ(res.answer, "A");
    EXPECT_EQ(b.calls(AgentRole::observer), 1);
    EXPECT_EQ(b.calls(AgentRole::planner), 1);
}

TEST(Halting, DoubtfulReflectorForcesAtLimit)
{
    ScriptedBackend b;
    fill(b, 3, 0.2, "Answer: (D) but unsure");
    const auto res = run_scripted(b, default_config());
    EXPECT_EQ(res.rounds_used, 3);
    EXPECT_EQ(res.halted_by, HaltReason::forced);
    EXPECT_EQ(b.calls(AgentRole::observer), 3);
    // Three judgments plus the must-answer call.
    EXPECT_EQ(b.calls(AgentRole::reflector), 4);
    EXPECT_EQ(res.answer, "D");
    EXPECT_FALSE(res.forced_justification.empty());
}

TEST(Fallbacks, PlannerFailureUsesRuleBasedPlan)
{
    ScriptedBackend b;
    b.enqueue(AgentRole::planner, "no plan today");
    b.enqueue(AgentRole::planner, "still none");
    b.enqueue(AgentRole::observer, observer_text({{435.2, 437.6, "the sign says OPEN"}}));
    b.enqueue(AgentRole::reflector, reflector_text(0.95, "Answer: (A)"));
    const auto q = Query::make("What is written on the sign from 07:15-07:18?", {"OPEN", "SHUT"}, "v");
    const auto res = run_scripted(b, default_config(), synthetic_video(3600, 1), q);
    ASSERT_EQ(res.rounds.size(), 1u);
    EXPECT_TRUE(res.rounds[0].plan_fallback);
    EXPECT_EQ(res.rounds[0].plan.regions, (std::vector<TimeRange>{{435, 438}}));
    EXPECT_EQ(res.answer, "A");
    EXPECT_EQ(res.ledger.items().at(0).start_sec, 435);
    EXPECT_EQ(res.ledger.items().at(0).end_sec, 438);
}

TEST(Fallbacks, FailedReplanNarrowsToEvidence)
{
    ScriptedBackend b;
    b.enqueue(AgentRole::planner, planner_text("uniform", 0.5, "low"));
    b.enqueue(AgentRole::planner, "garbage");
    b.enqueue(AgentRole::planner, "garbage again");
    b.enqueue(AgentRole::observer, observer_text({{60.4, 69.2, "tower far away"}}));
    b.enqueue(AgentRole::observer, observer_text({{61, 66, "tower on the headland"}}));
    b.enqueue(AgentRole::reflector, reflector_text(0.3, "unclear"));
    b.enqueue(AgentRole::reflector, reflector_text(0.9, "Answer: (D)"));
    const auto res = run_scripted(b, default_config());
    ASSERT_EQ(res.rounds.size(), 2u);
    EXPECT_TRUE(res.rounds[1].plan_fallback);
    EXPECT_EQ(res.rounds[1].plan.regions, (std::vector<TimeRange>{{45, 85}}));
    EXPECT_EQ(res.answer, "D");
}

TEST(Errors, ExhaustedScriptGivesPartialTrace)
{
    ScriptedBackend b;
    b.enqueue(AgentRole::planner, planner_text("uniform", 0.5, "low"));
    b.enqueue(AgentRole::observer, observer_text({{10, 12, "x"}}));
    b.enqueue(AgentRole::reflector, reflector_text(0.1, "unsure"));
    b.enqueue(AgentRole::planner, planner_text("uniform", 1.0, "medium"));
    try {
        run_scripted(b, default_config());
        FAIL() << "expected SessionError";
    } catch (const SessionError& e) {
        EXPECT_EQ(e.kind(), "backend");
        const auto& partial = e.partial();
        ASSERT_EQ(partial.rounds.size(), 2u);
        EXPECT_TRUE(partial.rounds[0].reflection.has_value());
        EXPECT_FALSE(partial.rounds[1].reflection.has_value());
        EXPECT_EQ(partial.ledger.size(), 1u);
        const auto j = trace_json(e);
        EXPECT_EQ(j.at("status"), "errored");
        EXPECT_EQ(j.at("error").at("kind"), "backend");
        EXPECT_EQ(j.at("rounds").size(), 2u);
    }
}

TEST(Errors, ReplayMissIsReported)
{
    CassetteReplayer replay(data_dir() / "harbor" / "cassette.jsonl", ReplayMode::lookup);
    VirtualClock clock;
    SessionOptions options;
    options.clock = &clock;
    const auto other = Query::make("A question never recorded?", {"x", "y"}, "harbor");
    try {
        run_session(golden_video(), other, default_config(), AgentBackends(replay), options);
        FAIL() << "expected SessionError";
    } catch (const SessionError& e) {
        EXPECT_EQ(e.kind(), "replay_miss");
        EXPECT_EQ(e.partial().rounds.size(), 1u);
        EXPECT_TRUE(e.partial().calls.empty());
    }
}

TEST(Errors, TinyBudgetIsReported)
{
    ScriptedBackend b;
    fill(b, 3, 0.9, "Answer: (A)");
    auto cfg = default_config();
    cfg.token_budget = 4100;
    try {
        run_scripted(b, cfg);
        FAIL() << "expected SessionError";
    } catch (const SessionError& e) {
        EXPECT_EQ(e.kind(), "budget_too_small");
    }
}

TEST(SessionProperty, RandomScriptedSessionsKeepInvariants)
{
    std::mt19937_64 rng(2024);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
    const std::vector<std::string> wheres = {"uniform", "region"};
    const std::vector<std::string> tiers = {"low", "medium", "high"};

    for (int trial = 0; trial < 1000; ++trial) {
        auto cfg = default_config();
        cfg.max_rounds = pick(1, 5);
        cfg.confidence_threshold = uni(0.0, 1.0);
        const double duration = uni(30, 3600);
        const auto meta = synthetic_video(duration, 1);
        const int n_opts = pick(2, 5);
        std::vector<std::string> opts;
        for (int k = 0; k < n_opts; ++k)
            opts.push_back("choice " + std::to_string(k));
        const auto query = Query::make("Which choice is shown?", opts, "v");

        ScriptedBackend b;
        for (int i = 0; i < 2 * cfg.max_rounds + 2; ++i) {
            if (pick(0, 9) == 0)
                b.enqueue(AgentRole::planner, "malformed");
            else {
                const double s = uni(-20, duration);
                b.enqueue(AgentRole::planner,
                          planner_text(wheres[pick(0, 1)], uni(0.01, 5.0), tiers[pick(0, 2)],
                                       {{s, s + uni(-5, 300)}}));
            }
            std::vector<RawEvidence> ev;
            for (int k = pick(0, 3); k > 0; --k) {
                const double s = uni(-10, duration + 10);
                ev.push_back({s, s + uni(0, 40), "seen " + std::to_string(k)});
            }
            b.enqueue(AgentRole::observer, pick(0, 9) == 0 ? std::string("{") : observer_text(ev));
            const char letter = static_cast<char>('A' + pick(0, n_opts - 1));
            b.enqueue(AgentRole::reflector,
                      ScriptedReply::of(reflector_text(uni(0, 1), std::string("Answer: (") + letter + ")"),
                                        pick(0, 3000)));
        }

        const auto res = run_scripted(b, cfg, meta, query);
        const int R = res.rounds_used;
        ASSERT_GE(R, 1);
        ASSERT_LE(R, cfg.max_rounds);
        ASSERT_LE(b.calls(AgentRole::observer), 2 * cfg.max_rounds);
        int observer_logical = 0;
        for (const auto& c : res.calls)
            observer_logical += (c.role == AgentRole::observer && c.attempt == 0) ? 1 : 0;
        ASSERT_EQ(observer_logical, R);
        ASSERT_LE(observer_logical, cfg.max_rounds);

        // Halting law.
        ASSERT_EQ(static_cast<int>(res.rounds.size()), R);
        const double last = res.rounds.back().reflection->confidence;
        if (res.halted_by == HaltReason::confidence)
            ASSERT_GE(last, cfg.confidence_threshold);
        else {
            ASSERT_EQ(R, cfg.max_rounds);
            ASSERT_LT(last, cfg.confidence_threshold);
        }
        for (int r = 0; r + 1 < R; ++r)
            ASSERT_LT(res.rounds[r].reflection->confidence, cfg.confidence_threshold);
        ASSERT_EQ(res.answer.size(), 1u);
        ASSERT_GE(res.answer[0], 'A');
        ASSERT_LT(res.answer[0], 'A' + n_opts);

        // History and ledger slice laws.
        ASSERT_EQ(static_cast<int>(res.history.size()), R - 1);
        for (int r = 1; r <= R; ++r) {
            const auto slice = res.ledger.slice(r);
            auto observed = res.rounds[r - 1].observation.key_evidence;
            for (auto& e : observed)
                e.round = r;
            ASSERT_EQ(slice, observed);
            if (r < R)
                ASSERT_EQ(res.history[r - 1].evidence, slice);
            for (const auto& e : slice) {
                ASSERT_EQ(e.round, r);
                ASSERT_LE(0, e.start_sec);
                ASSERT_LE(e.start_sec, e.end_sec);
                ASSERT_LE(double(e.end_sec), std::ceil(duration));
            }
        }

        // Accounting: totals are the sums of the booked calls.
        std::int64_t tokens = 0, frames = 0;
        for (const auto& c : res.calls) {
            tokens += c.input_tokens;
            frames += c.frame_count;
        }
        const auto total = res.accounting.total();
        ASSERT_EQ(total.input_tokens, tokens);
        ASSERT_EQ(total.frame_count, frames);
        ASSERT_EQ(total.backend_calls, static_cast<int>(res.calls.size()));
        std::int64_t wall = 0;
        for (const auto& rt : res.rounds)
            wall += rt.wall_time_ms;
        ASSERT_EQ(total.wall_time_ms, wall);

        // Budget law and plan validity per round.
        for (const auto& rt : res.rounds) {
            ASSERT_EQ(rt.clip.token_cost, rt.clip.frame_count * tokens_per_frame(rt.clip.res));
            ASSERT_LE(rt.clip.token_cost + cfg.text_reserve_tokens, cfg.token_budget);
            ASSERT_GE(rt.plan.fps, cfg.fps_bounds.min);
            ASSERT_LE(rt.plan.fps, cfg.fps_bounds.max);
            ASSERT_EQ(rt.plan.where == WhereMode::region, !rt.plan.regions.empty());
        }
    }
}
