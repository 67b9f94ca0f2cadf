// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails or overruns its time limit.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "support.hpp"
#include "vidscout/agents.hpp"
#include "vidscout/errors.hpp"
#include "vidscout/evalkit.hpp"
#include "vidscout/session.hpp"
#include "vidscout/simworld.hpp"
#include "vidscout/time_grammar.hpp"

using namespace vidscout;
using namespace vidscout::testing;

namespace {

// Collects failed expectations for one criterion.
struct Checks {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what)
    {
        if (!ok)
            failures.push_back(what);
    }
};

std::vector<TimeRange> rules(std::string_view q, double d)
{
    return apply_timestamp_rules(parse_time_cues(q), classify_query(q), d);
}

SessionResult run_virtual(const VideoMeta& meta, const Query& q, const SessionConfig& cfg,
                          Backend& backend)
{
    VirtualClock clock;
    SessionOptions options;
    options.clock = &clock;
    return run_session(meta, q, cfg, AgentBackends(backend), options);
}

VideoMeta golden_video()
{
    auto meta = synthetic_video(180, 2, "harbor");
    meta.frame_source = "synthetic:2";
    return meta;
}

// ---------------------------------------------------------------------------

void timestamp_rules(Checks& c)
{
    const double d = 3600;
    const std::vector<std::pair<std::string, TimeRange>> worked = {
        {"What is written on the sign from 07:15-07:18?", {435.0, 438.0}},
        {"Why does the crowd cheer from 07:15-07:18?", {420.0, 453.0}},
        {"What is on the table at 02:15?", {135.0, 136.0}},
        {"Why does she stand up at 02:15?", {120.0, 150.0}},
        {"What color is the car around 1:23?", {68.0, 98.0}},
    };
    for (const auto& [q, expected] : worked)
        c.expect(rules(q, d) == std::vector<TimeRange>{expected}, "worked example: " + q);
    for (double dur : {600.0, 45.0, 20.0, 3600.0}) {
        c.expect(rules("What is shown in the opening?", dur)
                     == std::vector<TimeRange>{{0.0, std::min(30.0, dur)}},
                 "opening rule, d=" + std::to_string(dur));
        c.expect(rules("Who speaks at the end?", dur)
                     == std::vector<TimeRange>{{std::max(0.0, dur - 30.0), dur}},
                 "end rule, d=" + std::to_string(dur));
    }
}

void cost_model(Checks& c)
{
    c.expect(tokens_per_frame(SpatialRes::low) == 66, "low tier costs 66");
    c.expect(tokens_per_frame(SpatialRes::medium) == 258, "medium tier costs 258");

    const auto cfg = default_config();
    std::mt19937_64 rng(1);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    for (int trial = 0; trial < 1000; ++trial) {
        Plan plan;
        VideoMeta meta;
        meta.duration_sec = uni(10, 7200);
        plan.fps = uni(0.25, 2.0);
        plan.res = uni(0, 1) < 0.5 ? SpatialRes::low : SpatialRes::medium;
        if (uni(0, 1) < 0.5) {
            plan.where = WhereMode::region;
            for (int k = int(uni(1, 5)); k > 0; --k) {
                const double s = uni(0, meta.duration_sec - 1);
                plan.regions.push_back({s, std::min(meta.duration_sec, s + uni(0.5, 3000))});
            }
        }
        const auto clip = build_clip(plan, meta, cfg);
        const auto cost = std::int64_t(clip.timestamps.size()) * tokens_per_frame(plan.res);
        if (clip.frame_token_cost != cost || cost + cfg.text_reserve_tokens > 128000) {
            c.expect(false, "budget exceeded in trial " + std::to_string(trial));
            break;
        }
    }

    std::vector<double> ts(1200);
    for (std::size_t i = 0; i < ts.size(); ++i)
        ts[i] = double(i) * 0.5;
    const auto kept = enforce_budget(ts, SpatialRes::medium, cfg);
    c.expect(kept.size() == 480, "1200 medium frames downsample to 480");
    bool spaced = kept.size() == 480;
    for (std::size_t j = 0; spaced && j < kept.size(); ++j)
        spaced = kept[j] == ts[j * 1199 / 479];
    c.expect(spaced, "downsampled indices are j*(n-1)/(m-1)");
}

void golden_session(Checks& c)
{
    const auto dir = data_dir() / "harbor";
    const auto golden = read_file(dir / "trace.json");
    std::vector<std::string> traces;
    for (int run = 0; run < 3; ++run) {
        CassetteReplayer replay(dir / "cassette.jsonl", ReplayMode::in_order);
        const auto res = run_virtual(golden_video(), golden_query(), default_config(), replay);
        if (run == 0) {
            c.expect(res.rounds.size() == 2, "two rounds traced");
            if (res.rounds.size() == 2) {
                const auto& p1 = res.rounds[0].plan;
                const auto& p2 = res.rounds[1].plan;
                c.expect(p1.where == WhereMode::uniform && p1.fps == 0.5 && p1.res == SpatialRes::low,
                         "round 1 is a uniform 0.5 fps low scan");
                c.expect(p2.where == WhereMode::region
                             && p2.regions == std::vector<TimeRange>{{60, 70}} && p2.fps == 2.0
                             && p2.res == SpatialRes::medium,
                         "round 2 is region [60,70] at 2 fps medium");
            }
            c.expect(res.rounds_used == 2 && res.halted_by == HaltReason::confidence,
                     "halts at round 2 on confidence");
            c.expect(res.answer == "D", "answer is D");
            c.expect(res.history.size() == 1, "history length 1");
            int observer = 0;
            for (const auto& call : res.calls)
                observer += call.role == AgentRole::observer ? 1 : 0;
            c.expect(observer == 2, "exactly 2 observer calls");
        }
        traces.push_back(trace_json(res).dump(2) + "\n");
    }
    c.expect(traces[0] == traces[1] && traces[1] == traces[2], "3 reruns give byte-identical traces");
    c.expect(traces[0] == golden, "trace matches the recorded golden bytes");
}

void halting(Checks& c)
{
    std::mt19937_64 rng(4);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
    const auto meta = synthetic_video(600, 1);
    const auto query = Query::make("Which light turns on?", {"red", "green", "blue"}, "v");

    auto script = [&](ScriptedBackend& b, int max_rounds, std::function<double()> conf) {
        for (int i = 0; i < 2 * max_rounds + 2; ++i) {
            b.enqueue(AgentRole::planner, planner_text("uniform", uni(0.25, 2.0), "low"));
            b.enqueue(AgentRole::observer, observer_text({{uni(0, 500), uni(500, 600), "light"}}));
            b.enqueue(AgentRole::reflector, reflector_text(conf(), "Answer: (B)"));
        }
    };

    int over = 0, bad_forced = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto cfg = default_config();
        cfg.max_rounds = pick(1, 5);
        cfg.confidence_threshold = uni(0.0, 1.0);
        ScriptedBackend b;
        script(b, cfg.max_rounds, [&] { return uni(0, 1); });
        const auto res = run_virtual(meta, query, cfg, b);
        if (b.calls(AgentRole::observer) > cfg.max_rounds || res.rounds_used > cfg.max_rounds)
            ++over;
        if (res.halted_by == HaltReason::forced && res.rounds_used != cfg.max_rounds)
            ++bad_forced;
    }
    c.expect(over == 0, std::to_string(over) + " sessions exceeded the observer-call bound");
    c.expect(bad_forced == 0, "forced halts happen only at the round limit");

    for (int trial = 0; trial < 50; ++trial) {
        auto cfg = default_config();
        cfg.max_rounds = pick(1, 5);
        cfg.confidence_threshold = 0.0;
        ScriptedBackend b;
        script(b, cfg.max_rounds, [&] { return uni(0, 1); });
        const auto res = run_virtual(meta, query, cfg, b);
        c.expect(res.rounds_used == 1 && res.halted_by == HaltReason::confidence,
                 "threshold 0 halts in round 1");
    }
    for (int trial = 0; trial < 50; ++trial) {
        auto cfg = default_config();
        cfg.max_rounds = pick(1, 5);
        cfg.confidence_threshold = uni(0.3, 1.0);
        ScriptedBackend b;
        const double tau = cfg.confidence_threshold;
        script(b, cfg.max_rounds, [&] { return uni(0, tau * 0.99); });
        const auto res = run_virtual(meta, query, cfg, b);
        c.expect(res.halted_by == HaltReason::forced && res.rounds_used == cfg.max_rounds
                     && !res.answer.empty(),
                 "all-below-threshold sessions are forced at the round limit");
    }
}

void evidence_invariants(Checks& c)
{
    std::mt19937_64 rng(5);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    int bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double d = uni(1, 4000);
        const double s = uni(-50, d + 50), e = uni(-50, d + 50);
        const auto item = round_evidence(s, e, "x", d, 1);
        const auto upper = static_cast<std::int64_t>(std::ceil(d));
        const auto lo = std::clamp<std::int64_t>(std::int64_t(std::floor(std::min(s, e))), 0, upper);
        const auto hi = std::clamp<std::int64_t>(std::int64_t(std::ceil(std::max(s, e))), 0, upper);
        const auto again = round_evidence(double(item.start_sec), double(item.end_sec), "x", d, 1);
        if (item.start_sec != lo || item.end_sec != hi || again != item || item.start_sec > item.end_sec)
            ++bad;
    }
    c.expect(bad == 0, std::to_string(bad) + " rounding cases broke floor/ceil/clamp/idempotence");

    int slice_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        EvidenceLedger ledger;
        std::vector<std::vector<EvidenceItem>> slices;
        const int rounds = int(uni(1, 6));
        for (int r = 1; r <= rounds; ++r) {
            std::vector<EvidenceItem> slice;
            for (int k = int(uni(0, 4)); k > 0; --k) {
                const auto a = std::int64_t(uni(0, 500));
                slice.push_back({a, a + std::int64_t(uni(0, 30)), "e" + std::to_string(k), r});
            }
            const auto before = ledger.items();
            ledger.append(slice);
            if (!std::equal(before.begin(), before.end(), ledger.items().begin()))
                ++slice_bad;
            slices.push_back(slice);
        }
        std::vector<EvidenceItem> concat;
        for (int r = 1; r <= rounds; ++r) {
            if (ledger.slice(r) != slices[std::size_t(r - 1)])
                ++slice_bad;
            concat.insert(concat.end(), slices[std::size_t(r - 1)].begin(), slices[std::size_t(r - 1)].end());
        }
        if (concat != ledger.items())
            ++slice_bad;
    }
    c.expect(slice_bad == 0, "ledger append-only slice law violated");
}

void simworld_trend(Checks& c)
{
    std::vector<std::uint64_t> seeds(200);
    std::iota(seeds.begin(), seeds.end(), 1);
    auto cfg = default_config();
    cfg.max_rounds = 1;
    const auto r1 = run_sim_suite(seeds, {}, cfg);
    cfg.max_rounds = 3;
    const auto r3 = run_sim_suite(seeds, {}, cfg);
    c.expect(r3.solved >= r1.solved, "solved at 3 rounds (" + std::to_string(r3.solved)
                                         + ") < solved at 1 round (" + std::to_string(r1.solved) + ")");
    c.expect(r1.errors == 0 && r3.errors == 0, "suite sessions errored");
    int missed = 0;
    for (const auto& rec : r3.records)
        if (rec.solvable && rec.hinted_target && !(rec.correct && rec.rounds_used <= 2))
            ++missed;
    c.expect(missed == 0, std::to_string(missed) + " hinted worlds not solved within 2 rounds");
    std::cout << "    solved: " << r1.solved << " at 1 round, " << r3.solved << " at 3 rounds of "
              << r3.worlds << " worlds\n";
}

void harness_arithmetic(Checks& c)
{
    const auto dir = std::filesystem::temp_directory_path()
                     / ("vidscout-accept-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(6);
    auto letter = [&] { return char('A' + std::uniform_int_distribution<int>(0, 3)(rng)); };
    std::string text;
    std::vector<char> given;
    ScriptedBackend b1, b8;
    for (int i = 0; i < 50; ++i) {
        const std::string id = "item" + std::to_string(1000 + i);
        text += json{{"id", id},
                     {"frames", "synthetic:1"},
                     {"duration_sec", 240},
                     {"question", "What lights up in " + id + "?"},
                     {"options", {"lamp", "sign", "screen", "candle"}},
                     {"answer", std::string(1, letter())},
                     {"category", i % 3 ? "objects" : "events"}}
                    .dump()
                + "\n";
        given.push_back(letter());
        for (ScriptedBackend* b : {&b1, &b8}) {
            b->add_rule(AgentRole::planner, id, ScriptedReply::of(planner_text("uniform", 0.5, "low")));
            b->add_rule(AgentRole::observer, id, ScriptedReply::of(observer_text({{3, 9, "glow"}})));
            b->add_rule(AgentRole::reflector, id,
                        ScriptedReply::of(reflector_text(0.9, std::string("Answer: (") + given.back() + ")"),
                                          37 * i));
        }
    }
    write_file(dir / "d.jsonl", text);
    const auto data = load_dataset(dir / "d.jsonl");
    BenchOptions one, eight;
    eight.concurrency = 8;
    const auto r1 = run_benchmark(data.items, default_config(), AgentBackends(b1), one);
    const auto r8 = run_benchmark(data.items, default_config(), AgentBackends(b8), eight);

    int correct = 0;
    std::istringstream lines(text);
    std::string line;
    for (int i = 0; std::getline(lines, line); ++i)
        correct += json::parse(line).at("answer").get<std::string>()[0] == given[std::size_t(i)] ? 1 : 0;
    c.expect(r1.total == 50, "50 items scored");
    c.expect(r1.correct == correct && r1.accuracy == correct / 50.0,
             "accuracy " + std::to_string(r1.accuracy) + " differs from recount "
                 + std::to_string(correct / 50.0));
    c.expect(json(r1).dump() == json(r8).dump(), "reports differ between concurrency 1 and 8");
    std::filesystem::remove_all(dir);
}

class FakeServer {
public:
    explicit FakeServer(std::function<void(httplib::Response&)> handler)
    {
        server_.Post("/v1/chat", [this, handler](const httplib::Request&, httplib::Response& res) {
            ++hits;
            handler(res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer()
    {
        server_.stop();
        thread_.join();
    }
    HttpBackendConfig config(double timeout_s) const
    {
        HttpBackendConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat";
        cfg.timeout_s = timeout_s;
        cfg.api_key_env = "";
        return cfg;
    }

    std::atomic<int> hits{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

void gateway_resilience(Checks& c)
{
    using ms = std::chrono::milliseconds;
    BackendRequest req;
    req.role = AgentRole::planner;
    req.system_text = "s";
    req.user_text = "u";

    {
        FakeServer server([](httplib::Response& res) { res.status = 503; });
        std::vector<ms> waits;
        HttpBackend backend(server.config(5), [&](ms d) { waits.push_back(d); });
        bool exhausted = false;
        try {
            backend.send(req);
        } catch (const RetriesExhausted&) {
            exhausted = true;
        }
        c.expect(exhausted, "persistent 503 surfaces as retries exhausted");
        c.expect(server.hits == 4, "one try plus 3 retries");
        c.expect(waits == std::vector<ms>{ms(1000), ms(2000), ms(4000)}, "backoff is 1/2/4 s");
    }
    {
        std::atomic<int> n{0};
        FakeServer server([&](httplib::Response& res) {
            if (n++ == 0)
                res.status = 502;
            else
                res.set_content(R"({"text": "fine"})", "application/json");
        });
        HttpBackend backend(server.config(5), [](ms) {});
        c.expect(backend.send(req).text == "fine", "recovers after a transient 502");
    }
    {
        FakeServer server([](httplib::Response& res) {
            std::this_thread::sleep_for(ms(1000));
            res.set_content(R"({"text": "late"})", "application/json");
        });
        auto cfg = server.config(0.25);
        cfg.max_retries = 0;
        HttpBackend backend(cfg, [](ms) {});
        bool timed_out = false;
        try {
            backend.send(req);
        } catch (const TimeoutError&) {
            timed_out = true;
        }
        c.expect(timed_out, "slow server surfaces a timeout");
    }

    // Record a scripted session, then replay it three times.
    const auto dir = std::filesystem::temp_directory_path()
                     / ("vidscout-accept-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    const auto script = json::parse(read_file(data_dir() / "harbor" / "script.json"));
    auto scripted = ScriptedBackend::from_json(script);
    std::string recorded;
    {
        CassetteRecorder rec(*scripted, dir / "c.jsonl");
        recorded = trace_json(run_virtual(golden_video(), golden_query(), default_config(), rec)).dump();
    }
    for (int run = 0; run < 3; ++run) {
        CassetteReplayer replay(dir / "c.jsonl", ReplayMode::in_order);
        const auto again = trace_json(run_virtual(golden_video(), golden_query(), default_config(), replay)).dump();
        c.expect(again == recorded, "replay " + std::to_string(run) + " matches the recording");
    }
    std::filesystem::remove_all(dir);

    c.expect(extract_json_payload("```json\n{\"a\": 1}\n```").at("a") == 1, "fenced payload");
    c.expect(extract_json_payload("Sure, here it is: {\"a\": {\"b\": \"}\"}} done").at("a").at("b") == "}",
             "prefixed payload");
    for (const char* bad : {"no json at all", "{\"a\": ", "{\"a\": nope}"}) {
        bool thrown = false;
        try {
            extract_json_payload(bad);
        } catch (const MalformedOutput&) {
            thrown = true;
        }
        c.expect(thrown, std::string("malformed payload rejected: ") + bad);
    }
}

struct Criterion {
    int number;
    const char* name;
    double limit_ms;
    std::function<void(Checks&)> run;
};

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {1, "timestamp-rule conformance", 1000, timestamp_rules},
        {2, "cost-model conformance", 5000, cost_model},
        {3, "golden coarse-to-fine session", 2000, golden_session},
        {4, "halting and bounds", 30000, halting},
        {5, "evidence invariants", 5000, evidence_invariants},
        {6, "simulated round-limit trend", 60000, simworld_trend},
        {7, "harness arithmetic", 30000, harness_arithmetic},
        {8, "gateway resilience", 20000, gateway_resilience},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Checks checks;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.run(checks);
        } catch (const std::exception& e) {
            checks.failures.push_back(std::string("exception: ") + e.what());
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (ms > cr.limit_ms)
            checks.failures.push_back("runtime over limit");
        const bool ok = checks.failures.empty();
        failed += ok ? 0 : 1;
        std::printf("%s [%d] %s (%.0f ms, limit %.0f ms)%s%s\n", ok ? "PASS" : "FAIL", cr.number,
                    cr.name, ms, cr.limit_ms, ok ? "" : ": ",
                    ok ? "" : checks.failures.front().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
