// SPDX-License-Identifier: Apache-2.0

#include "vidscout/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "vidscout/errors.hpp"
#include "vidscout/evalkit.hpp"
#include "vidscout/gateway.hpp"
#include "vidscout/media.hpp"
#include "vidscout/session.hpp"
#include "vidscout/simworld.hpp"

namespace vidscout {

namespace {

struct CommonFlags {
    std::string config_path;
    std::string backend;
    std::string script;
    std::string cassette;
    std::string record;
    std::optional<int> max_rounds;
    std::optional<double> confidence_threshold;
    std::optional<std::int64_t> token_budget;
    std::string trace_out;
    int concurrency = 1;
    std::string seed;
};

void add_session_flags(CLI::App* app, CommonFlags& f)
{
    app->add_option("--config", f.config_path, "JSON config: session settings plus a backend block")
        ->check(CLI::ExistingFile);
    app->add_option("--max-rounds", f.max_rounds, "Round limit");
    app->add_option("--confidence-threshold", f.confidence_threshold, "Halting threshold");
    app->add_option("--token-budget", f.token_budget, "Per-request context budget in tokens");
    app->add_option("--concurrency", f.concurrency, "Parallel sessions")->check(CLI::PositiveNumber);
}

void add_backend_flags(CLI::App* app, CommonFlags& f, bool with_sim)
{
    std::vector<std::string> kinds = {"http", "scripted", "replay"};
    if (with_sim)
        kinds.emplace_back("sim");
    app->add_option("--backend", f.backend, "Model backend")->check(CLI::IsMember(kinds));
    app->add_option("--script", f.script, "Scripted backend replies (JSON)");
    app->add_option("--cassette", f.cassette, "Cassette to replay");
    app->add_option("--record", f.record, "Record every exchange to this cassette");
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
}

json load_config_json(const CommonFlags& f)
{
    return f.config_path.empty() ? json::object() : read_json_file(f.config_path);
}

SessionConfig session_config(const json& file, const CommonFlags& f, SessionConfig base)
{
    if (!file.empty()) {
        try {
            base = file.get<SessionConfig>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad config: ") + e.what());
        }
    }
    if (f.max_rounds)
        base.max_rounds = *f.max_rounds;
    if (f.confidence_threshold)
        base.confidence_threshold = *f.confidence_threshold;
    if (f.token_budget)
        base.token_budget = *f.token_budget;
    return validate_config(base);
}

json backend_block(const json& file)
{
    if (file.contains("backend") && file.at("backend").is_object())
        return file.at("backend");
    return json::object();
}

// Owns whatever backends a command needs and exposes the one to call.
struct BackendStack {
    std::unique_ptr<Backend> base;
    std::unique_ptr<CassetteRecorder> recorder;
    bool deterministic = true;

    Backend& active() { return recorder ? static_cast<Backend&>(*recorder) : *base; }
};

BackendStack make_backends(const CommonFlags& f, const json& file, const SessionConfig& cfg,
                           const SimWorld* world, ReplayMode replay_mode = ReplayMode::lookup)
{
    const json block = backend_block(file);
    std::string kind = f.backend;
    if (kind.empty())
        kind = block.value("kind", std::string("http"));

    BackendStack stack;
    if (kind == "http") {
        HttpBackendConfig http = block.get<HttpBackendConfig>();
        if (!block.contains("timeout_s"))
            http.timeout_s = cfg.backend.timeout_s;
        if (!block.contains("max_retries"))
            http.max_retries = cfg.backend.max_retries;
        if (!block.contains("backoff_initial_s"))
            http.backoff_initial_s = cfg.backend.backoff_initial_s;
        stack.base = std::make_unique<HttpBackend>(http);
        stack.deterministic = false;
    } else if (kind == "scripted") {
        const std::string script = f.script.empty() ? block.value("script", std::string{}) : f.script;
        if (script.empty())
            throw ConfigError("--backend scripted needs --script");
        stack.base = ScriptedBackend::from_file(script);
    } else if (kind == "replay") {
        const std::string cassette =
            f.cassette.empty() ? block.value("cassette", std::string{}) : f.cassette;
        if (cassette.empty())
            throw ConfigError("--backend replay needs --cassette");
        stack.base = std::make_unique<CassetteReplayer>(cassette, replay_mode);
    } else if (kind == "sim") {
        if (!world)
            throw ConfigError("--backend sim needs --scenario or --seed");
        stack.base = std::make_unique<SimBackend>(*world);
    } else {
        throw ConfigError("unknown backend kind: " + kind);
    }
    if (!f.record.empty()) {
        std::ofstream(f.record, std::ios::trunc);
        stack.recorder = std::make_unique<CassetteRecorder>(*stack.base, f.record);
    }
    return stack;
}

int finish_session(const VideoMeta& meta, const Query& query, const SessionConfig& cfg,
                   BackendStack& stack, const std::string& trace_out, std::ostream& out,
                   std::ostream& err)
{
    VirtualClock virtual_clock;
    SessionOptions options;
    if (stack.deterministic)
        options.clock = &virtual_clock;
    try {
        const auto result = run_session(meta, query, cfg, AgentBackends(stack.active()), options);
        if (!trace_out.empty())
            emit_trace(result, trace_out);
        out << result.answer << '\n';
        err << "rounds " << result.rounds_used << ", halted by " << to_string(result.halted_by)
            << (result.degraded ? ", degraded" : "") << '\n';
        return result.degraded ? kExitDegraded : kExitAnswered;
    } catch (const SessionError& e) {
        if (!trace_out.empty())
            emit_trace(e, trace_out);
        err << "error (" << e.kind() << "): " << e.what() << '\n';
        return kExitErrored;
    }
}

std::optional<SimWorld> world_from_flags(const std::string& scenario, const std::string& seed)
{
    if (!scenario.empty())
        return load_world(scenario);
    if (!seed.empty()) {
        const auto seeds = parse_seed_spec(seed);
        if (seeds.size() != 1)
            throw ConfigError("ask takes a single --seed");
        return generate_world(seeds.front());
    }
    return std::nullopt;
}

json without(json j, std::string_view key)
{
    j.erase(std::string(key));
    return j;
}

} // namespace

std::vector<std::uint64_t> parse_seed_spec(std::string_view spec)
{
    auto number = [&](std::string_view s) {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
            throw ValidationError("bad seed '" + std::string(s) + "'");
        return v;
    };
    std::vector<std::uint64_t> seeds;
    while (!spec.empty()) {
        const auto comma = spec.find(',');
        const auto part = spec.substr(0, comma);
        spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
        const auto dots = part.find("..");
        if (dots == std::string_view::npos) {
            seeds.push_back(number(part));
            continue;
        }
        const auto lo = number(part.substr(0, dots));
        const auto hi = number(part.substr(dots + 2));
        if (hi < lo)
            throw ValidationError("seed range runs backwards: " + std::string(part));
        if (hi - lo >= 1'000'000)
            throw ValidationError("seed range too large: " + std::string(part));
        for (auto s = lo; s <= hi; ++s)
            seeds.push_back(s);
    }
    if (seeds.empty())
        throw ValidationError("empty seed list");
    return seeds;
}

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Answers questions about long videos with a plan, observe, reflect loop.",
                 "vidscout"};
    app.require_subcommand(1);
    CommonFlags f;

    // ask
    auto* ask = app.add_subcommand("ask", "Answer one question about one video");
    add_session_flags(ask, f);
    add_backend_flags(ask, f, true);
    std::string frames, question, video_id = "video", scenario;
    std::vector<std::string> options;
    std::optional<double> duration;
    ask->add_option("--frames", frames, "Frame manifest (file or directory) or synthetic:<fps>");
    ask->add_option("--question", question, "Question text");
    ask->add_option("--option", options, "Answer option, repeat in order (A, B, ...)");
    ask->add_option("--duration", duration, "Video duration in seconds");
    ask->add_option("--video-id", video_id, "Video identifier");
    ask->add_option("--scenario", scenario, "Simulated world file (with --backend sim)");
    ask->add_option("--seed", f.seed, "Generate a simulated world from this seed");
    ask->add_option("--trace-out", f.trace_out, "Write the session trace here");

    // bench
    auto* bench = app.add_subcommand("bench", "Run a JSONL dataset and report accuracy");
    add_session_flags(bench, f);
    add_backend_flags(bench, f, false);
    std::string dataset, report_out;
    bench->add_option("--dataset", dataset, "Dataset file (JSONL)")->required();
    bench->add_option("--report-out", report_out, "Write the full report here");
    bench->add_option("--trace-out", f.trace_out, "Directory for per-item traces");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run the engine over seeded synthetic worlds");
    add_session_flags(simulate, f);
    std::string sim_seeds = "1..200";
    int event_count = WorldParams{}.event_count;
    simulate->add_option("--seed", sim_seeds, "Seeds: N, A..B or a comma list")->capture_default_str();
    simulate->add_option("--event-count", event_count, "Events per world")
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("--report-out", report_out, "Write the full suite report here");

    // replay
    auto* replay = app.add_subcommand("replay", "Re-run a traced session from a cassette");
    add_session_flags(replay, f);
    std::string trace_in, replay_mode = "in_order";
    replay->add_option("--trace-in", trace_in, "Trace of the recorded session")
        ->required()
        ->check(CLI::ExistingFile);
    replay->add_option("--cassette", f.cassette, "Recorded cassette")->required();
    replay->add_option("--mode", replay_mode, "Record matching")
        ->check(CLI::IsMember({"in_order", "lookup"}));
    replay->add_option("--trace-out", f.trace_out, "Write the replayed trace here");

    // frames
    auto* frames_cmd = app.add_subcommand("frames", "Write placeholder frames and a manifest");
    std::string frames_out;
    double frames_duration = 0.0, frames_fps = 1.0;
    frames_cmd->add_option("--out", frames_out, "Output directory")->required();
    frames_cmd->add_option("--duration", frames_duration, "Duration in seconds")->required();
    frames_cmd->add_option("--fps", frames_fps, "Frames per second")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        const json file = load_config_json(f);
        const SessionConfig cfg = session_config(file, f, default_config());

        if (*ask) {
            const auto world = world_from_flags(scenario, f.seed);
            VideoMeta meta;
            Query query;
            if (world) {
                meta = sim_video(*world);
                query = sim_query(*world);
            } else {
                if (question.empty() || frames.empty()) {
                    err << "ask needs --question and --frames (or --scenario / --seed)\n"
                        << ask->help();
                    return kExitUsage;
                }
                meta.video_id = video_id;
                meta.frame_source = frames;
                std::shared_ptr<const FrameManifest> manifest;
                if (frames.starts_with("synthetic:")) {
                    if (!duration) {
                        err << "synthetic frames need --duration\n";
                        return kExitUsage;
                    }
                    manifest = open_frame_source(frames, *duration);
                } else {
                    manifest = open_frame_source(frames, 0.0);
                }
                meta.duration_sec = duration.value_or(manifest->duration_sec);
                meta.frames = std::move(manifest);
                query = Query::make(question, options, video_id);
            }
            CommonFlags af = f;
            if (world && af.backend.empty())
                af.backend = "sim";
            auto stack = make_backends(af, file, cfg, world ? &*world : nullptr);
            return finish_session(meta, query, cfg, stack, f.trace_out, out, err);
        }

        if (*bench) {
            const auto data = load_dataset(dataset);
            for (const auto& r : data.rejects)
                err << dataset << ":" << r.line << ": rejected: " << r.reason << '\n';
            auto stack = make_backends(f, file, cfg, nullptr);
            BenchOptions bo;
            bo.concurrency = f.concurrency;
            bo.virtual_clock = stack.deterministic;
            if (!f.trace_out.empty())
                bo.trace_dir = f.trace_out;
            const auto report = run_benchmark(data.items, cfg, AgentBackends(stack.active()), bo);
            if (!report_out.empty()) {
                std::ofstream o(report_out, std::ios::trunc);
                o << json(report).dump(2) << '\n';
            }
            out << without(json(report), "items").dump(2) << '\n';
            return kExitAnswered;
        }

        if (*simulate) {
            WorldParams params;
            params.event_count = event_count;
            const auto report = run_sim_suite(parse_seed_spec(sim_seeds), params, cfg, f.concurrency);
            if (!report_out.empty()) {
                std::ofstream o(report_out, std::ios::trunc);
                o << json(report).dump(2) << '\n';
            }
            out << without(json(report), "records").dump(2) << '\n';
            return kExitAnswered;
        }

        if (*replay) {
            const json trace = read_json_file(trace_in);
            VideoMeta meta = trace.at("video").get<VideoMeta>();
            meta.frames = open_frame_source(meta.frame_source, meta.duration_sec);
            const Query query = trace.at("query").get<Query>();
            const SessionConfig replay_cfg =
                session_config(file, f, trace.at("config").get<SessionConfig>());
            CommonFlags rf = f;
            rf.backend = "replay";
            auto stack = make_backends(rf, json::object(), replay_cfg, nullptr,
                                       replay_mode == "lookup" ? ReplayMode::lookup
                                                               : ReplayMode::in_order);
            return finish_session(meta, query, replay_cfg, stack, f.trace_out, out, err);
        }

        if (*frames_cmd) {
            const auto m = write_placeholder_frames(frames_out, frames_duration, frames_fps);
            out << m.frames.size() << " frames written to " << frames_out << '\n';
            return kExitAnswered;
        }
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DatasetError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace vidscout
