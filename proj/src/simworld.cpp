// SPDX-License-Identifier: Apache-2.0

#include "vidscout/simworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "vidscout/errors.hpp"
#include "vidscout/media.hpp"
#include "vidscout/parallel.hpp"
#include "vidscout/session.hpp"
#include "vidscout/time_grammar.hpp"

namespace vidscout {

namespace {

constexpr std::string_view kHintPrefix = "possible ";

const std::vector<std::string>& subjects()
{
    static const std::vector<std::string> v = {
        "man in the red jacket", "woman with the umbrella", "white dog",
        "delivery driver",       "cyclist in the helmet",   "child with the kite",
        "street musician",       "security guard",
    };
    return v;
}

const std::vector<std::string>& actions()
{
    static const std::vector<std::string> v = {
        "opens a blue door",    "crosses the street",  "picks up a paper bag",
        "waves at the camera",  "sits on a bench",     "drops a cardboard box",
        "turns left at the corner", "climbs the stairs", "ties a shoelace",
        "checks a phone",       "feeds the pigeons",   "locks a bicycle",
    };
    return v;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

// Label named by an evidence description, and whether it is only a hint.
struct SeenLabel {
    std::string label;
    bool hint = false;
};

std::optional<SeenLabel> seen_label(std::string_view description)
{
    if (description.starts_with(kHintPrefix))
        return SeenLabel{std::string(description.substr(kHintPrefix.size())), true};
    const auto colon = description.find(": ");
    if (colon == std::string_view::npos)
        return std::nullopt;
    return SeenLabel{std::string(description.substr(0, colon)), false};
}

bool any_inside(std::span<const double> timestamps, const TimeRange& r)
{
    return std::any_of(timestamps.begin(), timestamps.end(),
                       [&](double t) { return t >= r.start && t <= r.end; });
}

std::string range_text(std::int64_t s, std::int64_t e)
{
    return "[" + std::to_string(s) + ", " + std::to_string(e) + "]";
}

std::vector<EvidenceItem> evidence_from_inputs(const json& items)
{
    std::vector<EvidenceItem> out;
    if (!items.is_array())
        return out;
    for (const auto& it : items) {
        EvidenceItem e;
        e.start_sec = it.value("start", std::int64_t{0});
        e.end_sec = it.value("end", std::int64_t{0});
        e.description = it.value("description", std::string{});
        e.round = it.value("round", 1);
        out.push_back(std::move(e));
    }
    return out;
}

json plan_reply(const Plan& plan)
{
    json regions = json::array();
    for (const auto& r : plan.regions)
        regions.push_back({r.start, r.end});
    return {{"reasoning", plan.where == WhereMode::uniform ? "scan the whole video"
                                                           : "revisit the hinted spans densely"},
            {"plans",
             {{"what", plan.what},
              {"where", std::string(to_string(plan.where))},
              {"fps", plan.fps},
              {"spatial_token_rate", std::string(to_string(plan.res))},
              {"regions", regions}}}};
}

} // namespace

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

const SimEvent* SimWorld::target() const
{
    if (target_label.empty())
        return nullptr;
    for (const auto& e : events)
        if (e.label == target_label)
            return &e;
    return nullptr;
}

char SimWorld::answer_letter() const
{
    if (target_label.empty())
        return 0;
    const auto it = option_map.find(target_label);
    return it == option_map.end() ? 0 : it->second;
}

void validate(const SimWorld& world)
{
    if (!(world.duration_sec > 0.0))
        throw ValidationError("world duration must be positive");
    std::set<std::string> labels;
    for (const auto& e : world.events) {
        if (!(e.interval.start >= 0.0 && e.interval.start < e.interval.end
              && e.interval.end <= world.duration_sec))
            throw ValidationError("event '" + e.label + "' has an interval outside the world");
        if (e.label.empty() || e.label.find(':') != std::string::npos)
            throw ValidationError("event labels must be non-empty and free of ':'");
        if (!labels.insert(e.label).second)
            throw ValidationError("duplicate event label '" + e.label + "'");
        if (!(e.min_fps > 0.0))
            throw ValidationError("event '" + e.label + "' needs a positive min_fps");
    }
    if (!world.target_label.empty()) {
        if (!labels.contains(world.target_label))
            throw ValidationError("target label names no event");
        if (!world.option_map.contains(world.target_label))
            throw ValidationError("target label has no option letter");
    }
    std::set<char> letters;
    for (const auto& [label, letter] : world.option_map)
        if (!letters.insert(letter).second)
            throw ValidationError("option letters must be unique");
    for (std::size_t i = 0; i < letters.size(); ++i)
        if (!letters.contains(static_cast<char>('A' + i)))
            throw ValidationError("option letters must be contiguous from A");
}

void to_json(json& j, const SimEvent& v)
{
    j = json{{"interval", v.interval},   {"label", v.label},
             {"description", v.description}, {"min_fps", v.min_fps},
             {"min_res", v.min_res},     {"coarse_hint", v.coarse_hint}};
}

void from_json(const json& j, SimEvent& v)
{
    v.interval = j.at("interval").get<TimeRange>();
    v.label = j.at("label").get<std::string>();
    v.description = j.value("description", std::string{});
    v.min_fps = j.value("min_fps", 0.5);
    v.min_res = j.contains("min_res") ? j.at("min_res").get<SpatialRes>() : SpatialRes::low;
    v.coarse_hint = j.value("coarse_hint", false);
}

void to_json(json& j, const SimWorld& v)
{
    json options = json::object();
    for (const auto& [label, letter] : v.option_map)
        options[label] = std::string(1, letter);
    j = json{{"duration_sec", v.duration_sec}, {"events", v.events},
             {"target_label", v.target_label}, {"option_map", options},
             {"question", v.question},         {"seed", v.seed}};
}

void from_json(const json& j, SimWorld& v)
{
    v.duration_sec = j.at("duration_sec").get<double>();
    v.events = j.at("events").get<std::vector<SimEvent>>();
    v.target_label = j.value("target_label", std::string{});
    v.option_map.clear();
    for (const auto& [label, letter] : j.at("option_map").items()) {
        const auto s = letter.get<std::string>();
        if (s.size() != 1)
            throw ValidationError("option letter must be a single character");
        v.option_map[label] = s[0];
    }
    v.question = j.value("question", std::string{});
    v.seed = j.value("seed", std::uint64_t{0});
}

SimWorld load_world(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read scenario file: " + path.string());
    SimWorld world;
    try {
        world = json::parse(in).get<SimWorld>();
    } catch (const json::exception& e) {
        throw ValidationError("bad scenario file " + path.string() + ": " + e.what());
    }
    validate(world);
    return world;
}

void save_world(const SimWorld& world, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    out << json(world).dump(2) << '\n';
    if (!out)
        throw Error("cannot write scenario file: " + path.string());
}

SimWorld generate_world(std::uint64_t seed, const WorldParams& params)
{
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    auto chance = [&](double p) { return uniform(0.0, 1.0) < p; };
    auto pick = [&](std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    };

    SimWorld w;
    w.seed = seed;
    w.duration_sec = std::round(uniform(params.min_duration_sec, params.max_duration_sec));
    const std::string& subject = subjects()[pick(subjects().size())];
    w.question = "What does the " + subject + " do in the video?";

    std::vector<std::string> pool = actions();
    std::shuffle(pool.begin(), pool.end(), rng);
    auto action_label = [&](std::size_t i) {
        if (i < pool.size())
            return pool[i];
        return pool[i % pool.size()] + " again (" + std::to_string(i / pool.size() + 1) + ")";
    };

    const std::array<double, 3> fps_levels = {0.5, 1.0, 2.0};
    for (int i = 0; i < params.event_count; ++i) {
        SimEvent e;
        e.label = action_label(static_cast<std::size_t>(i));
        e.description = "the " + subject + " " + e.label;
        const bool is_target = i == 0;
        if (is_target && chance(params.short_target_probability)) {
            // Sits strictly between two points of a 0.5 fps grid.
            const double len = round_to(uniform(0.5, 1.5), 0.01);
            const auto slots = static_cast<std::size_t>(std::max(1.0, (w.duration_sec - 2.0) / 2.0));
            const double start = 2.0 * static_cast<double>(pick(slots)) + 0.25;
            e.interval = {start, start + len};
            e.min_fps = 2.0;
            e.min_res = SpatialRes::medium;
            e.coarse_hint = false;
        } else {
            const double len = round_to(uniform(params.min_event_sec, params.max_event_sec), 0.1);
            const double start = round_to(uniform(0.0, w.duration_sec - len), 0.1);
            e.interval = {start, std::min(start + len, w.duration_sec)};
            e.min_fps = fps_levels[pick(fps_levels.size())];
            e.min_res = chance(0.5) ? SpatialRes::medium : SpatialRes::low;
            e.coarse_hint = chance(params.hint_probability);
        }
        w.events.push_back(std::move(e));
    }
    if (!w.events.empty())
        w.target_label = w.events.front().label;

    // Options: the target and up to three distractors, padded with actions
    // that never happen, in shuffled letter order.
    std::vector<std::string> choices;
    for (std::size_t i = 0; i < w.events.size() && choices.size() < 4; ++i)
        choices.push_back(w.events[i].label);
    for (std::size_t i = w.events.size(); choices.size() < 4; ++i)
        choices.push_back(action_label(i));
    std::shuffle(choices.begin(), choices.end(), rng);
    for (std::size_t i = 0; i < choices.size(); ++i)
        w.option_map[choices[i]] = static_cast<char>('A' + i);

    std::stable_sort(w.events.begin(), w.events.end(), [](const SimEvent& a, const SimEvent& b) {
        return a.interval.start < b.interval.start;
    });
    validate(w);
    return w;
}

// ---------------------------------------------------------------------------
// Simulated agents
// ---------------------------------------------------------------------------

ObservationResult sim_observe(const SimWorld& world, const Plan& plan,
                              std::span<const double> timestamps)
{
    ObservationResult out;
    for (const auto& e : world.events) {
        if (!any_inside(timestamps, e.interval))
            continue;
        if (plan.fps >= e.min_fps && rank(plan.res) >= rank(e.min_res)) {
            out.key_evidence.push_back(round_evidence(e.interval.start, e.interval.end,
                                                      e.label + ": " + e.description,
                                                      world.duration_sec, plan.round));
        } else if (e.coarse_hint) {
            out.key_evidence.push_back(round_evidence(
                e.interval.start - kSimHintPadSec, e.interval.end + kSimHintPadSec,
                std::string(kHintPrefix) + e.label, world.duration_sec, plan.round));
        }
    }
    if (out.key_evidence.empty()) {
        out.no_relevant = true;
        out.detailed_response = std::string(kNoRelevantSentence);
        out.reasoning = "Nothing in the sampled frames matches; scan more widely.";
    } else {
        out.detailed_response = std::to_string(out.key_evidence.size()) + " candidate moments seen.";
        out.reasoning = "Items marked possible are coarse cues that need a denser look.";
    }
    return out;
}

Reflection sim_reflect(const SimWorld& world, std::span<const EvidenceItem> ledger)
{
    Reflection r;
    const EvidenceItem* hint = nullptr;
    for (const auto& item : ledger) {
        const auto seen = seen_label(item.description);
        if (!seen || seen->label != world.target_label || world.target_label.empty())
            continue;
        if (!seen->hint) {
            r.confidence = 1.0;
            r.sufficient = true;
            r.justification = "Answer: (" + std::string(1, world.answer_letter()) + "). The "
                              + world.target_label + " moment is seen at "
                              + range_text(item.start_sec, item.end_sec) + ".";
            r.reasoning = "Direct evidence of the target event.";
            return r;
        }
        if (!hint)
            hint = &item;
    }
    if (hint) {
        r.confidence = 0.4;
        r.justification = "need finer observation at " + range_text(hint->start_sec, hint->end_sec);
        r.reasoning = "Only a coarse cue so far.";
        return r;
    }
    r.confidence = 0.1;
    r.justification = "no relevant evidence yet; the whole video needs a closer scan";
    r.reasoning = "Nothing relevant observed.";
    return r;
}

std::string sim_forced_answer(const SimWorld& world, std::span<const EvidenceItem> ledger)
{
    std::optional<char> first_hint;
    for (const auto& item : ledger) {
        const auto seen = seen_label(item.description);
        if (!seen)
            continue;
        const auto it = world.option_map.find(seen->label);
        if (!seen->hint && seen->label == world.target_label && it != world.option_map.end())
            return std::string(1, it->second);
        if (seen->hint && !first_hint && it != world.option_map.end())
            first_hint = it->second;
    }
    return std::string(1, first_hint.value_or('A'));
}

Plan sim_plan(const SimWorld& world, std::span<const HistoryEntry> history, int round)
{
    Plan plan;
    plan.round = round;
    plan.what = "find what the subject does";
    if (round <= 1) {
        plan.where = WhereMode::uniform;
        plan.fps = 0.5;
        plan.res = SpatialRes::low;
        return plan;
    }
    std::vector<TimeRange> spans;
    for (const auto& h : history)
        for (const auto& item : h.evidence)
            if (item.description.starts_with(kHintPrefix))
                if (auto r = clamp_range({static_cast<double>(item.start_sec) - kSimRegionPadSec,
                                          static_cast<double>(item.end_sec) + kSimRegionPadSec},
                                         world.duration_sec))
                    spans.push_back(*r);
    plan.res = SpatialRes::medium;
    if (spans.empty()) {
        plan.where = WhereMode::uniform;
        plan.fps = 1.0;
        return plan;
    }
    plan.where = WhereMode::region;
    plan.regions = merge_ranges(std::move(spans));
    plan.fps = 2.0;
    return plan;
}

Query sim_query(const SimWorld& world)
{
    std::vector<std::string> texts(world.option_map.size());
    for (const auto& [label, letter] : world.option_map)
        texts.at(static_cast<std::size_t>(letter - 'A')) = label;
    return Query::make(world.question, texts, "sim-" + std::to_string(world.seed));
}

VideoMeta sim_video(const SimWorld& world)
{
    VideoMeta meta;
    meta.video_id = "sim-" + std::to_string(world.seed);
    meta.duration_sec = world.duration_sec;
    meta.frame_source = "synthetic:4fps";
    meta.frames = std::make_shared<const FrameManifest>(
        synthetic_manifest(world.duration_sec, kSimManifestFps));
    return meta;
}

BackendResponse SimBackend::send(const BackendRequest& req)
{
    const json inputs = extract_json_payload(req.user_text);
    BackendResponse resp;
    switch (req.role) {
    case AgentRole::planner: {
        std::vector<HistoryEntry> history;
        for (const auto& h : inputs.value("history", json::array())) {
            HistoryEntry entry;
            entry.evidence = evidence_from_inputs(h.value("evidence", json::array()));
            history.push_back(std::move(entry));
        }
        const Plan plan = sim_plan(world_, history, inputs.value("round", 1));
        resp.text = plan_reply(plan).dump();
        resp.latency_ms = 900;
        break;
    }
    case AgentRole::observer: {
        Plan plan;
        plan.round = inputs.value("round", 1);
        plan.fps = inputs.value("fps", 0.5);
        plan.res = parse_spatial_res(inputs.value("spatial_token_rate", std::string("low")))
                       .value_or(SpatialRes::low);
        std::vector<double> timestamps;
        timestamps.reserve(req.frames.size());
        for (const auto& f : req.frames)
            timestamps.push_back(f.timestamp_sec);
        const auto obs = sim_observe(world_, plan, timestamps);
        json items = json::array();
        for (const auto& e : obs.key_evidence)
            items.push_back({{"timestamp_start", e.start_sec},
                             {"timestamp_end", e.end_sec},
                             {"description", e.description}});
        resp.text = json{{"detailed_response", obs.detailed_response},
                         {"key_evidence", items},
                         {"reasoning", obs.reasoning}}
                        .dump();
        resp.latency_ms = 300 + 5 * static_cast<std::int64_t>(req.frames.size());
        break;
    }
    case AgentRole::reflector: {
        const auto ledger = evidence_from_inputs(inputs.value("evidence_summary", json::array()));
        if (inputs.value("must_answer", false)) {
            const auto letter = sim_forced_answer(world_, ledger);
            resp.text = json{{"answer", letter},
                             {"justification", "Answer: (" + letter + "), best guess on the evidence so far."}}
                            .dump();
        } else {
            const auto r = sim_reflect(world_, ledger);
            resp.text = json{{"sufficient", r.sufficient},
                             {"confidence", r.confidence},
                             {"justification", r.justification},
                             {"reasoning", r.reasoning}}
                            .dump();
        }
        resp.latency_ms = 600;
        break;
    }
    }
    return resp;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

void to_json(json& j, const SimRecord& v)
{
    j = json{{"seed", v.seed},
             {"solvable", v.solvable},
             {"hinted_target", v.hinted_target},
             {"expected", v.expected},
             {"answer", v.answer},
             {"correct", v.correct},
             {"rounds_used", v.rounds_used},
             {"halted_by", v.halted_by},
             {"error", v.error.empty() ? json() : json(v.error)}};
}

void to_json(json& j, const SimSuiteReport& v)
{
    json hist = json::object();
    for (const auto& [rounds, n] : v.rounds_histogram)
        hist[std::to_string(rounds)] = n;
    j = json{{"max_rounds", v.max_rounds}, {"worlds", v.worlds},   {"solvable", v.solvable},
             {"solved", v.solved},         {"forced", v.forced},   {"errors", v.errors},
             {"rounds_histogram", hist},   {"records", v.records}};
}

SimSuiteReport run_sim_suite(const std::vector<std::uint64_t>& seeds, const WorldParams& params,
                             const SessionConfig& cfg, int concurrency)
{
    std::vector<SimRecord> records(seeds.size());
    parallel_for(seeds.size(), concurrency, [&](std::size_t i) {
        const SimWorld world = generate_world(seeds[i], params);
        SimRecord& rec = records[i];
        rec.seed = seeds[i];
        rec.solvable = world.solvable();
        rec.hinted_target = world.target() && world.target()->coarse_hint;
        if (const char letter = world.answer_letter())
            rec.expected = std::string(1, letter);

        SimBackend backend(world);
        VirtualClock clock;
        SessionOptions options;
        options.clock = &clock;
        try {
            const auto result = run_session(sim_video(world), sim_query(world), cfg,
                                            AgentBackends(backend), options);
            rec.answer = result.answer;
            rec.rounds_used = result.rounds_used;
            rec.halted_by = result.halted_by;
        } catch (const SessionError& e) {
            rec.error = e.kind() + ": " + e.what();
            rec.rounds_used = e.partial().rounds_used;
        }
        rec.correct = rec.solvable && rec.error.empty() && rec.answer == rec.expected;
    });

    std::sort(records.begin(), records.end(),
              [](const SimRecord& a, const SimRecord& b) { return a.seed < b.seed; });
    SimSuiteReport report;
    report.max_rounds = cfg.max_rounds;
    report.worlds = static_cast<int>(records.size());
    for (const auto& r : records) {
        report.solvable += r.solvable ? 1 : 0;
        report.solved += r.correct ? 1 : 0;
        report.errors += r.error.empty() ? 0 : 1;
        report.forced += (r.error.empty() && r.halted_by == HaltReason::forced) ? 1 : 0;
        if (r.error.empty())
            ++report.rounds_histogram[r.rounds_used];
    }
    report.records = std::move(records);
    return report;
}

} // namespace vidscout
