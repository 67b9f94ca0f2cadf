// SPDX-License-Identifier: Apache-2.0

#include "vidscout/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "vidscout/errors.hpp"
#include "vidscout/prompts.hpp"
#include "vidscout/time_grammar.hpp"

namespace vidscout {

namespace {

constexpr double kUniformDefaultFps = 0.5;
constexpr double kRegionDefaultFps = 2.0;

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<double> as_number(const json& j)
{
    if (j.is_number())
        return j.get<double>();
    if (j.is_string()) {
        try {
            std::size_t used = 0;
            const auto s = j.get<std::string>();
            const double v = std::stod(s, &used);
            if (used > 0)
                return v;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

std::optional<bool> as_bool(const json& j)
{
    if (j.is_boolean())
        return j.get<bool>();
    if (j.is_string()) {
        const auto s = lower(j.get<std::string>());
        if (s == "true" || s == "yes")
            return true;
        if (s == "false" || s == "no")
            return false;
    }
    return std::nullopt;
}

std::string as_text(const json& obj, std::initializer_list<const char*> keys)
{
    for (const char* key : keys) {
        if (auto it = obj.find(key); it != obj.end()) {
            if (it->is_string())
                return it->get<std::string>();
            if (!it->is_null())
                return it->dump();
        }
    }
    return {};
}

const json* find_any(const json& obj, std::initializer_list<const char*> keys)
{
    for (const char* key : keys) {
        if (auto it = obj.find(key); it != obj.end() && !it->is_null())
            return &*it;
    }
    return nullptr;
}

json evidence_json(std::span<const EvidenceItem> items)
{
    json out = json::array();
    for (const auto& e : items) {
        out.push_back({{"start", e.start_sec},
                       {"end", e.end_sec},
                       {"description", e.description},
                       {"round", e.round}});
    }
    return out;
}

json plan_inputs(const Plan& plan)
{
    return {{"what", plan.what},
            {"where", std::string(to_string(plan.where))},
            {"fps", plan.fps},
            {"spatial_token_rate", std::string(to_string(plan.res))},
            {"regions", plan.regions}};
}

// One ask plus at most one re-ask; `parse` throws MalformedOutput to reject.
template <typename Parse>
auto ask_with_reask(ModelChannel& channel, BackendRequest req, std::int64_t frame_cost,
                    Parse&& parse) -> std::optional<decltype(parse(std::string_view{}))>
{
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1)
            req.user_text += prompts::reask_suffix();
        const auto resp = channel.send(req, frame_cost, attempt);
        try {
            return parse(resp.text);
        } catch (const MalformedOutput&) {
        } catch (const json::exception&) {
        }
    }
    return std::nullopt;
}

} // namespace

// ---------------------------------------------------------------------------
// JSON for agent types
// ---------------------------------------------------------------------------

void to_json(json& j, const ObservationResult& v)
{
    j = json{{"detailed_response", v.detailed_response},
             {"key_evidence", v.key_evidence},
             {"reasoning", v.reasoning},
             {"no_relevant", v.no_relevant}};
}

void from_json(const json& j, ObservationResult& v)
{
    v.detailed_response = j.at("detailed_response").get<std::string>();
    v.key_evidence = j.at("key_evidence").get<std::vector<EvidenceItem>>();
    v.reasoning = j.value("reasoning", std::string{});
    v.no_relevant = j.value("no_relevant", false);
}

void to_json(json& j, const CallRecord& v)
{
    j = json{{"round", v.round},
             {"role", std::string(to_string(v.role))},
             {"attempt", v.attempt},
             {"digest", v.digest},
             {"input_tokens", v.input_tokens},
             {"input_estimated", v.input_estimated},
             {"output_tokens", v.output_tokens ? json(*v.output_tokens) : json()},
             {"frame_count", v.frame_count},
             {"frame_token_cost", v.frame_token_cost},
             {"latency_ms", v.latency_ms},
             {"wall_ms", v.wall_ms}};
}

// ---------------------------------------------------------------------------
// Model channel
// ---------------------------------------------------------------------------

Backend& AgentBackends::for_role(AgentRole role) const
{
    Backend* b = role == AgentRole::planner    ? planner
                 : role == AgentRole::observer ? observer
                                               : reflector;
    if (!b)
        throw ConfigError("no backend configured for role " + std::string(to_string(role)));
    return *b;
}

ModelChannel::ModelChannel(AgentBackends backends, Clock& clock, Accounting& accounting,
                           TokenEstimator estimator)
    : backends_(backends), clock_(clock), accounting_(accounting),
      estimator_(estimator ? std::move(estimator) : TokenEstimator(estimate_text_tokens))
{}

BackendResponse ModelChannel::send(const BackendRequest& req, std::int64_t frame_token_cost,
                                   int attempt)
{
    CallRecord rec;
    rec.round = round_;
    rec.role = req.role;
    rec.attempt = attempt;
    rec.digest = request_digest(req);
    rec.frame_count = static_cast<std::int64_t>(req.frames.size());
    rec.frame_token_cost = frame_token_cost;

    const auto started = clock_.now_ms();
    const auto resp = backends_.for_role(req.role).send(req);
    clock_.on_backend_latency(resp.latency_ms);
    rec.wall_ms = clock_.now_ms() - started;
    rec.latency_ms = resp.latency_ms;
    rec.output_tokens = resp.usage.output_tokens;
    if (resp.usage.input_tokens) {
        rec.input_tokens = *resp.usage.input_tokens;
        rec.input_estimated = false;
    } else {
        rec.input_tokens =
            frame_token_cost + estimator_(req.system_text) + estimator_(req.user_text);
    }

    auto& acct = accounting_.at_round(round_);
    acct.input_tokens += rec.input_tokens;
    acct.backend_calls += 1;
    if (req.role == AgentRole::observer)
        acct.frame_count += rec.frame_count;
    calls_.push_back(std::move(rec));
    return resp;
}

int ModelChannel::calls_for(AgentRole role) const
{
    return static_cast<int>(std::count_if(calls_.begin(), calls_.end(), [role](const CallRecord& c) {
        return c.role == role && c.attempt == 0;
    }));
}

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

Plan validate_plan(Plan plan, double duration_sec, const SessionConfig& cfg,
                   std::string_view default_what)
{
    if (plan.what.empty())
        plan.what = std::string(default_what);

    std::vector<TimeRange> regions;
    for (const auto& r : plan.regions) {
        if (!std::isfinite(r.start) || !std::isfinite(r.end))
            continue;
        if (auto c = clamp_range(r, duration_sec))
            regions.push_back(*c);
    }
    plan.regions = merge_ranges(std::move(regions));
    if (plan.where == WhereMode::region && plan.regions.empty())
        plan.where = WhereMode::uniform;
    if (plan.where == WhereMode::uniform)
        plan.regions.clear();

    if (!std::isfinite(plan.fps) || plan.fps <= 0.0)
        plan.fps = plan.where == WhereMode::uniform ? kUniformDefaultFps : kRegionDefaultFps;
    plan.fps = cfg.fps_bounds.clamp(plan.fps);
    if (plan.round < 1)
        plan.round = 1;
    return plan;
}

PlannerOutput parse_planner_output(const json& reply, const VideoMeta& meta,
                                   const SessionConfig& cfg, std::string_view default_what,
                                   int round)
{
    if (!reply.is_object())
        throw MalformedOutput("planner reply is not an object");
    const json* plans = find_any(reply, {"plans", "plan"});
    if (!plans)
        throw MalformedOutput("planner reply has no plans");
    // One plan per round: a list contributes its first entry only.
    const json& p = plans->is_array() ? (plans->empty() ? json::object() : plans->front()) : *plans;
    if (!p.is_object() || p.empty())
        throw MalformedOutput("planner plan is not an object");

    const json how = p.contains("how") && p["how"].is_object() ? p["how"] : json::object();

    Plan plan;
    plan.round = round;
    plan.what = as_text(p, {"what", "sub_query"});

    const auto where = lower(as_text(p, {"where", "load_mode"}));
    plan.where = where == "region" || where == "regions" ? WhereMode::region : WhereMode::uniform;

    const json* fps = find_any(p, {"fps"});
    if (!fps)
        fps = find_any(how, {"fps"});
    plan.fps = fps ? as_number(*fps).value_or(0.0) : 0.0;

    const json* res = find_any(p, {"spatial_token_rate", "spatial_res", "resolution"});
    if (!res)
        res = find_any(how, {"spatial_token_rate", "spatial_res", "resolution"});
    std::string res_text = res && res->is_string() ? lower(res->get<std::string>()) : "";
    if (res_text == "high")
        res_text = "medium"; // no token cost is defined for a third tier
    plan.res = parse_spatial_res(res_text).value_or(
        plan.where == WhereMode::region ? SpatialRes::medium : SpatialRes::low);

    if (const json* regions = find_any(p, {"regions"}); regions && regions->is_array()) {
        for (const auto& r : *regions) {
            std::optional<double> s, e;
            if (r.is_array() && r.size() >= 2) {
                s = as_number(r[0]);
                e = as_number(r[1]);
            } else if (r.is_object()) {
                if (const json* v = find_any(r, {"start", "start_sec"}))
                    s = as_number(*v);
                if (const json* v = find_any(r, {"end", "end_sec"}))
                    e = as_number(*v);
            }
            if (s && e)
                plan.regions.push_back({*s, *e});
        }
    }
    // A plan naming regions without a mode is a region plan.
    if (where.empty() && !plan.regions.empty())
        plan.where = WhereMode::region;

    PlannerOutput out;
    out.reasoning = as_text(reply, {"reasoning"});
    out.plan = validate_plan(std::move(plan), meta.duration_sec, cfg, default_what);
    return out;
}

namespace {

Plan run_planner(const json& inputs, std::string_view task, const Query& query,
                 const VideoMeta& meta, ModelChannel& channel, const SessionConfig& cfg, int round)
{
    BackendRequest req;
    req.role = AgentRole::planner;
    req.system_text = std::string(prompts::planner_system());
    req.user_text = prompts::user_text(inputs, task);
    req.response_schema_hint = "planner.v1";
    req.max_output_tokens = 1024;

    auto out = ask_with_reask(channel, std::move(req), 0, [&](std::string_view text) {
        return parse_planner_output(extract_json_payload(text), meta, cfg, query.text, round);
    });
    if (!out)
        throw PlannerFailure("planner reply malformed after re-ask");
    return out->plan;
}

} // namespace

Plan plan_init(const Query& query, const VideoMeta& meta, ModelChannel& channel,
               const SessionConfig& cfg)
{
    const json inputs = {{"mode", "init"},
                         {"round", 1},
                         {"query", query.text},
                         {"options", prompts::options_json(query)},
                         {"duration_sec", meta.duration_sec},
                         {"fps_bounds", {cfg.fps_bounds.min, cfg.fps_bounds.max}}};
    return run_planner(inputs, "Plan the first observation round.", query, meta, channel, cfg, 1);
}

Plan plan_replan(const Query& query, const VideoMeta& meta, std::span<const HistoryEntry> history,
                 std::string_view justification, ModelChannel& channel, const SessionConfig& cfg)
{
    if (history.empty())
        throw ValidationError("replanning needs a non-empty history");
    const int round = history.back().plan.round + 1;
    json hist = json::array();
    for (const auto& h : history) {
        hist.push_back({{"round", h.plan.round},
                        {"plan", plan_inputs(h.plan)},
                        {"evidence", evidence_json(h.evidence)},
                        {"justification", h.justification}});
    }
    const json inputs = {{"mode", "replan"},
                         {"round", round},
                         {"query", query.text},
                         {"options", prompts::options_json(query)},
                         {"duration_sec", meta.duration_sec},
                         {"fps_bounds", {cfg.fps_bounds.min, cfg.fps_bounds.max}},
                         {"history", std::move(hist)},
                         {"latest_justification", std::string(justification)}};
    return run_planner(inputs, "Plan the next observation round.", query, meta, channel, cfg,
                       round);
}

Plan rule_based_plan(const Query& query, const VideoMeta& meta, const SessionConfig& cfg)
{
    const auto cues = parse_time_cues(query.text);
    Plan plan;
    plan.what = query.text;
    plan.round = 1;
    plan.regions = apply_timestamp_rules(cues, classify_query(query.text), meta.duration_sec);
    if (plan.regions.empty()) {
        plan.where = WhereMode::uniform;
        plan.fps = kUniformDefaultFps;
        plan.res = SpatialRes::low;
    } else {
        plan.where = WhereMode::region;
        plan.fps = kRegionDefaultFps;
        plan.res = SpatialRes::medium;
    }
    return validate_plan(std::move(plan), meta.duration_sec, cfg, query.text);
}

Plan fallback_replan(std::span<const HistoryEntry> history, const VideoMeta& meta,
                     const SessionConfig& cfg)
{
    if (history.empty())
        throw ValidationError("fallback replanning needs a non-empty history");
    Plan plan = history.back().plan;
    plan.round = history.back().plan.round + 1;
    std::vector<TimeRange> regions;
    for (const auto& h : history) {
        for (const auto& e : h.evidence) {
            regions.push_back({static_cast<double>(e.start_sec) - kFallbackEvidencePadSec,
                               static_cast<double>(e.end_sec) + kFallbackEvidencePadSec});
        }
    }
    if (regions.empty()) {
        plan.where = WhereMode::uniform;
        plan.regions.clear();
        plan.fps = plan.fps * 2.0;
        plan.res = SpatialRes::medium;
    } else {
        plan.where = WhereMode::region;
        plan.regions = std::move(regions);
    }
    const std::string what = plan.what;
    return validate_plan(std::move(plan), meta.duration_sec, cfg, what);
}

// ---------------------------------------------------------------------------
// Observer
// ---------------------------------------------------------------------------

EvidenceItem round_evidence(double start, double end, std::string description,
                            double duration_sec, int round)
{
    if (start > end)
        std::swap(start, end);
    const auto upper = static_cast<std::int64_t>(std::ceil(duration_sec));
    const auto s = std::clamp(static_cast<std::int64_t>(std::floor(start)), std::int64_t{0}, upper);
    const auto e = std::clamp(static_cast<std::int64_t>(std::ceil(end)), std::int64_t{0}, upper);
    return EvidenceItem{s, e, std::move(description), round};
}

ObservationResult parse_observation(const json& reply, double duration_sec, int round)
{
    if (!reply.is_object())
        throw MalformedOutput("observer reply is not an object");
    if (!reply.contains("detailed_response") && !reply.contains("key_evidence"))
        throw MalformedOutput("observer reply lacks detailed_response and key_evidence");

    ObservationResult out;
    out.detailed_response = as_text(reply, {"detailed_response"});
    out.reasoning = as_text(reply, {"reasoning"});
    if (const json* items = find_any(reply, {"key_evidence"}); items && items->is_array()) {
        for (const auto& item : *items) {
            if (!item.is_object())
                continue;
            const json* s = find_any(item, {"timestamp_start", "start"});
            const json* e = find_any(item, {"timestamp_end", "end"});
            if (!s || !e)
                continue;
            const auto start = as_number(*s);
            const auto end = as_number(*e);
            auto desc = as_text(item, {"description"});
            if (!start || !end || !std::isfinite(*start) || !std::isfinite(*end) || desc.empty())
                continue;
            out.key_evidence.push_back(round_evidence(*start, *end, std::move(desc), duration_sec,
                                                      round));
        }
    }
    const auto marker = lower(kNoRelevantSentence);
    if (lower(out.detailed_response).find(marker.substr(0, marker.size() - 1))
        != std::string::npos) {
        out.no_relevant = true;
        out.key_evidence.clear();
    }
    return out;
}

std::string summarize_context(const EvidenceLedger& ledger, std::size_t max_chars)
{
    std::string out;
    const auto& items = ledger.items();
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
        std::string line = "[round " + std::to_string(it->round) + "] ["
                           + std::to_string(it->start_sec) + ", " + std::to_string(it->end_sec)
                           + "] " + it->description + "\n";
        if (out.size() + line.size() > max_chars)
            break;
        out += line;
    }
    return out;
}

ObservationResult observe(const Query& query, const Plan& plan, const VideoMeta& meta,
                          const EvidenceLedger& prior, ModelChannel& channel,
                          const SessionConfig& cfg, SampledClip* clip_out)
{
    if (!meta.frames)
        throw ValidationError("video " + meta.video_id + " has no frame manifest");
    const auto clip = build_clip(plan, meta, cfg);
    if (clip_out)
        *clip_out = clip;

    BackendRequest req;
    req.role = AgentRole::observer;
    req.system_text = std::string(prompts::observer_system());
    req.response_schema_hint = "observer.v1";
    req.max_output_tokens = 2048;
    for (const auto& frame : resolve_frames(*meta.frames, clip.timestamps))
        req.frames.push_back({load_frame_bytes(*meta.frames, frame), frame.mime, frame.t});

    const auto& covered = clip.regions_covered;
    const json inputs = {{"round", plan.round},
                         {"sub_query", plan.what},
                         {"original_query", query.text},
                         {"options", prompts::options_json(query)},
                         {"context", summarize_context(prior)},
                         {"start_sec", covered.empty() ? 0.0 : covered.front().start},
                         {"end_sec", covered.empty() ? meta.duration_sec : covered.back().end},
                         {"video_duration_sec", meta.duration_sec},
                         {"is_region", plan.where == WhereMode::region},
                         {"regions", plan.regions},
                         {"fps", plan.fps},
                         {"spatial_token_rate", std::string(to_string(plan.res))},
                         {"frame_count", req.frames.size()}};
    req.user_text = prompts::user_text(
        inputs, "Extract time-stamped evidence for the sub-query from the attached frames.");

    auto out = ask_with_reask(channel, std::move(req), clip.frame_token_cost,
                              [&](std::string_view text) {
                                  return parse_observation(extract_json_payload(text),
                                                           meta.duration_sec, plan.round);
                              });
    if (!out) {
        ObservationResult empty;
        empty.no_relevant = true;
        empty.detailed_response = "observer parse failure";
        return empty;
    }
    return *out;
}

// ---------------------------------------------------------------------------
// Reflector
// ---------------------------------------------------------------------------

Reflection parse_reflection(const json& reply, double threshold)
{
    if (!reply.is_object())
        throw MalformedOutput("reflector reply is not an object");
    std::optional<bool> sufficient;
    std::optional<double> confidence;
    if (const json* s = find_any(reply, {"sufficient"}))
        sufficient = as_bool(*s);
    if (const json* c = find_any(reply, {"confidence"}))
        confidence = as_number(*c);
    if (confidence && !std::isfinite(*confidence))
        confidence.reset();
    if (!sufficient && !confidence)
        throw MalformedOutput("reflector reply has neither sufficient nor confidence");

    Reflection r;
    const double fallback = sufficient.value_or(false) ? 1.0 : 0.0;
    r.confidence = std::clamp(confidence.value_or(fallback), 0.0, 1.0);
    r.sufficient = r.confidence >= threshold;
    r.justification = as_text(reply, {"justification"});
    r.reasoning = as_text(reply, {"reasoning"});
    return r;
}

namespace {

BackendRequest reflector_request(const Query& query, const VideoMeta& meta,
                                 const EvidenceLedger& ledger, bool must_answer)
{
    const auto sorted = ledger.sorted_by_interval();
    const json inputs = {{"query", query.text},
                         {"options", prompts::options_json(query)},
                         {"video_duration", meta.duration_sec},
                         {"evidence_summary", evidence_json(sorted)},
                         {"must_answer", must_answer}};
    BackendRequest req;
    req.role = AgentRole::reflector;
    req.system_text = std::string(prompts::reflector_system());
    req.user_text = prompts::user_text(
        inputs, must_answer ? "This is the final round: you must choose exactly one option."
                            : "Decide whether the evidence is sufficient to answer the query.");
    req.response_schema_hint = must_answer ? "reflector.must_answer.v1" : "reflector.v1";
    req.max_output_tokens = 1024;
    return req;
}

} // namespace

Reflection reflect(const Query& query, const VideoMeta& meta, const EvidenceLedger& ledger,
                   ModelChannel& channel, const SessionConfig& cfg)
{
    auto out = ask_with_reask(channel, reflector_request(query, meta, ledger, false), 0,
                              [&](std::string_view text) {
                                  return parse_reflection(extract_json_payload(text),
                                                          cfg.confidence_threshold);
                              });
    if (!out)
        return Reflection{0.0, false, "reflector parse failure", ""};
    return *out;
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool valid_letter(char c, std::span<const OptionChoice> options)
{
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return std::any_of(options.begin(), options.end(),
                       [up](const OptionChoice& o) { return o.letter == up; });
}

// A letter at `pos` standing on its own. Lower-case letters only count when
// closed by punctuation, so the article in "the answer is a dog" is ignored.
bool letter_token_at(std::string_view text, std::size_t pos)
{
    if (pos >= text.size() || !std::isalpha(static_cast<unsigned char>(text[pos])))
        return false;
    if (pos > 0 && is_word_char(text[pos - 1]))
        return false;
    const bool at_end = pos + 1 >= text.size();
    if (!at_end && is_word_char(text[pos + 1]))
        return false;
    if (std::isupper(static_cast<unsigned char>(text[pos])))
        return true;
    return at_end || std::string_view(").],;:!?").find(text[pos + 1]) != std::string_view::npos;
}

// Letter following a keyword, allowing "is", ':', '-', '=' and '(' between.
std::optional<char> letter_after(std::string_view text, std::string_view lowered,
                                 std::string_view keyword, std::span<const OptionChoice> options)
{
    for (std::size_t at = lowered.find(keyword); at != std::string_view::npos;
         at = lowered.find(keyword, at + 1)) {
        if (at > 0 && is_word_char(lowered[at - 1]))
            continue;
        std::size_t p = at + keyword.size();
        auto skip = [&] {
            while (p < lowered.size() && std::string_view(" \t:-=(*'\"").find(lowered[p])
                                             != std::string_view::npos)
                ++p;
        };
        skip();
        if (lowered.substr(p, 3) == "is ") {
            p += 3;
            skip();
        }
        if (letter_token_at(text, p) && valid_letter(text[p], options))
            return static_cast<char>(std::toupper(static_cast<unsigned char>(text[p])));
    }
    return std::nullopt;
}

std::set<std::string> content_words(std::string_view text)
{
    static const std::set<std::string> stop = {
        "the", "a",  "an",  "of",  "to",   "in",   "on",   "and", "or",    "is",
        "are", "it", "its", "was", "were", "be",   "by",   "at",  "for",   "with",
        "as",  "that", "this", "from", "so", "which", "what", "option", "answer"};
    std::set<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.size() > 1 && !stop.contains(word))
            out.insert(word);
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    return out;
}

} // namespace

std::string extract_answer(std::string_view justification, std::span<const OptionChoice> options)
{
    if (options.empty()) {
        if (justification.find_first_not_of(" \t\r\n") == std::string_view::npos)
            throw ExtractionFailure("empty justification for an open-ended query");
        return std::string(justification);
    }
    const auto lowered = lower(justification);

    for (std::string_view keyword : {"answer", "option"}) {
        if (auto c = letter_after(justification, lowered, keyword, options))
            return std::string(1, *c);
    }
    for (std::size_t p = justification.find('('); p != std::string_view::npos;
         p = justification.find('(', p + 1)) {
        if (p + 2 < justification.size() && justification[p + 2] == ')'
            && std::isalpha(static_cast<unsigned char>(justification[p + 1]))
            && valid_letter(justification[p + 1], options))
            return std::string(1, static_cast<char>(
                                      std::toupper(static_cast<unsigned char>(justification[p + 1]))));
    }
    for (std::size_t p = 0; p < justification.size(); ++p) {
        if (std::isupper(static_cast<unsigned char>(justification[p]))
            && letter_token_at(justification, p) && valid_letter(justification[p], options))
            return std::string(1, justification[p]);
    }

    const auto words = content_words(justification);
    int best_score = 0;
    char best = 0;
    for (const auto& opt : options) {
        int score = 0;
        for (const auto& w : content_words(opt.text))
            score += words.contains(w) ? 1 : 0;
        if (score > best_score) {
            best_score = score;
            best = opt.letter;
        }
    }
    if (best == 0)
        throw ExtractionFailure("justification names no option");
    return std::string(1, best);
}

ForcedAnswer force_answer(const Query& query, const VideoMeta& meta, const EvidenceLedger& ledger,
                          ModelChannel& channel, const SessionConfig& /*cfg*/)
{
    const auto resp = channel.send(reflector_request(query, meta, ledger, true));
    ForcedAnswer out;
    out.justification = resp.text;
    try {
        const auto reply = extract_json_payload(resp.text);
        auto just = as_text(reply, {"justification"});
        const auto answer_field = as_text(reply, {"answer"});
        if (!answer_field.empty())
            just = answer_field + (just.empty() ? "" : ". " + just);
        if (!just.empty())
            out.justification = just;
    } catch (const MalformedOutput&) {
    } catch (const json::exception&) {
    }
    try {
        out.answer = extract_answer(out.justification, query.options);
    } catch (const ExtractionFailure&) {
        out.degraded = true;
        out.answer = query.options.empty() ? std::string{} : std::string(1, query.options.front().letter);
    }
    return out;
}

} // namespace vidscout
