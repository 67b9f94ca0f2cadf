// SPDX-License-Identifier: Apache-2.0

#include "vidscout/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vidscout/errors.hpp"

namespace vidscout {

Query Query::make(std::string text, const std::vector<std::string>& option_texts,
                  std::string video_id)
{
    Query q;
    q.text = std::move(text);
    q.video_id = std::move(video_id);
    if (option_texts.size() > 26)
        throw ValidationError("at most 26 options are supported");
    for (std::size_t i = 0; i < option_texts.size(); ++i)
        q.options.push_back({static_cast<char>('A' + i), option_texts[i]});
    validate(q);
    return q;
}

void validate(const Query& query)
{
    if (query.text.empty())
        throw ValidationError("query text is empty");
    for (std::size_t i = 0; i < query.options.size(); ++i) {
        if (query.options[i].letter != static_cast<char>('A' + i))
            throw ValidationError("option letters must be contiguous from A");
    }
}

void validate(const VideoMeta& meta)
{
    if (!(meta.duration_sec > 0.0) || !std::isfinite(meta.duration_sec))
        throw ValidationError("video duration must be positive");
}

std::string_view to_string(SpatialRes res) noexcept
{
    return res == SpatialRes::low ? "low" : "medium";
}

std::optional<SpatialRes> parse_spatial_res(std::string_view text)
{
    if (text == "low")
        return SpatialRes::low;
    if (text == "medium")
        return SpatialRes::medium;
    return std::nullopt;
}

std::string_view to_string(WhereMode mode) noexcept
{
    return mode == WhereMode::uniform ? "uniform" : "region";
}

std::string_view to_string(HaltReason reason) noexcept
{
    return reason == HaltReason::confidence ? "confidence" : "forced";
}

// ---------------------------------------------------------------------------

void EvidenceLedger::append(std::span<const EvidenceItem> slice)
{
    int last_round = items_.empty() ? 0 : items_.back().round;
    for (const auto& item : slice) {
        if (item.round < last_round)
            throw ValidationError("evidence ledger is append-only in round order");
        if (item.start_sec > item.end_sec || item.start_sec < 0)
            throw ValidationError("evidence interval must satisfy 0 <= start <= end");
        last_round = item.round;
    }
    items_.insert(items_.end(), slice.begin(), slice.end());
}

std::vector<EvidenceItem> EvidenceLedger::slice(int round) const
{
    std::vector<EvidenceItem> out;
    std::copy_if(items_.begin(), items_.end(), std::back_inserter(out),
                 [round](const EvidenceItem& e) { return e.round == round; });
    return out;
}

std::vector<EvidenceItem> EvidenceLedger::sorted_by_interval() const
{
    auto out = items_;
    std::stable_sort(out.begin(), out.end(), [](const EvidenceItem& a, const EvidenceItem& b) {
        return std::tie(a.start_sec, a.end_sec) < std::tie(b.start_sec, b.end_sec);
    });
    return out;
}

// ---------------------------------------------------------------------------

double FpsBounds::clamp(double fps) const noexcept
{
    return std::clamp(fps, min, max);
}

SessionConfig default_config()
{
    return SessionConfig{};
}

SessionConfig validate_config(SessionConfig cfg)
{
    if (cfg.max_rounds < 1)
        throw ConfigError("max_rounds must be at least 1");
    if (!(cfg.confidence_threshold >= 0.0 && cfg.confidence_threshold <= 1.0))
        throw ConfigError("confidence_threshold must lie in [0, 1]");
    if (cfg.token_budget <= 0)
        throw ConfigError("token_budget must be positive");
    if (cfg.text_reserve_tokens <= 0)
        throw ConfigError("text_reserve_tokens must be positive");
    if (cfg.text_reserve_tokens >= cfg.token_budget)
        throw ConfigError("text_reserve_tokens must be smaller than token_budget");
    if (cfg.fps_bounds.min > cfg.fps_bounds.max)
        std::swap(cfg.fps_bounds.min, cfg.fps_bounds.max);
    if (!(cfg.fps_bounds.min > 0.0) || !std::isfinite(cfg.fps_bounds.max))
        throw ConfigError("fps bounds must be positive and finite");
    if (!(cfg.backend.timeout_s > 0.0))
        throw ConfigError("backend timeout must be positive");
    if (cfg.backend.max_retries < 0)
        throw ConfigError("backend max_retries must be non-negative");
    if (cfg.backend.backoff_initial_s < 0.0)
        throw ConfigError("backend backoff must be non-negative");
    return cfg;
}

// ---------------------------------------------------------------------------

RoundAccounting& RoundAccounting::operator+=(const RoundAccounting& o)
{
    input_tokens += o.input_tokens;
    frame_count += o.frame_count;
    backend_calls += o.backend_calls;
    wall_time_ms += o.wall_time_ms;
    return *this;
}

RoundAccounting& Accounting::at_round(int round)
{
    for (auto& r : rounds_) {
        if (r.round == round)
            return r;
    }
    if (!rounds_.empty() && rounds_.back().round > round)
        throw ValidationError("accounting rounds must be created in order");
    rounds_.push_back(RoundAccounting{.round = round});
    return rounds_.back();
}

RoundAccounting Accounting::total() const
{
    RoundAccounting sum;
    for (const auto& r : rounds_)
        sum += r;
    sum.round = static_cast<int>(rounds_.size());
    return sum;
}

std::int64_t estimate_text_tokens(std::string_view text) noexcept
{
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

void to_json(json& j, const OptionChoice& v)
{
    j = json{{"letter", std::string(1, v.letter)}, {"text", v.text}};
}

void from_json(const json& j, OptionChoice& v)
{
    const auto letter = j.at("letter").get<std::string>();
    if (letter.size() != 1)
        throw ValidationError("option letter must be a single character");
    v.letter = letter[0];
    v.text = j.at("text").get<std::string>();
}

void to_json(json& j, const Query& v)
{
    j = json{{"text", v.text}, {"options", v.options}, {"video_id", v.video_id}};
}

void from_json(const json& j, Query& v)
{
    v.text = j.at("text").get<std::string>();
    v.options = j.value("options", std::vector<OptionChoice>{});
    v.video_id = j.value("video_id", std::string{});
}

void to_json(json& j, const VideoMeta& v)
{
    j = json{{"video_id", v.video_id},
             {"duration_sec", v.duration_sec},
             {"frame_source", v.frame_source}};
}

void from_json(const json& j, VideoMeta& v)
{
    v.video_id = j.at("video_id").get<std::string>();
    v.duration_sec = j.at("duration_sec").get<double>();
    v.frame_source = j.value("frame_source", std::string{});
    v.frames.reset();
}

void to_json(json& j, SpatialRes v) { j = std::string(to_string(v)); }

void from_json(const json& j, SpatialRes& v)
{
    const auto parsed = parse_spatial_res(j.get<std::string>());
    if (!parsed)
        throw ValidationError("unknown spatial resolution: " + j.dump());
    v = *parsed;
}

void to_json(json& j, WhereMode v) { j = std::string(to_string(v)); }

void from_json(const json& j, WhereMode& v)
{
    const auto s = j.get<std::string>();
    if (s == "uniform")
        v = WhereMode::uniform;
    else if (s == "region")
        v = WhereMode::region;
    else
        throw ValidationError("unknown where mode: " + s);
}

void to_json(json& j, const TimeRange& v) { j = json::array({v.start, v.end}); }

void from_json(const json& j, TimeRange& v)
{
    if (!j.is_array() || j.size() != 2)
        throw ValidationError("time range must be a [start, end] pair");
    v.start = j[0].get<double>();
    v.end = j[1].get<double>();
}

void to_json(json& j, const Plan& v)
{
    j = json{{"what", v.what},   {"where", v.where}, {"regions", v.regions},
             {"fps", v.fps},     {"res", v.res},     {"round", v.round}};
}

void from_json(const json& j, Plan& v)
{
    v.what = j.at("what").get<std::string>();
    v.where = j.at("where").get<WhereMode>();
    v.regions = j.at("regions").get<std::vector<TimeRange>>();
    v.fps = j.at("fps").get<double>();
    v.res = j.at("res").get<SpatialRes>();
    v.round = j.at("round").get<int>();
}

void to_json(json& j, const EvidenceItem& v)
{
    j = json{{"start_sec", v.start_sec},
             {"end_sec", v.end_sec},
             {"description", v.description},
             {"round", v.round}};
}

void from_json(const json& j, EvidenceItem& v)
{
    v.start_sec = j.at("start_sec").get<std::int64_t>();
    v.end_sec = j.at("end_sec").get<std::int64_t>();
    v.description = j.at("description").get<std::string>();
    v.round = j.at("round").get<int>();
}

void to_json(json& j, const EvidenceLedger& v) { j = json{{"items", v.items()}}; }

void from_json(const json& j, EvidenceLedger& v)
{
    v = EvidenceLedger{};
    v.append(j.at("items").get<std::vector<EvidenceItem>>());
}

void to_json(json& j, const Reflection& v)
{
    j = json{{"confidence", v.confidence},
             {"sufficient", v.sufficient},
             {"justification", v.justification},
             {"reasoning", v.reasoning}};
}

void from_json(const json& j, Reflection& v)
{
    v.confidence = j.at("confidence").get<double>();
    v.sufficient = j.at("sufficient").get<bool>();
    v.justification = j.at("justification").get<std::string>();
    v.reasoning = j.value("reasoning", std::string{});
}

void to_json(json& j, const HistoryEntry& v)
{
    j = json{{"plan", v.plan}, {"evidence", v.evidence}, {"justification", v.justification}};
}

void from_json(const json& j, HistoryEntry& v)
{
    v.plan = j.at("plan").get<Plan>();
    v.evidence = j.at("evidence").get<std::vector<EvidenceItem>>();
    v.justification = j.at("justification").get<std::string>();
}

void to_json(json& j, const FpsBounds& v) { j = json{{"min", v.min}, {"max", v.max}}; }

void from_json(const json& j, FpsBounds& v)
{
    const FpsBounds d;
    v.min = j.value("min", d.min);
    v.max = j.value("max", d.max);
}

void to_json(json& j, const BackendPolicy& v)
{
    j = json{{"timeout_s", v.timeout_s},
             {"max_retries", v.max_retries},
             {"backoff_initial_s", v.backoff_initial_s}};
}

void from_json(const json& j, BackendPolicy& v)
{
    const BackendPolicy d;
    v.timeout_s = j.value("timeout_s", d.timeout_s);
    v.max_retries = j.value("max_retries", d.max_retries);
    v.backoff_initial_s = j.value("backoff_initial_s", d.backoff_initial_s);
}

void to_json(json& j, const SessionConfig& v)
{
    j = json{{"max_rounds", v.max_rounds},
             {"confidence_threshold", v.confidence_threshold},
             {"token_budget", v.token_budget},
             {"text_reserve_tokens", v.text_reserve_tokens},
             {"fps_bounds", v.fps_bounds},
             {"backend_policy", v.backend}};
}

// Missing keys keep their defaults so partial config files are accepted.
void from_json(const json& j, SessionConfig& v)
{
    const SessionConfig d;
    v.max_rounds = j.value("max_rounds", d.max_rounds);
    v.confidence_threshold = j.value("confidence_threshold", d.confidence_threshold);
    v.token_budget = j.value("token_budget", d.token_budget);
    v.text_reserve_tokens = j.value("text_reserve_tokens", d.text_reserve_tokens);
    v.fps_bounds = j.value("fps_bounds", d.fps_bounds);
    v.backend = j.value("backend_policy", d.backend);
}

void to_json(json& j, const RoundAccounting& v)
{
    j = json{{"round", v.round},
             {"input_tokens", v.input_tokens},
             {"frame_count", v.frame_count},
             {"backend_calls", v.backend_calls},
             {"wall_time_ms", v.wall_time_ms}};
}

void from_json(const json& j, RoundAccounting& v)
{
    v.round = j.at("round").get<int>();
    v.input_tokens = j.at("input_tokens").get<std::int64_t>();
    v.frame_count = j.at("frame_count").get<std::int64_t>();
    v.backend_calls = j.at("backend_calls").get<int>();
    v.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
}

void to_json(json& j, const Accounting& v)
{
    j = json{{"rounds", v.rounds()}, {"total", v.total()}};
}

void from_json(const json& j, Accounting& v)
{
    v = Accounting{};
    for (const auto& r : j.at("rounds").get<std::vector<RoundAccounting>>())
        v.at_round(r.round) = r;
}

void to_json(json& j, HaltReason v) { j = std::string(to_string(v)); }

void from_json(const json& j, HaltReason& v)
{
    const auto s = j.get<std::string>();
    if (s == "confidence")
        v = HaltReason::confidence;
    else if (s == "forced")
        v = HaltReason::forced;
    else
        throw ValidationError("unknown halt reason: " + s);
}

} // namespace vidscout
