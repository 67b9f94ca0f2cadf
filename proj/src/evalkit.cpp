// SPDX-License-Identifier: Apache-2.0

#include "vidscout/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include "vidscout/errors.hpp"
#include "vidscout/media.hpp"
#include "vidscout/parallel.hpp"

namespace vidscout {

namespace {

constexpr std::string_view kSyntheticPrefix = "synthetic:";

DatasetItem parse_item(const json& j, const std::filesystem::path& base)
{
    if (!j.is_object())
        throw ValidationError("line is not a JSON object");
    DatasetItem item;
    const json& id = j.at("id");
    item.id = id.is_string() ? id.get<std::string>() : id.dump();
    item.frames = j.at("frames").get<std::string>();
    if (!item.frames.empty() && !item.frames.starts_with(kSyntheticPrefix)) {
        std::filesystem::path p(item.frames);
        if (p.is_relative())
            item.frames = (base / p).lexically_normal().string();
    }
    item.duration_sec = j.at("duration_sec").get<double>();
    item.question = j.at("question").get<std::string>();
    item.options = j.at("options").get<std::vector<std::string>>();
    item.answer = j.at("answer").get<std::string>();
    item.category = j.value("category", std::string{});
    validate(item);
    return item;
}

// Loads each distinct frame source once, even under concurrency.
class ManifestCache {
public:
    std::shared_ptr<const FrameManifest> get(const DatasetItem& item)
    {
        const std::string key = item.frames + "@" + json(item.duration_sec).dump();
        std::shared_ptr<Slot> slot;
        {
            std::lock_guard lock(mutex_);
            auto& s = slots_[key];
            if (!s)
                s = std::make_shared<Slot>();
            slot = s;
        }
        std::call_once(slot->once,
                       [&] { slot->manifest = open_frame_source(item.frames, item.duration_sec); });
        if (!slot->manifest)
            throw ValidationError("frames unavailable for item " + item.id);
        return slot->manifest;
    }

private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const FrameManifest> manifest;
    };
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

std::int64_t session_latency(const Accounting& accounting)
{
    return accounting.total().wall_time_ms;
}

} // namespace

void validate(const DatasetItem& item)
{
    if (item.id.empty())
        throw ValidationError("id is empty");
    if (item.frames.empty())
        throw ValidationError("frames is empty");
    if (!(item.duration_sec > 0.0) || !std::isfinite(item.duration_sec))
        throw ValidationError("duration_sec must be positive");
    if (item.question.empty())
        throw ValidationError("question is empty");
    if (item.options.empty() || item.options.size() > 26)
        throw ValidationError("options must hold between 1 and 26 entries");
    if (item.answer.size() != 1)
        throw ValidationError("answer must be a single option letter");
    const char last = static_cast<char>('A' + item.options.size() - 1);
    if (item.answer[0] < 'A' || item.answer[0] > last)
        throw ValidationError("answer '" + item.answer + "' is not one of the option letters A-"
                              + std::string(1, last));
}

Dataset load_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DatasetError("cannot read dataset: " + path.string());
    const auto base = path.parent_path();
    Dataset out;
    std::set<std::string> ids;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            auto item = parse_item(json::parse(line), base);
            if (!ids.insert(item.id).second)
                throw ValidationError("duplicate id '" + item.id + "'");
            out.items.push_back(std::move(item));
        } catch (const json::exception& e) {
            out.rejects.push_back({number, e.what()});
        } catch (const ValidationError& e) {
            out.rejects.push_back({number, e.what()});
        }
    }
    if (out.items.empty())
        throw DatasetError("dataset has no valid items: " + path.string());
    return out;
}

void to_json(json& j, const ItemRecord& v)
{
    j = json{{"id", v.id},
             {"category", v.category},
             {"expected", v.expected},
             {"answer", v.answer},
             {"correct", v.correct},
             {"status", v.status},
             {"error", v.error.empty() ? json() : json(v.error)},
             {"rounds_used", v.rounds_used},
             {"input_tokens", v.input_tokens},
             {"latency_ms", v.latency_ms}};
}

void to_json(json& j, const CategoryScore& v)
{
    j = json{{"correct", v.correct}, {"total", v.total}, {"accuracy", v.accuracy}};
}

void to_json(json& j, const BenchReport& v)
{
    j = json{{"total", v.total},
             {"correct", v.correct},
             {"errored", v.errored},
             {"accuracy", v.accuracy},
             {"per_category", v.per_category},
             {"mean_rounds", v.mean_rounds},
             {"mean_input_tokens", v.mean_input_tokens},
             {"latency_p50_ms", v.latency_p50_ms},
             {"latency_p95_ms", v.latency_p95_ms},
             {"items", v.items}};
}

std::int64_t nearest_rank(std::vector<std::int64_t> values, double p)
{
    if (values.empty())
        return 0;
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

BenchReport summarize(std::vector<ItemRecord> records)
{
    std::sort(records.begin(), records.end(),
              [](const ItemRecord& a, const ItemRecord& b) { return a.id < b.id; });
    BenchReport r;
    r.total = static_cast<int>(records.size());
    double rounds = 0.0;
    double tokens = 0.0;
    std::vector<std::int64_t> latencies;
    for (const auto& rec : records) {
        r.correct += rec.correct ? 1 : 0;
        r.errored += rec.status == "errored" ? 1 : 0;
        auto& cat = r.per_category[rec.category.empty() ? std::string(kUncategorized) : rec.category];
        ++cat.total;
        cat.correct += rec.correct ? 1 : 0;
        rounds += rec.rounds_used;
        tokens += static_cast<double>(rec.input_tokens);
        latencies.push_back(rec.latency_ms);
    }
    if (r.total > 0) {
        r.accuracy = static_cast<double>(r.correct) / r.total;
        r.mean_rounds = rounds / r.total;
        r.mean_input_tokens = tokens / r.total;
    }
    for (auto& [name, cat] : r.per_category)
        cat.accuracy = static_cast<double>(cat.correct) / cat.total;
    r.latency_p50_ms = nearest_rank(latencies, 50.0);
    r.latency_p95_ms = nearest_rank(latencies, 95.0);
    r.items = std::move(records);
    return r;
}

BenchReport run_benchmark(const std::vector<DatasetItem>& items, const SessionConfig& cfg,
                          const AgentBackends& backends, const BenchOptions& options)
{
    if (options.concurrency < 1)
        throw ConfigError("concurrency must be at least 1");
    ManifestCache cache;
    std::vector<ItemRecord> records(items.size());
    std::vector<json> traces(options.trace_dir ? items.size() : 0);

    parallel_for(items.size(), options.concurrency, [&](std::size_t i) {
        const auto& item = items[i];
        ItemRecord& rec = records[i];
        rec.id = item.id;
        rec.category = item.category;
        rec.expected = item.answer;

        VirtualClock virtual_clock;
        SessionOptions session_options;
        if (options.virtual_clock)
            session_options.clock = &virtual_clock;
        try {
            VideoMeta meta;
            meta.video_id = item.id;
            meta.duration_sec = item.duration_sec;
            meta.frame_source = item.frames;
            meta.frames = cache.get(item);
            const auto result = run_session(meta, Query::make(item.question, item.options, item.id),
                                            cfg, backends, session_options);
            rec.answer = result.answer;
            rec.correct = result.answer == item.answer;
            rec.status = std::string(to_string(result.status()));
            rec.rounds_used = result.rounds_used;
            rec.input_tokens = result.accounting.total().input_tokens;
            rec.latency_ms = session_latency(result.accounting);
            if (options.trace_dir)
                traces[i] = trace_json(result);
        } catch (const SessionError& e) {
            rec.status = "errored";
            rec.error = e.kind() + ": " + e.what();
            rec.rounds_used = e.partial().rounds_used;
            rec.input_tokens = e.partial().accounting.total().input_tokens;
            rec.latency_ms = session_latency(e.partial().accounting);
            if (options.trace_dir)
                traces[i] = trace_json(e);
        } catch (const Error& e) {
            rec.status = "errored";
            rec.error = e.what();
        } catch (const std::exception& e) {
            rec.status = "errored";
            rec.error = std::string("unexpected: ") + e.what();
        }
    });

    if (!items.empty()
        && std::all_of(records.begin(), records.end(),
                       [](const ItemRecord& r) { return r.status == "errored"; }))
        throw Error("every benchmark item failed; first error: " + records.front().error);

    if (options.trace_dir) {
        std::vector<std::size_t> order(items.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return items[a].id < items[b].id; });
        std::filesystem::create_directories(*options.trace_dir);
        for (const auto i : order) {
            if (traces[i].is_null())
                continue;
            std::ofstream out(*options.trace_dir / (items[i].id + ".json"), std::ios::trunc);
            out << traces[i].dump(2) << '\n';
        }
    }
    return summarize(std::move(records));
}

} // namespace vidscout
