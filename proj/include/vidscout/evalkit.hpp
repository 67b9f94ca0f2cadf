// SPDX-License-Identifier: Apache-2.0

// Benchmark harness: JSONL dataset ingestion, bounded-parallel session
// execution and multiple-choice accuracy reports.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vidscout/agents.hpp"
#include "vidscout/core.hpp"
#include "vidscout/session.hpp"

namespace vidscout {

struct DatasetItem {
    std::string id;
    std::string frames; // resolved manifest path, or "synthetic:<fps>"
    double duration_sec = 0.0;
    std::string question;
    std::vector<std::string> options;
    std::string answer; // option letter
    std::string category;
    bool operator==(const DatasetItem&) const = default;
};

/// Throws ValidationError unless the item is well formed and the answer
/// names one of its option letters.
void validate(const DatasetItem& item);

struct DatasetReject {
    std::size_t line = 0; // 1-based
    std::string reason;
};

struct Dataset {
    std::vector<DatasetItem> items;
    std::vector<DatasetReject> rejects;
};

/// One JSON object per line:
///   {"id", "frames", "duration_sec", "question", "options", "answer", "category"?}
/// Relative frame paths resolve against the dataset's directory. Blank lines
/// are skipped. Throws DatasetError when the file is unreadable or no line
/// is valid.
Dataset load_dataset(const std::filesystem::path& path);

struct ItemRecord {
    std::string id;
    std::string category;
    std::string expected;
    std::string answer;
    bool correct = false;
    std::string status; // answered | degraded | errored
    std::string error;
    int rounds_used = 0;
    std::int64_t input_tokens = 0;
    std::int64_t latency_ms = 0;
};

struct CategoryScore {
    int correct = 0;
    int total = 0;
    double accuracy = 0.0;
};

struct BenchReport {
    int total = 0;
    int correct = 0;
    int errored = 0;
    double accuracy = 0.0;
    std::map<std::string, CategoryScore> per_category;
    double mean_rounds = 0.0;
    double mean_input_tokens = 0.0;
    std::int64_t latency_p50_ms = 0;
    std::int64_t latency_p95_ms = 0;
    std::vector<ItemRecord> items; // sorted by id
};

void to_json(json& j, const ItemRecord& v);
void to_json(json& j, const CategoryScore& v);
void to_json(json& j, const BenchReport& v);

/// Category used for items without one.
inline constexpr std::string_view kUncategorized = "uncategorized";

struct BenchOptions {
    int concurrency = 1;
    bool virtual_clock = true; // per-session clock driven by backend latencies
    std::optional<std::filesystem::path> trace_dir; // one <id>.json per item
};

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample.
std::int64_t nearest_rank(std::vector<std::int64_t> values, double p);

/// Aggregates per-item records into a report. Records are sorted by id.
BenchReport summarize(std::vector<ItemRecord> records);

/// Per-item failures are scored incorrect and recorded. Throws Error only
/// when every item fails.
BenchReport run_benchmark(const std::vector<DatasetItem>& items, const SessionConfig& cfg,
                          const AgentBackends& backends, const BenchOptions& options = {});

} // namespace vidscout
