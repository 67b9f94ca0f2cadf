// SPDX-License-Identifier: Apache-2.0

// Synthetic long-video worlds and simulated agent backends.
//
// A world is a list of timed events. Each event becomes visible only when
// sampled densely and sharply enough; some also leave a cheap coarse cue
// that localizes them to within 10 s. The simulated planner, observer and
// reflector read the structured inputs block of each request, so a whole
// session runs through the real engine with no model behind it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vidscout/agents.hpp"
#include "vidscout/core.hpp"
#include "vidscout/gateway.hpp"

namespace vidscout {

struct SimEvent {
    TimeRange interval;
    std::string label;
    std::string description;
    double min_fps = 0.5;
    SpatialRes min_res = SpatialRes::low;
    bool coarse_hint = false;
    bool operator==(const SimEvent&) const = default;
};

struct SimWorld {
    double duration_sec = 0.0;
    std::vector<SimEvent> events;
    std::string target_label; // empty when the world has no target
    std::map<std::string, char> option_map; // label -> option letter
    std::string question;
    std::uint64_t seed = 0;

    bool solvable() const noexcept { return !target_label.empty(); }
    /// Letter mapped to the target, or 0 for an unsolvable world.
    char answer_letter() const;
    const SimEvent* target() const;
    bool operator==(const SimWorld&) const = default;
};

/// Throws ValidationError on bad intervals, duplicate labels, or a target
/// label that does not name exactly one event.
void validate(const SimWorld& world);

void to_json(json& j, const SimEvent& v);
void from_json(const json& j, SimEvent& v);
void to_json(json& j, const SimWorld& v);
void from_json(const json& j, SimWorld& v);

SimWorld load_world(const std::filesystem::path& path);
void save_world(const SimWorld& world, const std::filesystem::path& path);

struct WorldParams {
    double min_duration_sec = 600.0;
    double max_duration_sec = 3600.0;
    int event_count = 4; // 0 gives a world without a target
    double hint_probability = 0.75;
    double short_target_probability = 0.15; // sub-second-scale target, never hinted
    double min_event_sec = 3.0;
    double max_event_sec = 15.0;
};

/// Deterministic in (seed, params).
SimWorld generate_world(std::uint64_t seed, const WorldParams& params = {});

/// Timestamps of the sampled frames decide visibility: a full item when a
/// timestamp falls in the event and the plan is dense and sharp enough, a
/// widened "possible <label>" item for a hinted event otherwise.
ObservationResult sim_observe(const SimWorld& world, const Plan& plan,
                              std::span<const double> timestamps);

/// 1.0 with the mapped letter when full target evidence exists, 0.4 when
/// only a target hint exists, 0.1 otherwise.
Reflection sim_reflect(const SimWorld& world, std::span<const EvidenceItem> ledger);

/// Final-round guess: the target letter when seen, else the letter of the
/// first hinted label, else "A".
std::string sim_forced_answer(const SimWorld& world, std::span<const EvidenceItem> ledger);

/// Round 1 scans uniformly at 0.5 fps, low. Later rounds visit every hint
/// padded by 5 s at 2 fps, medium, or rescan uniformly at 1 fps, medium
/// when nothing was hinted.
Plan sim_plan(const SimWorld& world, std::span<const HistoryEntry> history, int round);

/// Query and video for a world; the video uses a 4 fps synthetic manifest.
Query sim_query(const SimWorld& world);
VideoMeta sim_video(const SimWorld& world);

inline constexpr double kSimManifestFps = 4.0;
inline constexpr double kSimHintPadSec = 10.0;
inline constexpr double kSimRegionPadSec = 5.0;

/// Plays all three roles for one world by reading the inputs block of each
/// request. Stateless, so any number of sessions may share it.
class SimBackend final : public Backend {
public:
    explicit SimBackend(const SimWorld& world) : world_(world) {}
    BackendResponse send(const BackendRequest& req) override;

private:
    const SimWorld& world_;
};

struct SimRecord {
    std::uint64_t seed = 0;
    bool solvable = false;
    bool hinted_target = false;
    std::string expected;
    std::string answer;
    bool correct = false;
    int rounds_used = 0;
    HaltReason halted_by = HaltReason::confidence;
    std::string error;
};

struct SimSuiteReport {
    int max_rounds = 0;
    int worlds = 0;
    int solvable = 0;
    int solved = 0;
    int forced = 0;
    int errors = 0;
    std::map<int, int> rounds_histogram; // rounds used -> sessions
    std::vector<SimRecord> records;      // ordered by seed
};

void to_json(json& j, const SimRecord& v);
void to_json(json& j, const SimSuiteReport& v);

SimSuiteReport run_sim_suite(const std::vector<std::uint64_t>& seeds, const WorldParams& params,
                             const SessionConfig& cfg, int concurrency = 1);

} // namespace vidscout
