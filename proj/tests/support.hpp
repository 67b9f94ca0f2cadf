// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vidscout/core.hpp"
#include "vidscout/gateway.hpp"
#include "vidscout/media.hpp"

namespace vidscout::testing {

inline std::filesystem::path data_dir() { return VIDSCOUT_TEST_DATA; }

inline std::filesystem::path cli_path() { return VIDSCOUT_CLI; }

class TempDir {
public:
    TempDir()
    {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path()
                / ("vidscout-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

// Reply texts in the shapes the agents expect.

inline std::string planner_text(const std::string& where, double fps, const std::string& res,
                                const std::vector<TimeRange>& regions = {})
{
    json r = json::array();
    for (const auto& g : regions)
        r.push_back({g.start, g.end});
    return json{{"reasoning", "scripted"},
                {"plans",
                 {{"what", "look"},
                  {"where", where},
                  {"fps", fps},
                  {"spatial_token_rate", res},
                  {"regions", r}}}}
        .dump();
}

struct RawEvidence {
    double start;
    double end;
    std::string description;
};

inline std::string observer_text(const std::vector<RawEvidence>& items)
{
    json ev = json::array();
    for (const auto& e : items)
        ev.push_back({{"timestamp_start", e.start},
                      {"timestamp_end", e.end},
                      {"description", e.description}});
    return json{{"detailed_response", "scripted"}, {"key_evidence", ev}, {"reasoning", "scripted"}}
        .dump();
}

inline std::string reflector_text(double confidence, const std::string& justification)
{
    return json{{"sufficient", confidence >= 0.7},
                {"confidence", confidence},
                {"justification", justification},
                {"reasoning", "scripted"}}
        .dump();
}

inline Query golden_query()
{
    return Query::make("Where in the frame does the lighthouse first appear?",
                       {"In the center foreground", "On the right edge by the pier",
                        "Behind the moored boats at the bottom",
                        "On the headland in the upper-left background"},
                       "harbor");
}

inline VideoMeta synthetic_video(double duration, double fps, std::string id = "video")
{
    VideoMeta meta;
    meta.video_id = std::move(id);
    meta.duration_sec = duration;
    meta.frame_source = "synthetic:" + json(fps).dump();
    meta.frames = std::make_shared<const FrameManifest>(synthetic_manifest(duration, fps));
    return meta;
}

} // namespace vidscout::testing
