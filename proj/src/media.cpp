// SPDX-License-Identifier: Apache-2.0

#include "vidscout/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vidscout/errors.hpp"

namespace vidscout {

namespace {

constexpr double kGridEps = 1e-9;

std::string frame_file_name(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06zu.jpg", index);
    return buf;
}

std::string placeholder_bytes(const ManifestFrame& frame)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "placeholder-frame t=%.3f", frame.t);
    return buf;
}

} // namespace

void validate(const FrameManifest& manifest)
{
    if (!(manifest.duration_sec > 0.0))
        throw ValidationError("manifest duration must be positive");
    double prev = -1.0;
    for (const auto& f : manifest.frames) {
        if (!(f.t > prev))
            throw ValidationError("manifest timestamps must be strictly increasing");
        if (f.t < 0.0 || f.t > manifest.duration_sec)
            throw ValidationError("manifest timestamp outside [0, duration]");
        prev = f.t;
    }
}

FrameManifest load_manifest(const std::filesystem::path& path)
{
    const auto file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(file);
    if (!in)
        throw ValidationError("cannot open frame manifest: " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("invalid frame manifest " + file.string() + ": " + e.what());
    }
    FrameManifest m;
    m.root = file.parent_path();
    if (m.root.empty())
        m.root = ".";
    m.duration_sec = j.at("duration_sec").get<double>();
    for (const auto& f : j.at("frames")) {
        m.frames.push_back({f.at("t").get<double>(), f.at("file").get<std::string>(),
                            f.value("mime", std::string("image/jpeg"))});
    }
    validate(m);
    return m;
}

json manifest_to_json(const FrameManifest& manifest)
{
    json frames = json::array();
    for (const auto& f : manifest.frames)
        frames.push_back({{"t", f.t}, {"file", f.file}, {"mime", f.mime}});
    return {{"duration_sec", manifest.duration_sec}, {"frames", std::move(frames)}};
}

FrameManifest synthetic_manifest(double duration_sec, double fps)
{
    if (!(duration_sec > 0.0) || !(fps > 0.0))
        throw ValidationError("synthetic manifest needs positive duration and fps");
    FrameManifest m;
    m.duration_sec = duration_sec;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) / fps;
        if (t >= duration_sec)
            break;
        m.frames.push_back({t, frame_file_name(k), "image/jpeg"});
    }
    return m;
}

FrameManifest write_placeholder_frames(const std::filesystem::path& dir, double duration_sec,
                                       double fps)
{
    auto m = synthetic_manifest(duration_sec, fps);
    std::filesystem::create_directories(dir);
    for (const auto& f : m.frames) {
        std::ofstream out(dir / f.file, std::ios::binary);
        out << placeholder_bytes(f);
        if (!out)
            throw Error("cannot write frame file in " + dir.string());
    }
    std::ofstream out(dir / "manifest.json");
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out)
        throw Error("cannot write manifest in " + dir.string());
    m.root = dir;
    return m;
}

std::string load_frame_bytes(const FrameManifest& manifest, const ManifestFrame& frame)
{
    if (manifest.root.empty())
        return placeholder_bytes(frame);
    std::ifstream in(manifest.root / frame.file, std::ios::binary);
    if (!in)
        throw ValidationError("cannot read frame file: " + (manifest.root / frame.file).string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------

std::vector<double> sample_timestamps(std::span<const TimeRange> regions, double fps,
                                      double duration_sec)
{
    if (!(fps > 0.0))
        throw ValidationError("fps must be positive");
    std::vector<double> out;
    for (const auto& r : regions) {
        if (!(r.end > r.start))
            continue;
        const auto count = static_cast<std::int64_t>(std::floor(r.length() * fps + kGridEps));
        out.push_back(r.start);
        for (std::int64_t k = 1; k < count; ++k)
            out.push_back(r.start + static_cast<double>(k) / fps);
    }
    std::erase_if(out, [duration_sec](double t) { return t > duration_sec || t < 0.0; });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> enforce_budget(std::span<const double> timestamps, SpatialRes res,
                                   const SessionConfig& cfg)
{
    const std::int64_t available = cfg.frame_budget();
    const std::int64_t per_frame = tokens_per_frame(res);
    if (available < per_frame)
        throw BudgetTooSmall("frame budget of " + std::to_string(available)
                             + " tokens cannot hold one " + std::string(to_string(res))
                             + " frame (" + std::to_string(per_frame) + " tokens)");
    const auto n = static_cast<std::int64_t>(timestamps.size());
    if (n * per_frame <= available)
        return {timestamps.begin(), timestamps.end()};

    const std::int64_t m = available / per_frame;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m));
    if (m == 1) {
        out.push_back(timestamps.front());
        return out;
    }
    for (std::int64_t j = 0; j < m; ++j)
        out.push_back(timestamps[static_cast<std::size_t>(j * (n - 1) / (m - 1))]);
    return out;
}

std::vector<ManifestFrame> resolve_frames(const FrameManifest& manifest,
                                          std::span<const double> timestamps)
{
    if (manifest.frames.empty())
        throw ValidationError("frame manifest is empty");
    const auto& frames = manifest.frames;
    std::vector<ManifestFrame> out;
    std::vector<std::size_t> taken;
    for (double t : timestamps) {
        auto it = std::lower_bound(frames.begin(), frames.end(), t,
                                   [](const ManifestFrame& f, double v) { return f.t < v; });
        std::size_t idx;
        if (it == frames.end()) {
            idx = frames.size() - 1;
        } else if (it == frames.begin()) {
            idx = 0;
        } else {
            const auto hi = static_cast<std::size_t>(it - frames.begin());
            const std::size_t lo = hi - 1;
            idx = (t - frames[lo].t) <= (frames[hi].t - t) ? lo : hi;
        }
        if (std::find(taken.begin(), taken.end(), idx) != taken.end())
            continue;
        taken.push_back(idx);
        out.push_back(frames[idx]);
    }
    return out;
}

SampledClip build_clip(const Plan& plan, const VideoMeta& meta, const SessionConfig& cfg)
{
    SampledClip clip;
    clip.res = plan.res;
    if (plan.where == WhereMode::uniform) {
        clip.regions_covered = {TimeRange{0.0, meta.duration_sec}};
    } else {
        if (plan.regions.empty())
            throw ValidationError("region plan without regions");
        clip.regions_covered = plan.regions;
    }
    const auto grid = sample_timestamps(clip.regions_covered, plan.fps, meta.duration_sec);
    clip.timestamps = enforce_budget(grid, plan.res, cfg);
    clip.frame_token_cost =
        static_cast<std::int64_t>(clip.timestamps.size()) * tokens_per_frame(plan.res);
    return clip;
}

std::shared_ptr<const FrameManifest> open_frame_source(const std::string& source,
                                                       double duration_sec)
{
    constexpr std::string_view prefix = "synthetic:";
    if (source.starts_with(prefix)) {
        double fps = 0.0;
        try {
            fps = std::stod(source.substr(prefix.size()));
        } catch (const std::exception&) {
            throw ValidationError("bad synthetic frame source: " + source);
        }
        return std::make_shared<const FrameManifest>(synthetic_manifest(duration_sec, fps));
    }
    return std::make_shared<const FrameManifest>(load_manifest(source));
}

} // namespace vidscout
