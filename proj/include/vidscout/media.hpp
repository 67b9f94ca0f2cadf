// SPDX-License-Identifier: Apache-2.0

// Turns a plan into the concrete frames sent to an observer: grid sampling
// over the plan's regions, token costing, uniform downsampling to the frame
// budget, and nearest-frame lookup against a frame manifest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vidscout/core.hpp"

namespace vidscout {

struct ManifestFrame {
    double t = 0.0;
    std::string file; // relative to the manifest directory
    std::string mime = "image/jpeg";

    bool operator==(const ManifestFrame&) const = default;
};

/// Frames pre-extracted from a video. An empty `root` marks a synthetic
/// manifest whose payloads are generated placeholders.
struct FrameManifest {
    double duration_sec = 0.0;
    std::vector<ManifestFrame> frames;
    std::filesystem::path root;
};

/// Throws ValidationError unless timestamps are strictly increasing and lie
/// in [0, duration].
void validate(const FrameManifest& manifest);

/// Reads `manifest.json` from `path` (a directory or the file itself).
FrameManifest load_manifest(const std::filesystem::path& path);

json manifest_to_json(const FrameManifest& manifest);

/// In-memory placeholder manifest with frames every 1/fps seconds.
FrameManifest synthetic_manifest(double duration_sec, double fps);

/// Writes placeholder frame files plus `manifest.json` into `dir`.
FrameManifest write_placeholder_frames(const std::filesystem::path& dir, double duration_sec,
                                       double fps);

/// Frames named by a source string: "synthetic:<fps>" builds a placeholder
/// manifest over `duration_sec`; anything else is a manifest path.
std::shared_ptr<const FrameManifest> open_frame_source(const std::string& source,
                                                       double duration_sec);

/// Raw bytes for one frame: the file contents, or a deterministic
/// placeholder for synthetic manifests.
std::string load_frame_bytes(const FrameManifest& manifest, const ManifestFrame& frame);

struct SampledClip {
    std::vector<double> timestamps;
    SpatialRes res = SpatialRes::low;
    std::int64_t frame_token_cost = 0;
    std::vector<TimeRange> regions_covered;
};

/// Start-inclusive, end-exclusive grid at `fps` over each region, at least
/// one timestamp per non-empty region, merged sorted and deduplicated.
std::vector<double> sample_timestamps(std::span<const TimeRange> regions, double fps,
                                      double duration_sec);

/// Keeps at most floor(frame_budget / tokens_per_frame) timestamps, picked
/// at evenly spaced indices with both endpoints retained.
std::vector<double> enforce_budget(std::span<const double> timestamps, SpatialRes res,
                                   const SessionConfig& cfg);

/// Nearest manifest frame per timestamp (ties go to the earlier frame),
/// duplicates collapsed, request order preserved.
std::vector<ManifestFrame> resolve_frames(const FrameManifest& manifest,
                                          std::span<const double> timestamps);

SampledClip build_clip(const Plan& plan, const VideoMeta& meta, const SessionConfig& cfg);

} // namespace vidscout
