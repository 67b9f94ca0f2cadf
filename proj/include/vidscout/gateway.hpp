// SPDX-License-Identifier: Apache-2.0

// Uniform interface to multimodal chat backends.
//
// The engine only ever sees BackendRequest / BackendResponse. Concrete
// backends: HttpBackend (generic chat wire shape, retries, timeouts),
// ScriptedBackend (queued or rule-matched replies), and the cassette pair
// CassetteRecorder / CassetteReplayer for deterministic record and replay.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vidscout/core.hpp"

namespace vidscout {

enum class AgentRole { planner, observer, reflector };

std::string_view to_string(AgentRole role) noexcept;
std::optional<AgentRole> parse_agent_role(std::string_view text);

struct FrameAttachment {
    std::string payload; // raw bytes
    std::string mime = "image/jpeg";
    double timestamp_sec = 0.0;
};

struct BackendRequest {
    AgentRole role = AgentRole::planner;
    std::string system_text;
    std::string user_text;
    std::vector<FrameAttachment> frames;
    std::string response_schema_hint;
    int max_output_tokens = 2048;
};

/// Throws ValidationError for empty texts or frames on a non-observer request.
void validate(const BackendRequest& req);

struct Usage {
    std::optional<std::int64_t> input_tokens;
    std::optional<std::int64_t> output_tokens;

    bool operator==(const Usage&) const = default;
};

struct BackendResponse {
    std::string text;
    Usage usage;
    std::int64_t latency_ms = 0;

    bool operator==(const BackendResponse&) const = default;
};

void to_json(json& j, const BackendResponse& v);
void from_json(const json& j, BackendResponse& v);

class Backend {
public:
    virtual ~Backend() = default;

    /// Must be safe to call from several sessions at once.
    virtual BackendResponse send(const BackendRequest& req) = 0;
};

/// Lower-case hex SHA-256 over the canonical request form:
///   {"frames":[{"mime","sha256","t"}...],"max_output_tokens","role",
///    "schema","system","user"}
/// serialized as compact JSON with sorted keys.
std::string request_digest(const BackendRequest& req);

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);

/// First balanced top-level JSON object in model text, after stripping any
/// markdown code fence. Throws MalformedOutput.
json extract_json_payload(std::string_view text);

// ---------------------------------------------------------------------------
// Clocks
// ---------------------------------------------------------------------------

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;

    /// Told about every backend response; virtual clocks advance by it.
    virtual void on_backend_latency(std::int64_t /*latency_ms*/) {}
};

class SteadyClock final : public Clock {
public:
    std::int64_t now_ms() override;
};

/// Time advances only by reported backend latencies. Used for scripted and
/// replayed sessions so traces are reproducible.
class VirtualClock final : public Clock {
public:
    std::int64_t now_ms() override { return now_; }
    void on_backend_latency(std::int64_t latency_ms) override { now_ += latency_ms; }
    void advance(std::int64_t ms) { now_ += ms; }

private:
    std::int64_t now_ = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

struct ScriptedReply {
    std::string text;
    std::int64_t latency_ms = 0;
    Usage usage;
    std::string fail; // non-empty: throw ScriptExhausted with this message instead

    static ScriptedReply of(std::string text, std::int64_t latency_ms = 0);
    static ScriptedReply failure(std::string message);
};

/// Replies per role from a FIFO queue. Rules (role + substring of the user
/// text) are checked first and are never consumed, which keeps concurrent
/// sessions deterministic.
class ScriptedBackend final : public Backend {
public:
    ScriptedBackend() = default;

    void enqueue(AgentRole role, ScriptedReply reply);
    void enqueue(AgentRole role, std::string text) { enqueue(role, ScriptedReply::of(std::move(text))); }

    void add_rule(AgentRole role, std::string needle, ScriptedReply reply);

    BackendResponse send(const BackendRequest& req) override;

    int calls(AgentRole role) const;
    std::size_t pending(AgentRole role) const;

    /// Script file: {"planner": [...], "observer": [...], "reflector": [...],
    /// "rules": [{"role", "contains", "text"}]}. Entries are strings or
    /// {"text", "latency_ms", "input_tokens", "output_tokens", "fail"}.
    static std::unique_ptr<ScriptedBackend> from_json(const json& script);
    static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

private:
    struct Rule {
        AgentRole role;
        std::string needle;
        ScriptedReply reply;
    };

    mutable std::mutex mutex_;
    std::map<AgentRole, std::deque<ScriptedReply>> queues_;
    std::map<AgentRole, int> calls_;
    std::vector<Rule> rules_;
};

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8080/v1/chat";
    std::string model_name = "default";
    double timeout_s = 120.0;
    int max_retries = 3;
    double backoff_initial_s = 1.0;
    std::string api_key_env = "VIDSCOUT_API_KEY";
};

void to_json(json& j, const HttpBackendConfig& v);
void from_json(const json& j, HttpBackendConfig& v);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// POSTs {model, messages:[{role, parts:[{text}|{image}]}], max_output_tokens}
/// to base_url. Transport failures and 5xx are retried up to max_retries
/// times with exponential backoff; 4xx fails at once.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = {});

    BackendResponse send(const BackendRequest& req) override;

    const HttpBackendConfig& config() const noexcept { return config_; }

    /// Wire body for a request; exposed for tests.
    json request_body(const BackendRequest& req) const;

    /// Pulls text and usage out of a provider reply. Accepts the generic
    /// {"text", "usage"} shape and chat-completions style "choices".
    static BackendResponse parse_reply(std::string_view body);

private:
    HttpBackendConfig config_;
    Sleeper sleeper_;
    std::string scheme_host_port_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Cassettes
// ---------------------------------------------------------------------------

/// Wraps a live backend and appends {"digest", "response"} lines to a file.
class CassetteRecorder final : public Backend {
public:
    CassetteRecorder(Backend& inner, const std::filesystem::path& path);

    BackendResponse send(const BackendRequest& req) override;

private:
    Backend& inner_;
    std::mutex mutex_;
    std::ofstream out_;
};

enum class ReplayMode {
    in_order, // the i-th request must carry the i-th recorded digest
    lookup,   // any recorded record with a matching digest, each used once
};

/// Serves recorded responses; never touches the network.
class CassetteReplayer final : public Backend {
public:
    explicit CassetteReplayer(const std::filesystem::path& path,
                              ReplayMode mode = ReplayMode::lookup);

    BackendResponse send(const BackendRequest& req) override;

    std::size_t remaining() const;

private:
    struct Record {
        std::string digest;
        BackendResponse response;
    };

    ReplayMode mode_;
    mutable std::mutex mutex_;
    std::vector<Record> records_;
    std::size_t cursor_ = 0;
    std::map<std::string, std::deque<std::size_t>> by_digest_;
    std::size_t served_ = 0;
};

} // namespace vidscout
