// SPDX-License-Identifier: Apache-2.0

#include "vidscout/gateway.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "vidscout/errors.hpp"

namespace vidscout {

std::string_view to_string(AgentRole role) noexcept
{
    switch (role) {
    case AgentRole::planner: return "planner";
    case AgentRole::observer: return "observer";
    case AgentRole::reflector: break;
    }
    return "reflector";
}

std::optional<AgentRole> parse_agent_role(std::string_view text)
{
    if (text == "planner")
        return AgentRole::planner;
    if (text == "observer")
        return AgentRole::observer;
    if (text == "reflector")
        return AgentRole::reflector;
    return std::nullopt;
}

void validate(const BackendRequest& req)
{
    if (req.system_text.empty() || req.user_text.empty())
        throw ValidationError("backend request texts must be non-empty");
    if (req.role != AgentRole::observer && !req.frames.empty())
        throw ValidationError("only observer requests may carry frames");
}

void to_json(json& j, const BackendResponse& v)
{
    j = json{{"text", v.text},
             {"usage",
              {{"input_tokens", v.usage.input_tokens ? json(*v.usage.input_tokens) : json()},
               {"output_tokens", v.usage.output_tokens ? json(*v.usage.output_tokens) : json()}}},
             {"latency_ms", v.latency_ms}};
}

void from_json(const json& j, BackendResponse& v)
{
    v.text = j.at("text").get<std::string>();
    v.latency_ms = j.value("latency_ms", std::int64_t{0});
    v.usage = {};
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        if (auto it = u->find("input_tokens"); it != u->end() && it->is_number_integer())
            v.usage.input_tokens = it->get<std::int64_t>();
        if (auto it = u->find("output_tokens"); it != u->end() && it->is_number_integer())
            v.usage.output_tokens = it->get<std::int64_t>();
    }
}

// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0x0f]);
    }
    return out;
}

std::string base64_encode(std::string_view bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string request_digest(const BackendRequest& req)
{
    json frames = json::array();
    for (const auto& f : req.frames)
        frames.push_back({{"t", f.timestamp_sec}, {"mime", f.mime}, {"sha256", sha256_hex(f.payload)}});
    const json canonical = {{"role", std::string(to_string(req.role))},
                            {"system", req.system_text},
                            {"user", req.user_text},
                            {"frames", std::move(frames)},
                            {"schema", req.response_schema_hint},
                            {"max_output_tokens", req.max_output_tokens}};
    return sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------

namespace {

// Position of the next ``` that starts a line (leading blanks allowed).
std::size_t fence_at_line_start(std::string_view text, std::size_t from)
{
    for (auto pos = text.find("```", from); pos != std::string_view::npos;
         pos = text.find("```", pos + 1)) {
        const auto line = text.find_last_of('\n', pos == 0 ? 0 : pos - 1);
        const auto begin = (pos == 0 || line == std::string_view::npos) ? 0 : line + 1;
        if (text.substr(begin, pos - begin).find_first_not_of(" \t") == std::string_view::npos)
            return pos;
    }
    return std::string_view::npos;
}

// Contents of the first ``` fence, without its info string; the whole text
// when there is no complete fence.
std::string_view strip_code_fence(std::string_view text)
{
    const auto open = fence_at_line_start(text, 0);
    if (open == std::string_view::npos)
        return text;
    const auto line_end = text.find('\n', open + 3);
    if (line_end == std::string_view::npos)
        return text;
    const auto close = fence_at_line_start(text, line_end + 1);
    if (close == std::string_view::npos)
        return text;
    return text.substr(line_end + 1, close - line_end - 1);
}

// End index (exclusive) of the balanced object starting at `open`, honoring
// string literals and escapes.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open)
{
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return i + 1;
    }
    return std::nullopt;
}

} // namespace

namespace {

std::optional<json> first_object(std::string_view body)
{
    for (std::size_t open = body.find('{'); open != std::string_view::npos;
         open = body.find('{', open + 1)) {
        const auto end = balanced_end(body, open);
        if (!end)
            continue;
        try {
            return json::parse(body.substr(open, *end - open));
        } catch (const json::parse_error& e) {
            throw MalformedOutput(std::string("model output is not valid JSON: ") + e.what());
        }
    }
    return std::nullopt;
}

} // namespace

json extract_json_payload(std::string_view text)
{
    const auto body = strip_code_fence(text);
    if (body.size() != text.size()) {
        // A fence marker may sit inside a JSON string; fall back to the raw text.
        try {
            if (auto j = first_object(body))
                return *j;
        } catch (const MalformedOutput&) {
        }
    }
    if (auto j = first_object(text))
        return *j;
    throw MalformedOutput("model output contains no JSON object");
}

// ---------------------------------------------------------------------------

std::int64_t SteadyClock::now_ms()
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---------------------------------------------------------------------------

ScriptedReply ScriptedReply::of(std::string text, std::int64_t latency_ms)
{
    ScriptedReply r;
    r.text = std::move(text);
    r.latency_ms = latency_ms;
    return r;
}

ScriptedReply ScriptedReply::failure(std::string message)
{
    ScriptedReply r;
    r.fail = std::move(message);
    return r;
}

void ScriptedBackend::enqueue(AgentRole role, ScriptedReply reply)
{
    std::lock_guard lock(mutex_);
    queues_[role].push_back(std::move(reply));
}

void ScriptedBackend::add_rule(AgentRole role, std::string needle, ScriptedReply reply)
{
    std::lock_guard lock(mutex_);
    rules_.push_back({role, std::move(needle), std::move(reply)});
}

BackendResponse ScriptedBackend::send(const BackendRequest& req)
{
    validate(req);
    ScriptedReply reply;
    {
        std::lock_guard lock(mutex_);
        ++calls_[req.role];
        bool matched = false;
        for (const auto& rule : rules_) {
            if (rule.role == req.role && req.user_text.find(rule.needle) != std::string::npos) {
                reply = rule.reply;
                matched = true;
                break;
            }
        }
        if (!matched) {
            auto& q = queues_[req.role];
            if (q.empty())
                throw ScriptExhausted("no scripted reply left for role "
                                      + std::string(to_string(req.role)));
            reply = std::move(q.front());
            q.pop_front();
        }
    }
    if (!reply.fail.empty())
        throw ScriptExhausted(reply.fail);
    return BackendResponse{reply.text, reply.usage, reply.latency_ms};
}

int ScriptedBackend::calls(AgentRole role) const
{
    std::lock_guard lock(mutex_);
    auto it = calls_.find(role);
    return it == calls_.end() ? 0 : it->second;
}

std::size_t ScriptedBackend::pending(AgentRole role) const
{
    std::lock_guard lock(mutex_);
    auto it = queues_.find(role);
    return it == queues_.end() ? 0 : it->second.size();
}

namespace {

ScriptedReply reply_from_json(const json& j)
{
    if (j.is_string())
        return ScriptedReply::of(j.get<std::string>());
    ScriptedReply r;
    r.text = j.value("text", std::string{});
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
    if (j.contains("input_tokens"))
        r.usage.input_tokens = j.at("input_tokens").get<std::int64_t>();
    if (j.contains("output_tokens"))
        r.usage.output_tokens = j.at("output_tokens").get<std::int64_t>();
    r.fail = j.value("fail", std::string{});
    return r;
}

} // namespace

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script)
{
    auto backend = std::make_unique<ScriptedBackend>();
    for (auto role : {AgentRole::planner, AgentRole::observer, AgentRole::reflector}) {
        const auto key = std::string(to_string(role));
        if (!script.contains(key))
            continue;
        for (const auto& entry : script.at(key))
            backend->enqueue(role, reply_from_json(entry));
    }
    if (script.contains("rules")) {
        for (const auto& rule : script.at("rules")) {
            const auto role = parse_agent_role(rule.at("role").get<std::string>());
            if (!role)
                throw ValidationError("unknown role in script rule: " + rule.at("role").dump());
            backend->add_rule(*role, rule.value("contains", std::string{}), reply_from_json(rule));
        }
    }
    return backend;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open script file: " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ValidationError("invalid script file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

CassetteRecorder::CassetteRecorder(Backend& inner, const std::filesystem::path& path)
    : inner_(inner), out_(path, std::ios::app)
{
    if (!out_)
        throw Error("cannot open cassette for writing: " + path.string());
}

BackendResponse CassetteRecorder::send(const BackendRequest& req)
{
    const auto digest = request_digest(req);
    auto response = inner_.send(req);
    const json line = {{"digest", digest}, {"response", response}};
    std::lock_guard lock(mutex_);
    out_ << line.dump() << '\n';
    out_.flush();
    return response;
}

CassetteReplayer::CassetteReplayer(const std::filesystem::path& path, ReplayMode mode)
    : mode_(mode)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open cassette: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = json::parse(line);
            records_.push_back({j.at("digest").get<std::string>(),
                                j.at("response").get<BackendResponse>()});
        } catch (const json::exception& e) {
            throw ValidationError("bad cassette line " + std::to_string(line_no) + ": " + e.what());
        }
        by_digest_[records_.back().digest].push_back(records_.size() - 1);
    }
}

BackendResponse CassetteReplayer::send(const BackendRequest& req)
{
    const auto digest = request_digest(req);
    std::lock_guard lock(mutex_);
    if (mode_ == ReplayMode::in_order) {
        if (cursor_ >= records_.size())
            throw ReplayMiss("cassette exhausted at request " + std::to_string(cursor_ + 1));
        if (records_[cursor_].digest != digest)
            throw ReplayMiss("request " + std::to_string(cursor_ + 1) + " digest " + digest
                             + " does not match recorded " + records_[cursor_].digest);
        ++served_;
        return records_[cursor_++].response;
    }
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end() || it->second.empty())
        throw ReplayMiss("no recorded response for digest " + digest);
    const auto idx = it->second.front();
    it->second.pop_front();
    ++served_;
    return records_[idx].response;
}

std::size_t CassetteReplayer::remaining() const
{
    std::lock_guard lock(mutex_);
    return records_.size() - served_;
}

} // namespace vidscout
