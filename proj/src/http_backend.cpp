// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "vidscout/errors.hpp"
#include "vidscout/gateway.hpp"

namespace vidscout {

void to_json(json& j, const HttpBackendConfig& v)
{
    j = json{{"base_url", v.base_url},
             {"model_name", v.model_name},
             {"timeout_s", v.timeout_s},
             {"max_retries", v.max_retries},
             {"backoff_initial_s", v.backoff_initial_s},
             {"api_key_env", v.api_key_env}};
}

void from_json(const json& j, HttpBackendConfig& v)
{
    const HttpBackendConfig d;
    v.base_url = j.value("base_url", d.base_url);
    v.model_name = j.value("model_name", d.model_name);
    v.timeout_s = j.value("timeout_s", d.timeout_s);
    v.max_retries = j.value("max_retries", d.max_retries);
    v.backoff_initial_s = j.value("backoff_initial_s", d.backoff_initial_s);
    v.api_key_env = j.value("api_key_env", d.api_key_env);
}

namespace {

void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

std::chrono::milliseconds to_ms(double seconds)
{
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(seconds * 1000.0)));
}

enum class Failure { none, transport, timeout, server };

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(sleeper ? std::move(sleeper) : Sleeper(real_sleep))
{
    if (config_.max_retries < 0)
        throw ConfigError("max_retries must be non-negative");
    if (!(config_.timeout_s > 0.0))
        throw ConfigError("timeout_s must be positive");
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("base_url needs a scheme: " + config_.base_url);
    const auto path_begin = config_.base_url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) {
        scheme_host_port_ = config_.base_url;
        path_ = "/v1/chat/completions";
    } else {
        scheme_host_port_ = config_.base_url.substr(0, path_begin);
        path_ = config_.base_url.substr(path_begin);
    }
}

json HttpBackend::request_body(const BackendRequest& req) const
{
    json user_parts = json::array({{{"text", req.user_text}}});
    for (const auto& f : req.frames) {
        user_parts.push_back({{"image",
                               {{"mime_type", f.mime},
                                {"data", base64_encode(f.payload)},
                                {"timestamp_sec", f.timestamp_sec}}}});
    }
    return {{"model", config_.model_name},
            {"messages",
             json::array({{{"role", "system"}, {"parts", json::array({{{"text", req.system_text}}})}},
                          {{"role", "user"}, {"parts", std::move(user_parts)}}})},
            {"max_output_tokens", req.max_output_tokens}};
}

BackendResponse HttpBackend::parse_reply(std::string_view body)
{
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError(std::string("unparseable provider reply: ") + e.what());
    }
    BackendResponse out;
    if (j.contains("text") && j["text"].is_string()) {
        out.text = j["text"].get<std::string>();
    } else if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& msg = j["choices"][0].value("message", json::object());
        out.text = msg.value("content", std::string{});
    } else {
        throw BackendError("provider reply has no text");
    }
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        for (const char* key : {"input_tokens", "prompt_tokens"}) {
            if (u->contains(key) && (*u)[key].is_number_integer()) {
                out.usage.input_tokens = (*u)[key].get<std::int64_t>();
                break;
            }
        }
        for (const char* key : {"output_tokens", "completion_tokens"}) {
            if (u->contains(key) && (*u)[key].is_number_integer()) {
                out.usage.output_tokens = (*u)[key].get<std::int64_t>();
                break;
            }
        }
    }
    return out;
}

BackendResponse HttpBackend::send(const BackendRequest& req)
{
    validate(req);
    const std::string body = request_body(req).dump();
    const auto timeout = to_ms(config_.timeout_s);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    Failure last = Failure::none;
    std::string last_detail;
    const int attempts = 1 + config_.max_retries;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0)
            sleeper_(to_ms(config_.backoff_initial_s * std::pow(2.0, attempt - 1)));

        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path_, headers, body, "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);

        if (!res) {
            const auto err = res.error();
            // httplib reports an expired read timeout as a plain read error.
            const bool timed_out = err == httplib::Error::ConnectionTimeout
                                   || (err == httplib::Error::Read && elapsed >= timeout * 9 / 10);
            last = timed_out ? Failure::timeout : Failure::transport;
            last_detail = httplib::to_string(err);
            continue;
        }
        if (res->status >= 500) {
            last = Failure::server;
            last_detail = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400)
            throw HttpStatusError(res->status, res->body);

        auto out = parse_reply(res->body);
        out.latency_ms = elapsed.count();
        return out;
    }
    const auto summary = std::to_string(attempts) + " attempt(s) to " + config_.base_url
                         + " failed, last: " + last_detail;
    if (last == Failure::timeout)
        throw TimeoutError("request timed out after " + summary);
    throw RetriesExhausted(summary);
}

} // namespace vidscout
