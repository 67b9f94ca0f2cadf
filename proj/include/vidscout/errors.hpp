// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vidscout {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected SessionConfig.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A domain invariant was violated by caller-supplied data.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The token budget minus the text reserve cannot hold even one frame.
class BudgetTooSmall : public Error {
public:
    using Error::Error;
};

/// Model text did not contain a usable JSON object.
class MalformedOutput : public Error {
public:
    using Error::Error;
};

class PlannerFailure : public Error {
public:
    using Error::Error;
};

class ExtractionFailure : public Error {
public:
    using Error::Error;
};

class DatasetError : public Error {
public:
    using Error::Error;
};

// Backend failures. Each kind is its own type so callers can tell them apart.

class BackendError : public Error {
public:
    using Error::Error;
};

class RetriesExhausted : public BackendError {
public:
    using BackendError::BackendError;
};

class TimeoutError : public BackendError {
public:
    using BackendError::BackendError;
};

class ReplayMiss : public BackendError {
public:
    using BackendError::BackendError;
};

/// Non-retryable HTTP status (4xx).
class HttpStatusError : public BackendError {
public:
    HttpStatusError(int status, const std::string& body)
        : BackendError("http status " + std::to_string(status) + ": " + body), status_(status)
    {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

/// A scripted backend ran out of queued replies, or a scripted failure fired.
class ScriptExhausted : public BackendError {
public:
    using BackendError::BackendError;
};

} // namespace vidscout
