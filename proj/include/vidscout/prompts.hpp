// SPDX-License-Identifier: Apache-2.0

// Prompt templates for the three agents. The user text of every request
// starts with a fenced JSON block of structured inputs, so simulated
// backends (and humans reading traces) can recover them verbatim.

#pragma once

#include <string>
#include <string_view>

#include "vidscout/core.hpp"

namespace vidscout::prompts {

inline constexpr std::string_view kVersion = "vidscout-prompts/1";

std::string_view planner_system();
std::string_view observer_system();
std::string_view reflector_system();

/// "Inputs:" + fenced JSON + a one-line task statement.
std::string user_text(const json& inputs, std::string_view task);

/// Appended to the user text when a reply could not be parsed.
std::string_view reask_suffix();

json options_json(const Query& query);

} // namespace vidscout::prompts
