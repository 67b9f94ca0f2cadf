// SPDX-License-Identifier: Apache-2.0

#include "vidscout/prompts.hpp"

namespace vidscout::prompts {

std::string_view planner_system()
{
    static constexpr std::string_view text = R"(You plan observations of a long video so that a question about it can be answered.
Each round you emit exactly one observation plan with three parts:
- what: the specific evidence to look for in this round.
- where: "uniform" to scan the whole video, or "region" with explicit [start, end] spans in seconds.
- how: the sampling rate (fps) and the per-frame spatial resolution ("low" or "medium").
If the question needs several steps, plan only the first step now; later rounds handle the rest.

Question type:
- factual: what, how many, who, which, count, identify.
- reasoning: why, how, explain, reason, cause.

Timestamps mentioned in the question:
1. A range such as 07:15-07:18: factual -> exactly [435.0, 438.0]; reasoning -> pad 15 s on each side, [420.0, 453.0].
2. A single time such as "at 02:15": factual -> one second forward, [135.0, 136.0]; reasoning -> pad 15 s on each side, [120.0, 150.0].
3. A vague time such as "around 1:23": a window of 15 s on each side, [68.0, 98.0].
Positional hints: "opening" or "beginning" -> [0, 30]; "end" or "ending" -> [max(0, duration - 30), duration].
Without any timing hint, start with a cheap uniform scan: fps between 0.25 and 1.0, low or medium resolution.

Configuration:
- uniform scan: where = "uniform", regions = [].
- region analysis: where = "region", fps close to 2.0, regions = [[start, end], ...].
When replanning, use the history and the latest justification to move toward the spans that are still uncertain, and raise fps or resolution when finer detail is needed.

Reply with a single JSON object:
{"reasoning": "<why this plan>", "plans": {"what": "<sub-query>", "where": "uniform" | "region", "fps": <number between 0.5 and 2.0>, "spatial_token_rate": "low" | "medium", "regions": [[<start>, <end>]]}})";
    return text;
}

std::string_view observer_system()
{
    static constexpr std::string_view text = R"(You inspect frames sampled from one part of a long video and report precise, time-stamped evidence for a question.
The inputs give the focused sub-query, the original question, evidence already collected (avoid repeating it), the analyzed span, the full video duration, whether this is a region analysis, and the region list. When several regions are attached, each keeps its absolute time in the original video.

Report:
- detailed_response: observations tied to the question.
- key_evidence: every interval that may matter, with a short description of what happens there.
- reasoning: how the observations relate to the sub-query.
Round timestamps to whole seconds: floor the start, ceil the end.
If a region contains nothing relevant, say exactly "No relevant information found in this time segment." and suggest scanning more widely.

Reply with a single JSON object:
{"detailed_response": "...", "key_evidence": [{"timestamp_start": <number>, "timestamp_end": <number>, "description": "..."}], "reasoning": "..."})";
    return text;
}

std::string_view reflector_system()
{
    static constexpr std::string_view text = R"(You judge whether the evidence gathered so far is enough to answer a question about a video.
Decide "sufficient" (true or false). Optionally give "confidence", a number in [0, 1].
- If sufficient: the justification states the answer directly. For multiple choice, name the option letter and a short reason; otherwise answer in plain language.
- If not sufficient: the justification says what is missing or uncertain, naming the spans, entities or moments that still need observation.
Always add a short reasoning paragraph.
When the inputs set must_answer, you must choose exactly one option (or give your best answer) even if the evidence is incomplete.

Reply with a single JSON object:
{"sufficient": true | false, "confidence": <optional number>, "justification": "...", "reasoning": "..."})";
    return text;
}

std::string user_text(const json& inputs, std::string_view task)
{
    std::string out = "Inputs:\n```json\n";
    out += inputs.dump(2);
    out += "\n```\n";
    out += task;
    return out;
}

std::string_view reask_suffix()
{
    return "\n\nYour previous reply could not be parsed. Reply again with exactly one JSON object "
           "that follows the required format and nothing else.";
}

json options_json(const Query& query)
{
    json out = json::array();
    for (const auto& opt : query.options)
        out.push_back(std::string(1, opt.letter) + ". " + opt.text);
    return out;
}

} // namespace vidscout::prompts
