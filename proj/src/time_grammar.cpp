// SPDX-License-Identifier: Apache-2.0

#include "vidscout/time_grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>

namespace vidscout {

std::string_view to_string(CueKind kind) noexcept
{
    switch (kind) {
    case CueKind::exact_range: return "exact_range";
    case CueKind::single_timestamp: return "single_timestamp";
    case CueKind::approximate: return "approximate";
    case CueKind::positional_open: return "positional_open";
    case CueKind::positional_end: return "positional_end";
    case CueKind::none: break;
    }
    return "none";
}

std::string_view to_string(QueryClass cls) noexcept
{
    return cls == QueryClass::factual ? "factual" : "reasoning";
}

namespace {

struct Token {
    enum class Kind { time, number, word, dash };
    Kind kind;
    double value = 0.0;
    std::string word;
    std::size_t begin = 0;
    std::size_t end = 0;

    bool is(std::string_view w) const { return kind == Kind::word && word == w; }
    bool is_time_value() const { return kind == Kind::time || kind == Kind::number; }
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::size_t read_digits(std::string_view s, std::size_t i, long& value)
{
    value = 0;
    while (i < s.size() && is_digit(s[i])) {
        value = value * 10 + (s[i] - '0');
        if (value > 1'000'000)
            value = 1'000'000;
        ++i;
    }
    return i;
}

bool two_digits_at(std::string_view s, std::size_t i)
{
    return i + 1 < s.size() && is_digit(s[i]) && is_digit(s[i + 1])
           && (i + 2 >= s.size() || !is_digit(s[i + 2]));
}

std::vector<Token> lex(std::string_view s)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (is_digit(c)) {
            const std::size_t begin = i;
            long first = 0;
            i = read_digits(s, i, first);
            if (i < s.size() && s[i] == ':' && two_digits_at(s, i + 1)) {
                const long second = (s[i + 1] - '0') * 10 + (s[i + 2] - '0');
                i += 3;
                if (i < s.size() && s[i] == ':' && two_digits_at(s, i + 1)) {
                    const long third = (s[i + 1] - '0') * 10 + (s[i + 2] - '0');
                    i += 3;
                    if (second < 60 && third < 60)
                        out.push_back({Token::Kind::time,
                                       static_cast<double>(first * 3600 + second * 60 + third),
                                       {}, begin, i});
                } else if (second < 60) {
                    out.push_back({Token::Kind::time, static_cast<double>(first * 60 + second), {},
                                   begin, i});
                }
                continue;
            }
            double value = static_cast<double>(first);
            if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
                double scale = 0.1;
                ++i;
                while (i < s.size() && is_digit(s[i])) {
                    value += scale * (s[i] - '0');
                    scale /= 10.0;
                    ++i;
                }
            }
            out.push_back({Token::Kind::number, value, {}, begin, i});
            continue;
        }
        if (is_alpha(c)) {
            const std::size_t begin = i;
            std::string word;
            while (i < s.size() && (is_alpha(s[i]) || s[i] == '\'')) {
                word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
                ++i;
            }
            out.push_back({Token::Kind::word, 0.0, std::move(word), begin, i});
            continue;
        }
        if (c == '-') {
            out.push_back({Token::Kind::dash, 0.0, {}, i, i + 1});
            ++i;
            continue;
        }
        // U+2013 EN DASH, U+2014 EM DASH
        if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < s.size()
            && static_cast<unsigned char>(s[i + 1]) == 0x80
            && (static_cast<unsigned char>(s[i + 2]) == 0x93
                || static_cast<unsigned char>(s[i + 2]) == 0x94)) {
            out.push_back({Token::Kind::dash, 0.0, {}, i, i + 3});
            i += 3;
            continue;
        }
        if (c == '~') {
            out.push_back({Token::Kind::word, 0.0, "~", i, i + 1});
            ++i;
            continue;
        }
        ++i;
    }
    return out;
}

class CueParser {
public:
    explicit CueParser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    std::vector<TimeCue> run()
    {
        std::vector<TimeCue> cues;
        while (pos_ < toks_.size()) {
            if (auto cue = parse_at_position())
                cues.push_back(std::move(*cue));
            else
                ++pos_;
        }
        return cues;
    }

private:
    const Token* peek(std::size_t offset = 0) const
    {
        return pos_ + offset < toks_.size() ? &toks_[pos_ + offset] : nullptr;
    }

    static bool is_approx_word(const Token& t)
    {
        return t.is("around") || t.is("about") || t.is("approximately") || t.is("roughly")
               || t.is("circa") || t.is("~");
    }

    static bool is_point_word(const Token& t) { return t.is("at"); }
    static bool is_range_opener(const Token& t) { return t.is("from"); }

    // Reads a time value at pos_ + offset, folding a trailing unit word into
    // the value for bare numbers. Returns the value and the number of tokens.
    std::optional<std::pair<double, std::size_t>> time_value(std::size_t offset,
                                                             bool allow_number) const
    {
        const Token* t = peek(offset);
        if (!t)
            return std::nullopt;
        if (t->kind == Token::Kind::time)
            return std::pair{t->value, std::size_t{1}};
        if (t->kind != Token::Kind::number || !allow_number)
            return std::nullopt;
        if (const Token* unit = peek(offset + 1); unit && unit->kind == Token::Kind::word) {
            static constexpr std::array<std::string_view, 4> minutes = {"minute", "minutes", "min",
                                                                        "mins"};
            static constexpr std::array<std::string_view, 3> hours = {"hour", "hours", "hr"};
            static constexpr std::array<std::string_view, 5> seconds = {"second", "seconds", "sec",
                                                                        "secs", "s"};
            if (std::find(minutes.begin(), minutes.end(), unit->word) != minutes.end())
                return std::pair{t->value * 60.0, std::size_t{2}};
            if (std::find(hours.begin(), hours.end(), unit->word) != hours.end())
                return std::pair{t->value * 3600.0, std::size_t{2}};
            if (std::find(seconds.begin(), seconds.end(), unit->word) != seconds.end())
                return std::pair{t->value, std::size_t{2}};
        }
        return std::pair{t->value, std::size_t{1}};
    }

    bool is_range_separator(std::size_t offset) const
    {
        const Token* t = peek(offset);
        return t && (t->kind == Token::Kind::dash || t->is("to"));
    }

    TimeCue make_range(double a, double b, std::size_t begin, std::size_t end) const
    {
        if (a > b)
            std::swap(a, b);
        if (a == b)
            return TimeCue{CueKind::single_timestamp, {a}, begin, end};
        return TimeCue{CueKind::exact_range, {a, b}, begin, end};
    }

    // Tries "<t> (-|to) <t>" starting at offset. Numbers are accepted on
    // either side only when `allow_number` is set.
    std::optional<TimeCue> range_at(std::size_t offset, bool allow_number)
    {
        auto first = time_value(offset, allow_number);
        if (!first)
            return std::nullopt;
        const std::size_t sep = offset + first->second;
        if (!is_range_separator(sep))
            return std::nullopt;
        auto second = time_value(sep + 1, allow_number);
        if (!second)
            return std::nullopt;
        const std::size_t last = sep + 1 + second->second - 1;
        TimeCue cue = make_range(first->first, second->first, peek(0)->begin, peek(last)->end);
        pos_ += last + 1;
        return cue;
    }

    std::optional<TimeCue> parse_at_position()
    {
        const Token& t = *peek();
        const std::size_t begin = t.begin;

        if (is_approx_word(t)) {
            // "about 5 people" is not a time; bare numbers need a unit here.
            auto v = time_value(1, true);
            if (v && (peek(1)->kind == Token::Kind::time || v->second == 2)) {
                const std::size_t last = v->second;
                TimeCue cue{CueKind::approximate, {v->first}, begin, peek(last)->end};
                pos_ += last + 1;
                return cue;
            }
            return std::nullopt;
        }

        if (t.is("between")) {
            auto a = time_value(1, true);
            if (a && peek(1 + a->second) && peek(1 + a->second)->is("and")) {
                if (auto b = time_value(2 + a->second, true)) {
                    const std::size_t last = 1 + a->second + b->second;
                    TimeCue cue = make_range(a->first, b->first, begin, peek(last)->end);
                    pos_ += last + 1;
                    return cue;
                }
            }
            return std::nullopt;
        }

        if (is_point_word(t) || is_range_opener(t)) {
            const std::size_t saved = pos_;
            ++pos_;
            if (auto cue = range_at(0, true)) {
                cue->span_begin = begin;
                return cue;
            }
            pos_ = saved;
            if (auto v = time_value(1, true)) {
                const std::size_t last = v->second;
                TimeCue cue{CueKind::single_timestamp, {v->first}, begin, peek(last)->end};
                pos_ += last + 1;
                return cue;
            }
            return std::nullopt;
        }

        if (t.kind == Token::Kind::time) {
            if (auto cue = range_at(0, true))
                return cue;
            TimeCue cue{CueKind::single_timestamp, {t.value}, begin, t.end};
            ++pos_;
            return cue;
        }

        if (t.is("opening") || t.is("beginning")) {
            ++pos_;
            return TimeCue{CueKind::positional_open, {}, begin, t.end};
        }
        if (t.is("end") || t.is("ending")) {
            ++pos_;
            return TimeCue{CueKind::positional_end, {}, begin, t.end};
        }
        return std::nullopt;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<TimeCue> parse_time_cues(std::string_view text)
{
    auto cues = CueParser(lex(text)).run();
    if (cues.empty())
        cues.push_back(TimeCue{CueKind::none, {}, 0, 0});
    return cues;
}

QueryClass classify_query(std::string_view text)
{
    struct Keyword {
        std::vector<std::string_view> words;
        QueryClass cls;
    };
    // Longest phrases first so that a tie at one position goes to the longer one.
    static const std::vector<Keyword> keywords = {
        {{"how", "many"}, QueryClass::factual}, {{"what"}, QueryClass::factual},
        {{"who"}, QueryClass::factual},         {{"which"}, QueryClass::factual},
        {{"count"}, QueryClass::factual},       {{"identify"}, QueryClass::factual},
        {{"why"}, QueryClass::reasoning},       {{"how"}, QueryClass::reasoning},
        {{"explain"}, QueryClass::reasoning},   {{"reason"}, QueryClass::reasoning},
        {{"cause"}, QueryClass::reasoning},
    };

    std::vector<std::string> words;
    for (const auto& tok : lex(text)) {
        if (tok.kind == Token::Kind::word)
            words.push_back(tok.word);
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
        for (const auto& kw : keywords) {
            if (i + kw.words.size() > words.size())
                continue;
            bool match = true;
            for (std::size_t k = 0; k < kw.words.size() && match; ++k)
                match = words[i + k] == kw.words[k];
            if (match)
                return kw.cls;
        }
    }
    return QueryClass::factual;
}

std::optional<TimeRange> clamp_range(TimeRange range, double duration_sec)
{
    if (range.start > range.end)
        std::swap(range.start, range.end);
    if (range.start > duration_sec || range.end < 0.0)
        return std::nullopt;
    TimeRange out{std::max(0.0, range.start), std::min(duration_sec, range.end)};
    if (out.start < out.end)
        return out;
    // Collapsed onto a point inside the video: open a window of up to 1 s.
    const double anchor = out.start;
    if (anchor + kForwardWindowSec <= duration_sec)
        return TimeRange{anchor, anchor + kForwardWindowSec};
    return TimeRange{std::max(0.0, duration_sec - kForwardWindowSec), duration_sec};
}

std::vector<TimeRange> merge_ranges(std::vector<TimeRange> ranges)
{
    std::sort(ranges.begin(), ranges.end(), [](const TimeRange& a, const TimeRange& b) {
        return std::tie(a.start, a.end) < std::tie(b.start, b.end);
    });
    std::vector<TimeRange> out;
    for (const auto& r : ranges) {
        if (!out.empty() && r.start <= out.back().end)
            out.back().end = std::max(out.back().end, r.end);
        else
            out.push_back(r);
    }
    return out;
}

std::vector<TimeRange> apply_timestamp_rules(std::span<const TimeCue> cues, QueryClass cls,
                                             double duration_sec)
{
    if (!(duration_sec > 0.0))
        return {};
    const bool reasoning = cls == QueryClass::reasoning;
    std::vector<TimeRange> raw;
    for (const auto& cue : cues) {
        switch (cue.kind) {
        case CueKind::exact_range:
            if (cue.values.size() == 2) {
                const double pad = reasoning ? kContextPadSec : 0.0;
                raw.push_back({cue.values[0] - pad, cue.values[1] + pad});
            }
            break;
        case CueKind::single_timestamp:
            if (cue.values.size() == 1) {
                const double t = cue.values[0];
                if (reasoning)
                    raw.push_back({t - kContextPadSec, t + kContextPadSec});
                else
                    raw.push_back({t, t + kForwardWindowSec});
            }
            break;
        case CueKind::approximate:
            if (cue.values.size() == 1)
                raw.push_back({cue.values[0] - kContextPadSec, cue.values[0] + kContextPadSec});
            break;
        case CueKind::positional_open:
            raw.push_back({0.0, kPositionalWindowSec});
            break;
        case CueKind::positional_end:
            raw.push_back({std::max(0.0, duration_sec - kPositionalWindowSec), duration_sec});
            break;
        case CueKind::none:
            break;
        }
    }
    std::vector<TimeRange> clamped;
    for (const auto& r : raw) {
        if (auto c = clamp_range(r, duration_sec))
            clamped.push_back(*c);
    }
    return merge_ranges(std::move(clamped));
}

} // namespace vidscout
