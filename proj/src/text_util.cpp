#include "chaineval/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace chaineval::text {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_word_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || u >= 0x80;
}

}  // namespace

std::string_view trim_view(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string_view rtrim_view(std::string_view s) {
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string trim(std::string_view s) {
    return std::string(trim_view(s));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_blank(std::string_view s) {
    return trim_view(s).empty();
}

std::string normalize_phrase(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (std::isspace(u) || (u < 0x80 && std::ispunct(u))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        parts.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::size_t find_whole_word(std::string_view haystack, std::string_view needle, std::size_t from) {
    if (needle.empty()) return std::string_view::npos;
    auto pos = haystack.find(needle, from);
    while (pos != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
        auto end = pos + needle.size();
        bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
        if (left_ok && right_ok) return pos;
        pos = haystack.find(needle, pos + 1);
    }
    return std::string_view::npos;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double round_half_even(double value, int digits) {
    const double scale = std::pow(10.0, digits);
    const double scaled = value * scale;
    const double lower = std::floor(scaled);
    const double frac = scaled - lower;
    const double tie_eps = 1e-9 * std::max(1.0, std::fabs(scaled));
    double rounded;
    if (std::fabs(frac - 0.5) <= tie_eps) {
        rounded = std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
    } else {
        rounded = std::round(scaled);
    }
    return rounded / scale;
}

std::string format_2dp(double value) {
    char buf[64];
    double r = round_half_even(value, 2);
    if (r == 0.0) r = 0.0;  // no "-0.00"
    std::snprintf(buf, sizeof buf, "%.2f", r);
    return buf;
}

}  // namespace chaineval::text
