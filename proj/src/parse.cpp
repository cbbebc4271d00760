#include "tacs/parse.hpp"

#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdlib>

#include "tacs/errors.hpp"

namespace tacs {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

double parse_double(const std::string& token) {
    std::string t = trim(token);
    if (t.empty()) throw ConfigError("expected a number, got an empty token");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw ConfigError("not a finite number: '" + token + "'");
    return v;
}

int parse_int(const std::string& token) {
    std::string t = trim(token);
    if (t.empty()) throw ConfigError("expected an integer, got an empty token");
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || errno == ERANGE || v < INT_MIN || v > INT_MAX)
        throw ConfigError("not an integer: '" + token + "'");
    return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& token) {
    std::string t = trim(token);
    if (t.empty() || t[0] == '-')
        throw ConfigError("expected a nonnegative integer, got '" + token + "'");
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || errno == ERANGE)
        throw ConfigError("not an unsigned integer: '" + token + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = text.find(',', start);
        std::string tok = trim(pos == std::string::npos ? text.substr(start)
                                                        : text.substr(start, pos - start));
        if (tok.empty()) throw ConfigError("empty entry in list '" + text + "'");
        out.push_back(tok);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace tacs
