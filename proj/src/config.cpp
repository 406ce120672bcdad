#include "mdre/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mdre {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& what) {
    throw ValidationError(origin + ":" + std::to_string(line) + ": " + what);
}

bool parse_number(const std::string& tok, double& out) {
    errno = 0;
    char* end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return !tok.empty() && end == tok.c_str() + tok.size() && errno != ERANGE;
}

ConfigValue parse_scalar(const std::string& tok, const std::string& origin, std::size_t line) {
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"')
        return ConfigValue{tok.substr(1, tok.size() - 2)};
    if (tok == "true") return ConfigValue{true};
    if (tok == "false") return ConfigValue{false};
    double num = 0.0;
    if (parse_number(tok, num)) return ConfigValue{num};
    fail(origin, line, "cannot parse value '" + tok + "'");
}

// splits "a, b, c" respecting quotes
std::vector<std::string> split_items(const std::string& body, const std::string& origin,
                                     std::size_t line) {
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) fail(origin, line, "unterminated string");
    const std::string last = trim(cur);
    if (!last.empty()) items.push_back(last);
    return items;
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::string section;
    while (std::getline(in, line)) {
        ++lineno;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) fail(origin, lineno, "expected key = value");
        if (!section.empty()) key = section + "." + key;
        if (cfg.values_.count(key)) fail(origin, lineno, "duplicate key '" + key + "'");

        if (val.front() == '[') {
            if (val.back() != ']') fail(origin, lineno, "unterminated array");
            const auto items = split_items(val.substr(1, val.size() - 2), origin, lineno);
            const bool strings = !items.empty() && items.front().front() == '"';
            if (strings) {
                std::vector<std::string> arr;
                for (const std::string& item : items) {
                    ConfigValue cv = parse_scalar(item, origin, lineno);
                    if (!cv.is_string()) fail(origin, lineno, "mixed array types");
                    arr.push_back(std::get<std::string>(cv.v));
                }
                cfg.values_.emplace(key, ConfigValue{arr});
            } else {
                std::vector<double> arr;
                for (const std::string& item : items) {
                    ConfigValue cv = parse_scalar(item, origin, lineno);
                    if (!cv.is_number()) fail(origin, lineno, "mixed array types");
                    arr.push_back(std::get<double>(cv.v));
                }
                cfg.values_.emplace(key, ConfigValue{arr});
            }
        } else {
            cfg.values_.emplace(key, parse_scalar(val, origin, lineno));
        }
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

std::optional<std::string> Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (!it->second.is_string()) throw ValidationError("config key '" + key + "' must be a string");
    return std::get<std::string>(it->second.v);
}

std::optional<double> Config::get_number(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (!it->second.is_number()) throw ValidationError("config key '" + key + "' must be a number");
    return std::get<double>(it->second.v);
}

std::optional<long> Config::get_int(const std::string& key) const {
    auto num = get_number(key);
    if (!num) return std::nullopt;
    if (*num != std::floor(*num))
        throw ValidationError("config key '" + key + "' must be an integer");
    return static_cast<long>(*num);
}

std::optional<bool> Config::get_bool(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (!it->second.is_bool()) throw ValidationError("config key '" + key + "' must be a boolean");
    return std::get<bool>(it->second.v);
}

std::optional<std::vector<std::string>> Config::get_string_array(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (auto* arr = std::get_if<std::vector<std::string>>(&it->second.v)) return *arr;
    if (it->second.is_string())
        return std::vector<std::string>{std::get<std::string>(it->second.v)};
    throw ValidationError("config key '" + key + "' must be a string array");
}

std::optional<std::vector<double>> Config::get_number_array(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (auto* arr = std::get_if<std::vector<double>>(&it->second.v)) return *arr;
    if (it->second.is_number()) return std::vector<double>{std::get<double>(it->second.v)};
    throw ValidationError("config key '" + key + "' must be a number array");
}

}  // namespace mdre
