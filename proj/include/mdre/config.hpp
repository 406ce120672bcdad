#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mdre/errors.hpp"

namespace mdre {

// Flat TOML subset for run configs: `key = value` lines with strings,
// numbers, booleans and one-level arrays. [section] headers prefix their
// keys ("section.key"). Enough for the run-config schema; nested tables
// are not supported.
struct ConfigValue {
    std::variant<bool, double, std::string, std::vector<double>, std::vector<std::string>> v;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
};

class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<config>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<double> get_number(const std::string& key) const;
    std::optional<long> get_int(const std::string& key) const;
    std::optional<bool> get_bool(const std::string& key) const;
    std::optional<std::vector<std::string>> get_string_array(const std::string& key) const;
    std::optional<std::vector<double>> get_number_array(const std::string& key) const;

    const std::map<std::string, ConfigValue>& values() const { return values_; }

private:
    std::map<std::string, ConfigValue> values_;
};

}  // namespace mdre
