#ifndef CHDRT_CONFIG_HPP_
#define CHDRT_CONFIG_HPP_

#include <map>
#include <string>

#include "chdrt/scenario.hpp"

namespace chdrt {

/// Parses a flat `key = value` file. `#` starts a comment, blank lines are
/// skipped, whitespace around keys and values is trimmed. Throws ConfigError
/// on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_kv_file(const std::string& path);

/// Applies one setting to the scenario. Unknown keys and unparseable values
/// raise ConfigError naming the offender.
void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value);

/// Applies a whole parsed file.
void apply_settings(ScenarioConfig& cfg, const std::map<std::string, std::string>& kv);

} // namespace chdrt

#endif
