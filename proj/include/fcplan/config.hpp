#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fcplan/mpc.hpp"

namespace fcplan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat text format, one `key = value` per line, '#' starts a comment.
// Lists are comma separated. Keys not given keep their defaults; unknown or
// repeated keys are errors. The result is validated.
ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ScenarioConfig load_config(const std::string& path);

// Every key with its current value, in registry order. parse_config of the
// output reproduces cfg.
std::string config_text(const ScenarioConfig& cfg);

std::vector<std::string> config_keys();

// "72, 36,18" -> {72, 36, 18}; throws ConfigError on junk or an empty list.
std::vector<double> parse_number_list(const std::string& s);

}  // namespace fcplan
