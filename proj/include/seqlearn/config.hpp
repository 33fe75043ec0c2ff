#pragma once

// Flat key=value experiment configuration.
//
//   # comment
//   [optimizer]          keys below without a dot get the "optimizer." prefix
//   kind = adam
//   lr = 1e-3
//   schedule.days = 300  dotted keys are always absolute
//
// Precedence: built-in defaults < file < SEQLEARN_* environment < command line.
// The environment name of a key is SEQLEARN_ followed by the key upper-cased
// with '.' replaced by '_' (schedule.days -> SEQLEARN_SCHEDULE_DAYS).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqlearn/protocol.hpp"

namespace seqlearn {

struct ConfigKey {
    std::string name;
    std::optional<std::string> default_value;  // nullopt: required
    std::string description;
};

const std::vector<ConfigKey>& config_keys();

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

struct ConfigSources {
    std::string file_text;
    std::filesystem::path base_dir;  // relative paths in the file resolve against this
    bool use_environment = false;
    ConfigOverrides overrides;       // relative paths resolve against the working directory
};

ExperimentConfig parse_config(const ConfigSources& sources);
ExperimentConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {},
                              bool use_environment = true);

// Canonical "key=value" echo of every key in table order, preceded by the layout version.
std::string config_to_text(const ExperimentConfig& config);

std::uint64_t config_hash(const ExperimentConfig& config);

std::string environment_name(const std::string& key);

} // namespace seqlearn
