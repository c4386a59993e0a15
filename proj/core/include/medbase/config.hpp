#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "medbase/load.hpp"

namespace medbase {

struct PipelineConfig {
  std::string db_url;
  std::string mirror_url;
  std::filesystem::path workdir = "medbase-work";
  std::size_t batch_size = 5000;
  DuplicatePolicy duplicate_policy = DuplicatePolicy::Skip;
  bool truncate_overflow = false;
  bool skip_index = false;
  bool baseline_only = false;
  bool update_only = false;
  bool reset = false;
  bool keep_files = false;
  std::optional<std::filesystem::path> report_path;
  std::optional<std::filesystem::path> error_log;  // default: <workdir>/errors.log

  // Throws ConfigError.
  void validate(bool need_mirror = true) const;
  std::filesystem::path error_log_path() const;
  std::filesystem::path ledger_snapshot_path() const;
};

// One configuration source: documented key -> raw value.
using ConfigLayer = std::map<std::string, std::string, std::less<>>;

// Keys accepted in every layer.
//   db_url, mirror_url, workdir, batch_size, on_duplicate, truncate_overflow,
//   skip_index, baseline_only, update_only, keep_files, report_path, error_log
bool is_config_key(std::string_view key);

// Flat `key = value` lines; `#` starts a comment; values may be double-quoted.
// Throws ConfigError on syntax errors or unknown keys.
ConfigLayer parse_config_file(std::string_view text, std::string_view origin = "config");
ConfigLayer read_config_file(const std::filesystem::path& path);

// MEDBASE_DB_URL and MEDBASE_MIRROR_URL.
ConfigLayer environment_layer();

// Applies layers over the defaults, lowest precedence first:
// file, environment, command line.
PipelineConfig resolve_config(const ConfigLayer& file, const ConfigLayer& env, const ConfigLayer& cli);

}  // namespace medbase
