#include "medbase/config.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "medbase/error.hpp"

namespace medbase {
namespace {

constexpr std::array<std::string_view, 12> kKeys = {
    "db_url",        "mirror_url",  "workdir",    "batch_size", "on_duplicate", "truncate_overflow",
    "skip_index", "baseline_only", "update_only", "keep_files", "report_path",  "error_log"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

void apply(PipelineConfig& c, const ConfigLayer& layer) {
  for (const auto& [key, value] : layer) {
    if (key == "db_url") {
      c.db_url = value;
    } else if (key == "mirror_url") {
      c.mirror_url = value;
    } else if (key == "workdir") {
      c.workdir = value;
    } else if (key == "batch_size") {
      long long n = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc() || p != value.data() + value.size() || n < 1) {
        throw ConfigError(fmt::format("batch_size: expected a positive integer, got '{}'", value));
      }
      c.batch_size = static_cast<std::size_t>(n);
    } else if (key == "on_duplicate") {
      auto p = duplicate_policy_from_string(value);
      if (!p) throw ConfigError(fmt::format("on_duplicate: expected skip, replace or fail, got '{}'", value));
      c.duplicate_policy = *p;
    } else if (key == "truncate_overflow") {
      c.truncate_overflow = parse_flag(key, value);
    } else if (key == "skip_index") {
      c.skip_index = parse_flag(key, value);
    } else if (key == "baseline_only") {
      c.baseline_only = parse_flag(key, value);
    } else if (key == "update_only") {
      c.update_only = parse_flag(key, value);
    } else if (key == "keep_files") {
      c.keep_files = parse_flag(key, value);
    } else if (key == "report_path") {
      c.report_path = value;
    } else if (key == "error_log") {
      c.error_log = value;
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
}

}  // namespace

void PipelineConfig::validate(bool need_mirror) const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (baseline_only && update_only) throw ConfigError("baseline_only and update_only are mutually exclusive");
  if (db_url.empty()) throw ConfigError("no database URL (--db-url or MEDBASE_DB_URL)");
  if (need_mirror && mirror_url.empty()) throw ConfigError("no mirror URL (--mirror-url or MEDBASE_MIRROR_URL)");
}

std::filesystem::path PipelineConfig::error_log_path() const { return error_log.value_or(workdir / "errors.log"); }

std::filesystem::path PipelineConfig::ledger_snapshot_path() const { return workdir / "ledger.txt"; }

bool is_config_key(std::string_view key) {
  for (auto k : kKeys)
    if (k == key) return true;
  return false;
}

ConfigLayer parse_config_file(std::string_view text, std::string_view origin) {
  ConfigLayer layer;
  std::size_t lineno = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", origin, lineno));
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '"') {
      auto close = value.find('"', 1);
      if (close == std::string_view::npos) throw ConfigError(fmt::format("{}:{}: unterminated string", origin, lineno));
      auto rest = trim(value.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') throw ConfigError(fmt::format("{}:{}: trailing text", origin, lineno));
      value = value.substr(1, close - 1);
    } else if (auto hash = value.find(" #"); hash != std::string_view::npos) {
      value = trim(value.substr(0, hash));
    }
    if (!is_config_key(key)) throw ConfigError(fmt::format("{}:{}: unknown key '{}'", origin, lineno, key));
    layer[key] = std::string(value);
  }
  return layer;
}

ConfigLayer read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_file(ss.str(), path.string());
}

ConfigLayer environment_layer() {
  ConfigLayer layer;
  if (const char* v = std::getenv("MEDBASE_DB_URL"); v && *v) layer["db_url"] = v;
  if (const char* v = std::getenv("MEDBASE_MIRROR_URL"); v && *v) layer["mirror_url"] = v;
  return layer;
}

PipelineConfig resolve_config(const ConfigLayer& file, const ConfigLayer& env, const ConfigLayer& cli) {
  PipelineConfig c;
  apply(c, file);
  apply(c, env);
  apply(c, cli);
  return c;
}

}  // namespace medbase
