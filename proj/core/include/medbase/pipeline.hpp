#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "medbase/config.hpp"
#include "medbase/fetch.hpp"
#include "medbase/state.hpp"

namespace medbase {

// Observation points used by progress output and the crash harness.
struct PipelineHooks {
  std::function<void(const RemoteFileEntry&, std::uint64_t bytes)> on_download_progress;
  std::function<void(const RemoteFileEntry&, std::uint64_t citations_so_far)> on_citation;
  std::function<void(const RemoteFileEntry&)> after_flush;  // rows committed, ledger not yet written
  std::function<void(const FileReport&, std::size_t index, std::size_t total)> on_file_done;
  std::function<void(std::chrono::milliseconds)> sleep;  // retry backoff
};

// Ensures the schema, lists the mirror, then for each file not in the ledger:
// download, extract, parse, stage rows and deletions, flush, mark done and
// remove local copies. Indexes are applied at the end unless skip_index.
// Run-aborting errors are caught and reported through RunReport::aborted;
// ConfigError and ConnectionError on the database open propagate.
RunReport run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks = {});

struct VerifyResult {
  std::string label;
  std::string sql;
  double seconds = 0.0;
  std::int64_t result = 0;  // scalar for counts, cardinality otherwise
  std::optional<std::string> error;
};

// The four canned queries. Failures are recorded per query.
std::vector<VerifyResult> verify_database(SqlConnection& conn);
std::vector<VerifyResult> verify(const PipelineConfig& config);

}  // namespace medbase
