#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medbase {

enum class Repository { Baseline, DailyUpdate };

std::string_view to_string(Repository repo);
std::optional<Repository> repository_from_string(std::string_view s);

// Remote directory for each repository, relative to the mirror root.
std::string_view repository_dir(Repository repo);

inline constexpr std::string_view kArchiveSuffix = ".xml.gz";
inline constexpr std::string_view kDigestSuffix = ".md5";

struct RemoteFileEntry {
  std::string name;  // archive stem, e.g. "medline17n0001"
  Repository repository = Repository::Baseline;
  std::uint64_t compressed_size = 0;
  std::optional<std::string> checksum;  // lowercase hex MD5

  std::string file_name() const { return name + std::string(kArchiveSuffix); }
  std::string remote_path() const { return std::string(repository_dir(repository)) + file_name(); }
};

struct Manifest {
  std::vector<RemoteFileEntry> entries;  // baseline first, then by name
  std::chrono::system_clock::time_point fetched_at;
};

struct ListingItem {
  std::string name;
  std::uint64_t size = 0;
};

using ByteSink = std::function<void(std::string_view)>;

// Where archives come from. Bindings: file:// (local mirror), http(s)://
// (directory index pages) and ftp:// (LIST output).
class RepositoryEndpoint {
 public:
  virtual ~RepositoryEndpoint() = default;
  virtual std::string url() const = 0;
  // Entries of a directory such as "baseline/"; an absent directory is empty.
  virtual std::vector<ListingItem> list(const std::string& dir) = 0;
  // Streams a file to `sink`. Transport failures raise ConnectionError.
  virtual void fetch(const std::string& path, const ByteSink& sink) = 0;

  std::string fetch_text(const std::string& path);
};

std::unique_ptr<RepositoryEndpoint> open_endpoint(const std::string& url);

// Hrefs of an HTML directory index (sizes are resolved separately). Throws
// ListingParseError when the page is not HTML or an href is cut off.
std::vector<ListingItem> parse_html_listing(std::string_view html);
// Unix-style `LIST` output. Throws ListingParseError on an unrecognised line.
std::vector<ListingItem> parse_ftp_listing(std::string_view text);
// Accepts "MD5(name)= hex" and "hex  name" forms.
std::optional<std::string> parse_md5_sidecar(std::string_view text);

struct ListOptions {
  bool baseline = true;
  bool updates = true;
};

Manifest list_remote_files(RepositoryEndpoint& endpoint, const ListOptions& options = {});

class Md5 {
 public:
  Md5();
  ~Md5();
  Md5(const Md5&) = delete;
  Md5& operator=(const Md5&) = delete;
  void update(std::string_view bytes);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string md5_file(const std::filesystem::path& path);

struct FetchOptions {
  int retries = 3;
  std::vector<std::chrono::milliseconds> backoff = {std::chrono::seconds(1), std::chrono::seconds(4),
                                                    std::chrono::seconds(16)};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
  std::function<void(const RemoteFileEntry&, std::uint64_t bytes_so_far)> on_progress;
};

class Fetcher {
 public:
  Fetcher(RepositoryEndpoint& endpoint, FetchOptions options = {});

  // Downloads into dest_dir via a temporary name and renames on success. An
  // existing file that already verifies is returned without a transfer.
  std::filesystem::path download(const RemoteFileEntry& entry, const std::filesystem::path& dest_dir);

  std::uint64_t bytes_transferred() const { return bytes_; }
  std::uint64_t transfers() const { return transfers_; }

 private:
  bool already_present(const RemoteFileEntry& entry, const std::filesystem::path& path) const;
  void transfer(const RemoteFileEntry& entry, const std::filesystem::path& part);

  RepositoryEndpoint& endpoint_;
  FetchOptions options_;
  std::uint64_t bytes_ = 0;
  std::uint64_t transfers_ = 0;
};

inline constexpr std::size_t kExtractBufferSize = 64 * 1024;

// Inflates a gzip archive next to itself (dropping ".gz"). Memory use is
// fixed by kExtractBufferSize. Throws CorruptArchiveError on bad framing.
std::filesystem::path extract(const std::filesystem::path& compressed);

}  // namespace medbase
