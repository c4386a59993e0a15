#include "medbase/fetch.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "medbase/error.hpp"

namespace fs = std::filesystem;

namespace medbase {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void throw_write_error(const fs::path& path, int err) {
  if (err == ENOSPC || err == EDQUOT) throw DiskFullError("no space left writing " + path.string());
  throw Error("cannot write " + path.string() + ": " + std::strerror(err));
}

void write_all(std::FILE* f, std::string_view bytes, const fs::path& path) {
  if (bytes.empty()) return;
  if (std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size()) throw_write_error(path, errno);
}

void close_checked(FilePtr& f, const fs::path& path) {
  std::FILE* raw = f.release();
  if (std::fflush(raw) != 0 || std::fclose(raw) != 0) throw_write_error(path, errno);
}

fs::path part_path(const fs::path& final_path) { return fs::path(final_path.string() + ".part"); }

}  // namespace

std::string_view to_string(Repository repo) {
  return repo == Repository::Baseline ? "baseline" : "update";
}

std::optional<Repository> repository_from_string(std::string_view s) {
  if (s == "baseline") return Repository::Baseline;
  if (s == "update" || s == "updatefiles" || s == "daily-update") return Repository::DailyUpdate;
  return std::nullopt;
}

std::string_view repository_dir(Repository repo) {
  return repo == Repository::Baseline ? "baseline/" : "updatefiles/";
}

Manifest list_remote_files(RepositoryEndpoint& endpoint, const ListOptions& options) {
  Manifest m;
  m.fetched_at = std::chrono::system_clock::now();
  std::set<std::string> seen;

  for (Repository repo : {Repository::Baseline, Repository::DailyUpdate}) {
    if (repo == Repository::Baseline && !options.baseline) continue;
    if (repo == Repository::DailyUpdate && !options.updates) continue;

    std::string dir(repository_dir(repo));
    auto items = endpoint.list(dir);
    std::set<std::string> digests;
    for (const auto& i : items)
      if (ends_with(i.name, std::string(kArchiveSuffix) + std::string(kDigestSuffix))) digests.insert(i.name);

    std::vector<RemoteFileEntry> entries;
    for (const auto& i : items) {
      if (!ends_with(i.name, kArchiveSuffix)) continue;
      RemoteFileEntry e;
      e.name = i.name.substr(0, i.name.size() - kArchiveSuffix.size());
      e.repository = repo;
      e.compressed_size = i.size;
      if (e.compressed_size == 0) throw ListingParseError("listing gives no size for " + dir + i.name);
      if (!seen.insert(e.name).second) throw ListingParseError("archive listed twice: " + e.name);
      std::string digest_name = i.name + std::string(kDigestSuffix);
      if (digests.count(digest_name)) {
        auto digest = parse_md5_sidecar(endpoint.fetch_text(dir + digest_name));
        if (!digest) throw ListingParseError("unreadable digest sidecar " + dir + digest_name);
        e.checksum = *digest;
      }
      entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    m.entries.insert(m.entries.end(), entries.begin(), entries.end());
  }
  return m;
}

Md5::Md5() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_md5(), nullptr) != 1) {
    throw Error("OpenSSL: MD5 init failed");
  }
}

Md5::~Md5() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Md5::update(std::string_view bytes) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size()) != 1) {
    throw Error("OpenSSL: MD5 update failed");
  }
}

std::string Md5::hex_digest() {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out, &len) != 1) throw Error("OpenSSL: MD5 final failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[out[i] >> 4]);
    hex.push_back(kHex[out[i] & 0xf]);
  }
  return hex;
}

std::string md5_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  Md5 md5;
  std::string buf(kExtractBufferSize, '\0');
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    md5.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return md5.hex_digest();
}

Fetcher::Fetcher(RepositoryEndpoint& endpoint, FetchOptions options)
    : endpoint_(endpoint), options_(std::move(options)) {
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

bool Fetcher::already_present(const RemoteFileEntry& entry, const fs::path& path) const {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return false;
  if (entry.checksum) return md5_file(path) == *entry.checksum;
  return entry.compressed_size > 0 && fs::file_size(path) == entry.compressed_size;
}

void Fetcher::transfer(const RemoteFileEntry& entry, const fs::path& part) {
  FilePtr out(std::fopen(part.c_str(), "wb"));
  if (!out) throw_write_error(part, errno);
  Md5 md5;
  std::uint64_t got = 0;
  endpoint_.fetch(entry.remote_path(), [&](std::string_view bytes) {
    write_all(out.get(), bytes, part);
    md5.update(bytes);
    got += bytes.size();
    bytes_ += bytes.size();
    if (options_.on_progress) options_.on_progress(entry, got);
  });
  close_checked(out, part);

  if (entry.compressed_size > 0 && got != entry.compressed_size) {
    throw ConnectionError("short transfer for " + entry.file_name() + ": " + std::to_string(got) + " of " +
                          std::to_string(entry.compressed_size) + " bytes");
  }
  if (entry.checksum && md5.hex_digest() != *entry.checksum) {
    throw ChecksumError("checksum mismatch for " + entry.file_name());
  }
}

fs::path Fetcher::download(const RemoteFileEntry& entry, const fs::path& dest_dir) {
  fs::create_directories(dest_dir);
  fs::path final_path = dest_dir / entry.file_name();
  if (already_present(entry, final_path)) return final_path;
  fs::remove(final_path);

  fs::path part = part_path(final_path);
  for (int attempt = 0;; ++attempt) {
    try {
      ++transfers_;
      transfer(entry, part);
      fs::rename(part, final_path);
      return final_path;
    } catch (const ConnectionError&) {
      fs::remove(part);
      if (attempt >= options_.retries) throw;
      auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt), options_.backoff.size() - 1);
      options_.sleep(options_.backoff.empty() ? std::chrono::milliseconds(0) : options_.backoff[idx]);
    } catch (...) {
      fs::remove(part);
      throw;
    }
  }
}

fs::path extract(const fs::path& compressed) {
  fs::path out_path = compressed;
  if (out_path.extension() == ".gz") {
    out_path.replace_extension();
  } else {
    out_path += ".out";
  }
  fs::path part = part_path(out_path);

  FilePtr in(std::fopen(compressed.c_str(), "rb"));
  if (!in) throw Error("cannot open " + compressed.string());
  FilePtr out(std::fopen(part.c_str(), "wb"));
  if (!out) throw_write_error(part, errno);

  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error("zlib: inflateInit2 failed");
  struct Guard {
    z_stream* zs;
    ~Guard() { inflateEnd(zs); }
  } guard{&zs};

  std::vector<unsigned char> inbuf(kExtractBufferSize), outbuf(kExtractBufferSize);
  int status = Z_OK;
  bool any_input = false;
  bool member_done = false;
  try {
    for (;;) {
      if (zs.avail_in == 0) {
        std::size_t n = std::fread(inbuf.data(), 1, inbuf.size(), in.get());
        if (n == 0) break;
        any_input = true;
        zs.next_in = inbuf.data();
        zs.avail_in = static_cast<uInt>(n);
      }
      if (member_done) {
        // Another gzip member follows.
        if (inflateReset(&zs) != Z_OK) throw CorruptArchiveError("zlib reset failed on " + compressed.string());
        member_done = false;
      }
      do {
        zs.next_out = outbuf.data();
        zs.avail_out = static_cast<uInt>(outbuf.size());
        status = inflate(&zs, Z_NO_FLUSH);
        if (status == Z_DATA_ERROR || status == Z_NEED_DICT || status == Z_MEM_ERROR || status == Z_STREAM_ERROR) {
          throw CorruptArchiveError("invalid gzip data in " + compressed.string() + (zs.msg ? std::string(": ") + zs.msg : ""));
        }
        write_all(out.get(),
                  std::string_view(reinterpret_cast<const char*>(outbuf.data()), outbuf.size() - zs.avail_out), part);
        if (status == Z_STREAM_END) {
          member_done = true;
          break;
        }
      } while (zs.avail_out == 0 || (zs.avail_in > 0 && status == Z_OK));
    }
    if (!any_input) throw CorruptArchiveError("empty archive " + compressed.string());
    if (!member_done) throw CorruptArchiveError("truncated gzip stream in " + compressed.string());
    close_checked(out, part);
  } catch (...) {
    out.reset();
    fs::remove(part);
    throw;
  }
  fs::rename(part, out_path);
  return out_path;
}

}  // namespace medbase
