#include <curl/curl.h>

#include <algorithm>
#include <cctype>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>

#include "medbase/error.hpp"
#include "medbase/fetch.hpp"

namespace fs = std::filesystem;

namespace medbase {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

class FileEndpoint final : public RepositoryEndpoint {
 public:
  explicit FileEndpoint(fs::path root, std::string url) : root_(std::move(root)), url_(std::move(url)) {}

  std::string url() const override { return url_; }

  std::vector<ListingItem> list(const std::string& dir) override {
    std::vector<ListingItem> out;
    fs::path p = root_ / dir;
    std::error_code ec;
    if (!fs::is_directory(p, ec)) return out;
    for (const auto& e : fs::directory_iterator(p)) {
      if (!e.is_regular_file()) continue;
      out.push_back({e.path().filename().string(), static_cast<std::uint64_t>(e.file_size())});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
  }

  void fetch(const std::string& path, const ByteSink& sink) override {
    std::ifstream in(root_ / path, std::ios::binary);
    if (!in) throw ConnectionError("cannot read " + (root_ / path).string());
    std::string buf(kExtractBufferSize, '\0');
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      auto n = in.gcount();
      if (n > 0) sink(std::string_view(buf.data(), static_cast<std::size_t>(n)));
    }
    if (in.bad()) throw ConnectionError("read error on " + (root_ / path).string());
  }

 private:
  fs::path root_;
  std::string url_;
};

void global_curl_init() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

struct CurlDeleter {
  void operator()(CURL* c) const { curl_easy_cleanup(c); }
};

struct WriteContext {
  const ByteSink* sink = nullptr;
  std::exception_ptr error;
};

std::size_t write_cb(char* ptr, std::size_t size, std::size_t nmemb, void* ud) {
  auto* ctx = static_cast<WriteContext*>(ud);
  try {
    (*ctx->sink)(std::string_view(ptr, size * nmemb));
  } catch (...) {
    ctx->error = std::current_exception();
    return 0;
  }
  return size * nmemb;
}

// http(s):// and ftp:// through libcurl; one handle reused for the run.
class CurlEndpoint final : public RepositoryEndpoint {
 public:
  explicit CurlEndpoint(std::string url) : base_(std::move(url)) {
    global_curl_init();
    if (base_.back() != '/') base_ += '/';
    ftp_ = base_.rfind("ftp://", 0) == 0;
    handle_.reset(curl_easy_init());
    if (!handle_) throw ConnectionError("curl_easy_init failed");
  }

  std::string url() const override { return base_; }

  std::vector<ListingItem> list(const std::string& dir) override {
    std::string body;
    long status = 0;
    CURLcode rc = perform(base_ + dir, [&](std::string_view b) { body.append(b); }, &status, false);
    if (rc != CURLE_OK) {
      if (is_missing(rc, status)) return {};
      throw ConnectionError("listing " + base_ + dir + " failed: " + curl_easy_strerror(rc));
    }
    if (ftp_) return parse_ftp_listing(body);

    auto items = parse_html_listing(body);
    for (auto& item : items) {
      if (item.size == 0 && ends_with(item.name, kArchiveSuffix)) item.size = content_length(base_ + dir + item.name);
    }
    return items;
  }

  void fetch(const std::string& path, const ByteSink& sink) override {
    long status = 0;
    CURLcode rc = perform(base_ + path, sink, &status, false);
    if (rc != CURLE_OK) throw ConnectionError("fetching " + base_ + path + " failed: " + curl_easy_strerror(rc));
  }

 private:
  static bool is_missing(CURLcode rc, long status) {
    return (rc == CURLE_HTTP_RETURNED_ERROR && status == 404) || rc == CURLE_REMOTE_FILE_NOT_FOUND ||
           rc == CURLE_REMOTE_ACCESS_DENIED;
  }

  std::uint64_t content_length(const std::string& url) {
    long status = 0;
    CURLcode rc = perform(url, [](std::string_view) {}, &status, true);
    if (rc != CURLE_OK) throw ConnectionError("HEAD " + url + " failed: " + curl_easy_strerror(rc));
    curl_off_t len = -1;
    curl_easy_getinfo(handle_.get(), CURLINFO_CONTENT_LENGTH_DOWNLOAD_T, &len);
    return len > 0 ? static_cast<std::uint64_t>(len) : 0;
  }

  CURLcode perform(const std::string& url, const ByteSink& sink, long* status, bool head_only) {
    CURL* c = handle_.get();
    curl_easy_reset(c);
    WriteContext ctx{&sink, nullptr};
    curl_easy_setopt(c, CURLOPT_URL, url.c_str());
    curl_easy_setopt(c, CURLOPT_WRITEFUNCTION, &write_cb);
    curl_easy_setopt(c, CURLOPT_WRITEDATA, &ctx);
    curl_easy_setopt(c, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(c, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(c, CURLOPT_CONNECTTIMEOUT, 30L);
    curl_easy_setopt(c, CURLOPT_LOW_SPEED_LIMIT, 1L);
    curl_easy_setopt(c, CURLOPT_LOW_SPEED_TIME, 120L);
    curl_easy_setopt(c, CURLOPT_USERAGENT, "medbase/1.0");
    if (head_only) curl_easy_setopt(c, CURLOPT_NOBODY, 1L);
    CURLcode rc = curl_easy_perform(c);
    curl_easy_getinfo(c, CURLINFO_RESPONSE_CODE, status);
    if (ctx.error) std::rethrow_exception(ctx.error);
    return rc;
  }

  std::string base_;
  bool ftp_ = false;
  std::unique_ptr<CURL, CurlDeleter> handle_;
};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_hex_digest(std::string_view s) {
  return s.size() == 32 && std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

std::string RepositoryEndpoint::fetch_text(const std::string& path) {
  std::string out;
  fetch(path, [&](std::string_view b) { out.append(b); });
  return out;
}

std::unique_ptr<RepositoryEndpoint> open_endpoint(const std::string& url) {
  if (url.rfind("file://", 0) == 0) {
    fs::path root = url.substr(7);
    if (!fs::is_directory(root)) throw ConnectionError("mirror directory does not exist: " + root.string());
    return std::make_unique<FileEndpoint>(root, url);
  }
  if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0 || url.rfind("ftp://", 0) == 0) {
    return std::make_unique<CurlEndpoint>(url);
  }
  if (url.find("://") == std::string::npos && fs::is_directory(url)) {
    return std::make_unique<FileEndpoint>(fs::path(url), "file://" + url);
  }
  throw ConnectionError("unsupported mirror URL: " + url);
}

std::vector<ListingItem> parse_html_listing(std::string_view html) {
  std::vector<ListingItem> out;
  if (html.find('<') == std::string_view::npos) {
    if (html.find_first_not_of(" \t\r\n") == std::string_view::npos) return out;
    throw ListingParseError("directory index is not HTML");
  }
  std::string folded = lower(std::string(html));
  std::size_t pos = 0;
  while ((pos = folded.find("href=", pos)) != std::string::npos) {
    pos += 5;
    if (pos >= html.size()) throw ListingParseError("truncated href in directory index");
    char quote = html[pos];
    std::size_t start, end;
    if (quote == '"' || quote == '\'') {
      start = pos + 1;
      end = html.find(quote, start);
    } else {
      start = pos;
      end = html.find_first_of(" >", start);
    }
    if (end == std::string_view::npos) throw ListingParseError("unterminated href in directory index");
    std::string_view target = html.substr(start, end - start);
    pos = end;
    if (target.empty() || target.find('?') != std::string_view::npos || target.find('/') != std::string_view::npos ||
        target.find(':') != std::string_view::npos || target[0] == '#' || target[0] == '.')
      continue;
    if (std::none_of(out.begin(), out.end(), [&](const auto& i) { return i.name == target; }))
      out.push_back({std::string(target), 0});
  }
  return out;
}

std::vector<ListingItem> parse_ftp_listing(std::string_view text) {
  std::vector<ListingItem> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.rfind("total ", 0) == 0) continue;

    std::istringstream fields(line);
    std::string perms, links, owner, group, size, month, day, time_or_year;
    if (!(fields >> perms >> links >> owner >> group >> size >> month >> day >> time_or_year) || perms.size() < 10 ||
        std::string_view("-dlbcps").find(perms[0]) == std::string_view::npos) {
      throw ListingParseError("unrecognised FTP listing line: " + line);
    }
    std::string name;
    std::getline(fields >> std::ws, name);
    if (name.empty() || size.find_first_not_of("0123456789") != std::string::npos) {
      throw ListingParseError("unrecognised FTP listing line: " + line);
    }
    if (perms[0] != '-') continue;  // directories, links
    out.push_back({name, std::stoull(size)});
  }
  return out;
}

std::optional<std::string> parse_md5_sidecar(std::string_view text) {
  std::string s(text);
  if (auto eq = s.find(")="); eq != std::string::npos) {
    std::istringstream in(s.substr(eq + 2));
    std::string digest;
    if (in >> digest && is_hex_digest(digest)) return lower(digest);
    return std::nullopt;
  }
  std::istringstream in(s);
  std::string digest;
  if (in >> digest && is_hex_digest(digest)) return lower(digest);
  return std::nullopt;
}

}  // namespace medbase
