#include "artinsight/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace artinsight {

namespace fs = std::filesystem;

namespace {

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '-' || c == '_';
  });
}

void require_id(std::string_view id, const char* what) {
  if (!valid_id(id)) {
    throw Error(ErrorCode::invalid_value, fmt::format("invalid {} '{}'", what, id), what);
  }
}

std::string blob_hex(const BlobRef& ref) {
  constexpr std::string_view kPrefix = "sha256:";
  if (!ref.value.starts_with(kPrefix) || ref.value.size() != kPrefix.size() + 64) {
    throw Error(ErrorCode::invalid_value, fmt::format("malformed blob ref '{}'", ref.value),
                "blob_ref");
  }
  std::string hex = ref.value.substr(kPrefix.size());
  if (!std::all_of(hex.begin(), hex.end(),
                   [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); })) {
    throw Error(ErrorCode::invalid_value, fmt::format("malformed blob ref '{}'", ref.value),
                "blob_ref");
  }
  return hex;
}

std::string temp_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  return fmt::format(".tmp.{}.{}", ::getpid(), counter.fetch_add(1));
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view data, bool durable) {
  fs::path tmp = path;
  tmp += temp_suffix();
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::io_error,
                fmt::format("cannot create {}: {}", tmp.string(), std::strerror(errno)));
  }
  std::size_t written = 0;
  while (written < data.size()) {
    ssize_t n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw Error(ErrorCode::io_error,
                  fmt::format("write to {} failed: {}", tmp.string(), std::strerror(err)));
    }
    written += static_cast<std::size_t>(n);
  }
  if ((durable && ::fsync(fd) != 0) || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw Error(ErrorCode::io_error, fmt::format("cannot flush {}", tmp.string()));
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    int err = errno;
    ::unlink(tmp.c_str());
    throw Error(ErrorCode::io_error,
                fmt::format("cannot rename into {}: {}", path.string(), std::strerror(err)));
  }
  if (durable) fsync_dir(path.parent_path());
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void to_json(Json& j, const SessionSummary& v) {
  j = Json{{"session_id", v.session_id},
           {"title", v.title},
           {"created_at", format_timestamp(v.created_at)},
           {"status", to_string(v.status)}};
}

void from_json(const Json& j, SessionSummary& v) {
  v.session_id = j.at("session_id").get<std::string>();
  v.title = j.at("title").get<std::string>();
  v.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  const auto status = j.at("status").get<std::string>();
  v.status = status == "ready"    ? SessionStatus::ready
             : status == "failed" ? SessionStatus::failed
                                  : SessionStatus::pending;
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  return fmt::format("{:016x}{:016x}", rng(), rng());
}

namespace {

constexpr off_t kIndexSlot = 0;
constexpr std::size_t kSessionStripes = 64;

off_t session_slot(const std::string& id) {
  return 1 + static_cast<off_t>(std::hash<std::string>{}(id) % kSessionStripes);
}

}  // namespace

/// Open-file-description lock on one byte of <root>/.lock. Byte 0 guards the
/// index; the others stripe session writes. Each holder opens its own
/// descriptor, so threads of one process exclude each other as well as other
/// processes.
class SessionStore::FileLock {
 public:
  FileLock(const fs::path& root, off_t slot) {
    fd_ = ::open((root / ".lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::io_error, "cannot open store lock file");
    struct flock fl {};
    fl.l_type = F_WRLCK;
    fl.l_whence = SEEK_SET;
    fl.l_start = slot;
    fl.l_len = 1;
    while (::fcntl(fd_, F_OFD_SETLKW, &fl) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw Error(ErrorCode::io_error, "cannot lock store");
      }
    }
  }
  ~FileLock() { ::close(fd_); }  // closing the description releases the lock
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

SessionStore::SessionStore(fs::path root, StoreOptions options)
    : root_(std::move(root)), options_(options) {
  try {
    fs::create_directories(root_ / "blobs" / "sha256");
    fs::create_directories(root_ / "sessions");
    fs::create_directories(root_ / "runs");
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::io_error, e.what());
  }
  std::unique_lock lock(mu_);
  FileLock file_lock(root_, kIndexSlot);
  const fs::path marker = root_ / "store.json";
  if (fs::exists(marker)) {
    Json doc = Json::parse(read_file_bytes(marker), nullptr, false);
    int version = doc.is_object() ? doc.value("schema_version", 0) : 0;
    if (version != kStoreSchemaVersion) {
      throw Error(ErrorCode::io_error,
                  fmt::format("store schema_version {} is not supported", version));
    }
  } else {
    write_file_atomic(marker, Json{{"schema_version", kStoreSchemaVersion}}.dump() + "\n");
  }
  // The index is a cache of the session documents and is written without
  // fsync, so it is rebuilt from them on every open.
  write_index_locked(rebuild_index_locked());
}

fs::path SessionStore::default_root(const fs::path& fallback) {
  const char* env = std::getenv("ARTINSIGHT_STORE");
  return env != nullptr && *env != '\0' ? fs::path(env) : fallback;
}

fs::path SessionStore::blob_path(const BlobRef& ref) const {
  std::string hex = blob_hex(ref);
  return root_ / "blobs" / "sha256" / hex.substr(0, 2) / hex;
}

fs::path SessionStore::session_path(const std::string& id) const {
  return root_ / "sessions" / (id + ".json");
}

BlobRef SessionStore::put_blob(std::span<const std::uint8_t> bytes, const std::string& media_type) {
  if (bytes.empty()) throw Error(ErrorCode::invalid_value, "blob is empty", "bytes");
  if (bytes.size() > options_.blob_size_limit) {
    throw Error(ErrorCode::too_large,
                fmt::format("blob is {} bytes, limit {}", bytes.size(), options_.blob_size_limit),
                "bytes");
  }
  BlobRef ref = blob_ref_for(bytes);
  fs::path path = blob_path(ref);
  // No lock: concurrent writers of the same content rename identical bytes
  // into place. The content file goes last, so its presence implies the meta.
  if (fs::exists(path)) return ref;
  fs::create_directories(path.parent_path());
  fs::path meta = path;
  meta += ".meta.json";
  write_file_atomic(meta, Json{{"media_type", media_type}, {"size", bytes.size()}}.dump() + "\n");
  write_file_atomic(path,
                    std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  return ref;
}

Blob SessionStore::get_blob(const BlobRef& ref) const {
  fs::path path = blob_path(ref);
  if (!fs::exists(path)) throw Error(ErrorCode::not_found, fmt::format("unknown blob {}", ref.value));
  std::string data = read_file_bytes(path);
  Blob blob;
  blob.bytes.assign(data.begin(), data.end());
  if (blob_ref_for(blob.bytes) != ref) {
    throw Error(ErrorCode::io_error, fmt::format("blob {} failed its content check", ref.value));
  }
  fs::path meta = path;
  meta += ".meta.json";
  Json doc = fs::exists(meta) ? Json::parse(read_file_bytes(meta), nullptr, false) : Json();
  blob.media_type =
      doc.is_object() ? doc.value("media_type", "application/octet-stream") : "application/octet-stream";
  return blob;
}

bool SessionStore::has_blob(const BlobRef& ref) const {
  return fs::exists(blob_path(ref));
}

std::vector<SessionSummary> SessionStore::read_index_locked() const {
  fs::path path = root_ / "index.json";
  if (!fs::exists(path)) return {};
  Json doc = Json::parse(read_file_bytes(path), nullptr, false);
  if (doc.is_discarded() || !doc.contains("sessions")) return {};
  try {
    return doc["sessions"].get<std::vector<SessionSummary>>();
  } catch (const std::exception&) {
    return {};
  }
}

void SessionStore::write_index_locked(const std::vector<SessionSummary>& index) const {
  Json doc{{"schema_version", kStoreSchemaVersion}, {"sessions", index}};
  write_file_atomic(root_ / "index.json", doc.dump() + "\n", /*durable=*/false);
}

std::vector<SessionSummary> SessionStore::rebuild_index_locked() const {
  std::vector<SessionSummary> index;
  for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
    if (entry.path().extension() != ".json") continue;
    try {
      auto s = decode<ArtworkSession>(Json::parse(read_file_bytes(entry.path())));
      index.push_back({s.session_id, s.title, s.created_at, s.status});
    } catch (const std::exception& e) {
      spdlog::warn("skipping unreadable session {}: {}", entry.path().string(), e.what());
    }
  }
  return index;
}

ArtworkSession SessionStore::save_session(const ArtworkSession& session) {
  require_id(session.session_id, "session_id");
  if (auto issue = validate_session(session)) {
    throw Error(issue->code, issue->message, issue->field);
  }
  const fs::path path = session_path(session.session_id);
  ArtworkSession next = session;
  {
    // Compare-and-write on the version under this session's stripe only, so
    // writes to different sessions proceed (and fsync) in parallel.
    FileLock stripe(root_, session_slot(session.session_id));
    std::int64_t committed = 0;
    if (fs::exists(path)) {
      committed = decode<ArtworkSession>(Json::parse(read_file_bytes(path))).store_version;
    }
    if (committed != session.store_version) {
      throw Error(ErrorCode::conflict,
                  fmt::format("session {} is at version {}, write was based on {}",
                              session.session_id, committed, session.store_version),
                  "store_version");
    }
    next.store_version = committed + 1;
    write_file_atomic(path, Json(next).dump(2) + "\n");
  }

  std::unique_lock lock(mu_);
  FileLock index_lock(root_, kIndexSlot);
  auto index = read_index_locked();
  SessionSummary summary{next.session_id, next.title, next.created_at, next.status};
  auto it = std::find_if(index.begin(), index.end(),
                         [&](const SessionSummary& s) { return s.session_id == next.session_id; });
  if (it == index.end()) {
    index.push_back(summary);
  } else {
    *it = summary;
  }
  write_index_locked(index);
  return next;
}

ArtworkSession SessionStore::load_session(const std::string& session_id) const {
  if (!valid_id(session_id)) {
    throw Error(ErrorCode::not_found, fmt::format("unknown session '{}'", session_id));
  }
  const fs::path path = session_path(session_id);
  std::string text;
  {
    std::shared_lock lock(mu_);
    if (!fs::exists(path)) {
      throw Error(ErrorCode::not_found, fmt::format("unknown session '{}'", session_id));
    }
    text = read_file_bytes(path);
  }
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::io_error, fmt::format("session {} document is corrupt", session_id));
  }
  auto session = decode<ArtworkSession>(doc);
  if (session.session_id != session_id) {
    throw Error(ErrorCode::io_error, fmt::format("session {} document has a foreign id", session_id));
  }
  return session;
}

bool SessionStore::has_session(const std::string& session_id) const {
  if (!valid_id(session_id)) return false;
  std::shared_lock lock(mu_);
  return fs::exists(session_path(session_id));
}

std::vector<SessionSummary> SessionStore::list_sessions(std::size_t page,
                                                        std::size_t page_size) const {
  std::vector<SessionSummary> index;
  {
    std::shared_lock lock(mu_);
    index = read_index_locked();
  }
  std::sort(index.begin(), index.end(), [](const SessionSummary& a, const SessionSummary& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.session_id < b.session_id;
  });
  std::vector<SessionSummary> out;
  if (page_size == 0) return out;
  std::size_t begin = page * page_size;
  for (std::size_t i = begin; i < index.size() && i < begin + page_size; ++i) {
    out.push_back(index[i]);
  }
  return out;
}

std::size_t SessionStore::session_count() const {
  std::shared_lock lock(mu_);
  return read_index_locked().size();
}

void SessionStore::purge_session(const std::string& session_id, bool erase_blobs) {
  ArtworkSession target = load_session(session_id);
  {
    FileLock stripe(root_, session_slot(session_id));
    fs::remove(session_path(session_id));
  }
  std::unique_lock lock(mu_);
  FileLock index_lock(root_, kIndexSlot);
  auto index = read_index_locked();
  std::erase_if(index, [&](const SessionSummary& s) { return s.session_id == session_id; });
  write_index_locked(index);
  if (!erase_blobs) return;

  std::set<std::string> candidates{target.image_ref.value};
  if (target.audio) candidates.insert(target.audio->audio_ref.value);
  std::set<std::string> referenced;
  for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
    if (entry.path().extension() != ".json") continue;
    auto s = decode<ArtworkSession>(Json::parse(read_file_bytes(entry.path())));
    referenced.insert(s.image_ref.value);
    if (s.audio) referenced.insert(s.audio->audio_ref.value);
  }
  for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
    if (entry.path().extension() != ".json") continue;
    auto run = decode<ComparisonRun>(Json::parse(read_file_bytes(entry.path())));
    for (const auto& item : run.dataset) referenced.insert(item.image_ref.value);
  }
  for (const auto& ref : candidates) {
    if (referenced.contains(ref)) continue;
    fs::path path = blob_path(BlobRef{ref});
    fs::path meta = path;
    meta += ".meta.json";
    fs::remove(path);
    fs::remove(meta);
  }
}

void SessionStore::save_run(const ComparisonRun& run) {
  require_id(run.run_id, "run_id");
  std::unique_lock lock(mu_);
  FileLock file_lock(root_, kIndexSlot);
  write_file_atomic(root_ / "runs" / (run.run_id + ".json"), Json(run).dump(2) + "\n");
}

ComparisonRun SessionStore::load_run(const std::string& run_id) const {
  require_id(run_id, "run_id");
  std::shared_lock lock(mu_);
  fs::path path = root_ / "runs" / (run_id + ".json");
  if (!fs::exists(path)) throw Error(ErrorCode::not_found, fmt::format("unknown run '{}'", run_id));
  return decode<ComparisonRun>(Json::parse(read_file_bytes(path)));
}

std::vector<std::string> SessionStore::list_runs() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
    if (entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace artinsight
