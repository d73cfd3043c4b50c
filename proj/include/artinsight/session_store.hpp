#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "artinsight/blob_source.hpp"
#include "artinsight/domain.hpp"

namespace artinsight {

inline constexpr int kStoreSchemaVersion = 1;

struct SessionSummary {
  std::string session_id;
  std::string title;
  Timestamp created_at{};
  SessionStatus status = SessionStatus::pending;

  bool operator==(const SessionSummary&) const = default;
};

void to_json(Json& j, const SessionSummary& v);
void from_json(const Json& j, SessionSummary& v);

struct StoreOptions {
  std::size_t blob_size_limit = 32 * 1024 * 1024;
};

/// Random 128-bit id in lower-case hex.
std::string new_session_id();

/// On-disk layout under `root`:
///   store.json                          schema_version
///   blobs/sha256/<ab>/<hex>             content, plus <hex>.meta.json
///   sessions/<session_id>.json          one document per session
///   runs/<run_id>.json                  comparison runs
///   index.json                          listing cache, rebuilt on open
/// Every document is written to a temporary file and renamed into place.
class SessionStore : public BlobStore {
 public:
  explicit SessionStore(std::filesystem::path root, StoreOptions options = {});

  /// Resolves the root from $ARTINSIGHT_STORE, falling back to `fallback`.
  static std::filesystem::path default_root(const std::filesystem::path& fallback);

  BlobRef put_blob(std::span<const std::uint8_t> bytes, const std::string& media_type) override;
  Blob get_blob(const BlobRef& ref) const override;
  bool has_blob(const BlobRef& ref) const;

  /// Writes `session` if its store_version equals the committed version (0
  /// for a new session) and returns it with store_version incremented.
  /// Throws Error(conflict) on a stale version.
  ArtworkSession save_session(const ArtworkSession& session);
  ArtworkSession load_session(const std::string& session_id) const;
  bool has_session(const std::string& session_id) const;
  /// Newest first; ties broken by session id.
  std::vector<SessionSummary> list_sessions(std::size_t page = 0, std::size_t page_size = 50) const;
  std::size_t session_count() const;

  /// Removes a session document. With `erase_blobs`, blobs it references are
  /// deleted unless another session or run still references them.
  void purge_session(const std::string& session_id, bool erase_blobs = false);

  void save_run(const ComparisonRun& run);
  ComparisonRun load_run(const std::string& run_id) const;
  std::vector<std::string> list_runs() const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path blob_path(const BlobRef& ref) const;
  std::filesystem::path session_path(const std::string& id) const;
  std::vector<SessionSummary> read_index_locked() const;
  void write_index_locked(const std::vector<SessionSummary>& index) const;
  std::vector<SessionSummary> rebuild_index_locked() const;

  class FileLock;

  std::filesystem::path root_;
  StoreOptions options_;
  mutable std::shared_mutex mu_;
};

/// Writes `data` to a sibling temp file and renames it over `path`. When
/// `durable`, the file and its directory are fsynced.
void write_file_atomic(const std::filesystem::path& path, std::string_view data,
                       bool durable = true);
std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace artinsight
