#pragma once

#include <map>
#include <mutex>
#include <string>

#include "artinsight/domain.hpp"
#include "artinsight/hashing.hpp"

namespace artinsight {

struct Blob {
  Bytes bytes;
  std::string media_type;
};

/// Read access to content-addressed blobs. Throws Error(not_found).
class BlobReader {
 public:
  virtual ~BlobReader() = default;
  virtual Blob get_blob(const BlobRef& ref) const = 0;
};

/// Blob storage: content-addressed, append-only.
class BlobStore : public BlobReader {
 public:
  virtual BlobRef put_blob(std::span<const std::uint8_t> bytes, const std::string& media_type) = 0;
};

inline BlobRef blob_ref_for(std::span<const std::uint8_t> bytes) {
  return BlobRef{"sha256:" + sha256_hex(bytes)};
}

/// Process-local store for tests and bindings.
class MemoryBlobStore : public BlobStore {
 public:
  BlobRef put_blob(std::span<const std::uint8_t> bytes, const std::string& media_type) override {
    BlobRef ref = blob_ref_for(bytes);
    std::lock_guard lock(mu_);
    blobs_.try_emplace(ref.value, Blob{Bytes(bytes.begin(), bytes.end()), media_type});
    return ref;
  }

  Blob get_blob(const BlobRef& ref) const override {
    std::lock_guard lock(mu_);
    auto it = blobs_.find(ref.value);
    if (it == blobs_.end()) throw Error(ErrorCode::not_found, "unknown blob " + ref.value);
    return it->second;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Blob> blobs_;
};

}  // namespace artinsight
