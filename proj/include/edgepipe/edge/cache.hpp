#pragma once

#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "edgepipe/sensor/sample.hpp"

namespace edgepipe {

enum class CacheState { pending, acked };

struct CacheEntry {
  SensorSample sample;
  CacheState state = CacheState::pending;
  std::uint64_t enqueue_seq = 0;
};

enum class CacheFullPolicy {
  block,                // refuse the sample (CacheFullError); the caller retries later
  drop_oldest_pending,  // give up the oldest unsent sample to make room
};

struct CacheOptions {
  // Records the log may hold. Acked records are compacted away before the
  // policy applies.
  std::size_t capacity = 1u << 20;
  CacheFullPolicy policy = CacheFullPolicy::block;
  // fsync after every append instead of only flushing to the OS.
  bool sync_writes = false;
};

class CacheFullError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Durable store-and-forward queue for one station.
//
//   <dir>/cache.log    "EPCACHE\0", u32 version, then records of
//                      u64 seq, u32 length, sample JSON (big-endian ints)
//   <dir>/cache.mark   "EPWMARK\0", u32 version, u64 acked_through,
//                      u64 dropped_through, u64 acked_total,
//                      u64 dropped_total, u64 session
//
// Entries are sent and acked in sequence order, so the acked set is always
// the prefix seq <= acked_through and the mark file is enough to recover
// state. A torn record at the end of the log is discarded on open.
class EdgeCache {
 public:
  explicit EdgeCache(std::filesystem::path dir, CacheOptions options = {});
  ~EdgeCache();
  EdgeCache(const EdgeCache&) = delete;
  EdgeCache& operator=(const EdgeCache&) = delete;

  // Durable on return. Throws CacheFullError under the block policy.
  CacheEntry append(const SensorSample& sample);

  // Oldest first; max_count 0 means all.
  std::vector<CacheEntry> pending(std::size_t max_count = 0) const;
  std::size_t pending_count() const { return pending_.size(); }

  // Marks every pending entry with seq <= through as acked. Returns how
  // many changed state.
  std::size_t ack_through(std::uint64_t through);

  // Rewrites the log without acked or dropped records.
  void compact();

  std::uint64_t acked_total() const { return acked_total_; }
  std::uint64_t dropped_total() const { return dropped_total_; }
  std::uint64_t acked_through() const { return acked_through_; }
  // Incremented on every open; keeps message ids unique across restarts.
  std::uint64_t session() const { return session_; }
  std::size_t log_records() const { return log_records_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void open_log();
  void write_mark() const;
  void append_record(std::uint64_t seq, const std::string& json);
  std::uint64_t resolved_through() const { return std::max(acked_through_, dropped_through_); }

  std::filesystem::path dir_;
  CacheOptions options_;
  std::FILE* log_ = nullptr;
  std::deque<CacheEntry> pending_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t acked_through_ = 0;
  std::uint64_t dropped_through_ = 0;
  std::uint64_t acked_total_ = 0;
  std::uint64_t dropped_total_ = 0;
  std::uint64_t session_ = 0;
  std::size_t log_records_ = 0;
};

}  // namespace edgepipe
