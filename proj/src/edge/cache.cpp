#include "edgepipe/edge/cache.hpp"

#include <cerrno>
#include <cstring>

#include <unistd.h>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

constexpr char kLogMagic[8] = {'E', 'P', 'C', 'A', 'C', 'H', 'E', '\0'};
constexpr char kMarkMagic[8] = {'E', 'P', 'W', 'M', 'A', 'R', 'K', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kLogHeader = 12;
constexpr std::size_t kMarkSize = 8 + 4 + 5 * 8;

std::string log_header() {
  std::string h(kLogMagic, sizeof kLogMagic);
  put_u32_be(h, kVersion);
  return h;
}

}  // namespace

EdgeCache::EdgeCache(std::filesystem::path dir, CacheOptions options)
    : dir_(std::move(dir)), options_(options) {
  if (options_.capacity == 0) throw std::invalid_argument("cache capacity must be positive");
  std::filesystem::create_directories(dir_);
  const auto mark = dir_ / "cache.mark";
  if (std::filesystem::exists(mark)) {
    const std::string bytes = read_file(mark);
    if (bytes.size() != kMarkSize || std::memcmp(bytes.data(), kMarkMagic, 8) != 0) {
      throw DataError("cache: " + mark.string() + " is not a watermark file");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (get_u32_be(p + 8) != kVersion) throw DataError("cache: unsupported watermark version");
    acked_through_ = get_u64_be(p + 12);
    dropped_through_ = get_u64_be(p + 20);
    acked_total_ = get_u64_be(p + 28);
    dropped_total_ = get_u64_be(p + 36);
    session_ = get_u64_be(p + 44);
  }
  ++session_;
  open_log();
  write_mark();
}

EdgeCache::~EdgeCache() {
  if (log_) std::fclose(log_);
}

void EdgeCache::open_log() {
  const auto path = dir_ / "cache.log";
  next_seq_ = resolved_through() + 1;
  if (!std::filesystem::exists(path)) {
    write_file_atomic(path, log_header());
  } else {
    const std::string bytes = read_file(path);
    if (bytes.size() < kLogHeader || std::memcmp(bytes.data(), kLogMagic, 8) != 0) {
      throw DataError("cache: " + path.string() + " is not a cache log");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (get_u32_be(p + 8) != kVersion) throw DataError("cache: unsupported log version");
    std::size_t off = kLogHeader;
    std::size_t good = off;
    while (off + 12 <= bytes.size()) {
      const std::uint64_t seq = get_u64_be(p + off);
      const std::uint32_t len = get_u32_be(p + off + 8);
      if (off + 12 + len > bytes.size()) break;
      SensorSample s;
      try {
        s = sample_from_json(nlohmann::json::parse(bytes.substr(off + 12, len)));
      } catch (const std::exception&) {
        break;
      }
      off += 12 + len;
      good = off;
      ++log_records_;
      next_seq_ = std::max(next_seq_, seq + 1);
      if (seq > resolved_through()) pending_.push_back({std::move(s), CacheState::pending, seq});
    }
    if (good < bytes.size()) std::filesystem::resize_file(path, good);
  }
  log_ = std::fopen(path.c_str(), "ab");
  if (!log_) throw IoError("cache: cannot open " + path.string() + ": " + std::strerror(errno));
}

void EdgeCache::write_mark() const {
  std::string m(kMarkMagic, sizeof kMarkMagic);
  put_u32_be(m, kVersion);
  put_u64_be(m, acked_through_);
  put_u64_be(m, dropped_through_);
  put_u64_be(m, acked_total_);
  put_u64_be(m, dropped_total_);
  put_u64_be(m, session_);
  write_file_atomic(dir_ / "cache.mark", m);
}

void EdgeCache::append_record(std::uint64_t seq, const std::string& json) {
  std::string rec;
  rec.reserve(12 + json.size());
  put_u64_be(rec, seq);
  put_u32_be(rec, static_cast<std::uint32_t>(json.size()));
  rec += json;
  if (std::fwrite(rec.data(), 1, rec.size(), log_) != rec.size() || std::fflush(log_) != 0) {
    throw IoError("cache: write failed: " + std::string(std::strerror(errno)));
  }
  if (options_.sync_writes) ::fsync(::fileno(log_));
  ++log_records_;
}

CacheEntry EdgeCache::append(const SensorSample& sample) {
  if (log_records_ >= options_.capacity) {
    compact();
    if (log_records_ >= options_.capacity) {
      if (options_.policy == CacheFullPolicy::block || pending_.empty()) {
        throw CacheFullError("cache: " + std::to_string(pending_.size()) + " pending entries, capacity " +
                             std::to_string(options_.capacity));
      }
      dropped_through_ = pending_.front().enqueue_seq;
      pending_.pop_front();
      ++dropped_total_;
      write_mark();
      compact();
    }
  }
  CacheEntry e{sample, CacheState::pending, next_seq_++};
  append_record(e.enqueue_seq, sample_to_json(sample).dump());
  pending_.push_back(e);
  return e;
}

std::vector<CacheEntry> EdgeCache::pending(std::size_t max_count) const {
  const std::size_t n = max_count == 0 ? pending_.size() : std::min(max_count, pending_.size());
  return {pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::size_t EdgeCache::ack_through(std::uint64_t through) {
  std::size_t n = 0;
  while (!pending_.empty() && pending_.front().enqueue_seq <= through) {
    pending_.pop_front();
    ++n;
  }
  if (n == 0) return 0;
  acked_through_ = std::max(acked_through_, through);
  acked_total_ += n;
  write_mark();
  // Keep the log from growing without bound during long runs.
  if (log_records_ >= 4096 && pending_.size() * 2 < log_records_) compact();
  return n;
}

void EdgeCache::compact() {
  std::string out = log_header();
  for (const auto& e : pending_) {
    const std::string json = sample_to_json(e.sample).dump();
    put_u64_be(out, e.enqueue_seq);
    put_u32_be(out, static_cast<std::uint32_t>(json.size()));
    out += json;
  }
  std::fclose(log_);
  log_ = nullptr;
  write_file_atomic(dir_ / "cache.log", out);
  log_records_ = pending_.size();
  log_ = std::fopen((dir_ / "cache.log").c_str(), "ab");
  if (!log_) throw IoError("cache: cannot reopen log: " + std::string(std::strerror(errno)));
}

}  // namespace edgepipe
