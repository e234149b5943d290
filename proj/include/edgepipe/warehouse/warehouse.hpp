#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <vector>

#include "edgepipe/sensor/sample.hpp"

namespace edgepipe {

enum class PutResult { stored, duplicate };
enum class DeleteResult { removed, absent };

struct ScanPage {
  std::vector<SensorSample> rows;
  std::optional<std::string> next_token;  // absent iff the scan is exhausted
  std::size_t byte_size = 0;              // sum of the rows' CSV line lengths
};

inline constexpr std::size_t kDefaultPageBudget = 1u << 20;

struct WarehouseOptions {
  std::string table_id = "sensor_data";
  // Rewrite the data file once tombstoned records exceed this fraction of
  // the live rows (and at least compact_min_dead records).
  double compact_dead_ratio = 0.5;
  std::size_t compact_min_dead = 4096;
  // 0 disables. Puts beyond this rate sleep; for demo realism only.
  double max_puts_per_second = 0.0;
};

// What training jobs need from a table: paginated scans plus the writes the
// dedup step issues. Implemented by Warehouse and by the HTTP client of a
// served warehouse.
class SampleTable {
 public:
  virtual ~SampleTable() = default;
  virtual PutResult put(const SensorSample& sample) = 0;
  virtual DeleteResult remove(const std::string& sample_id) = 0;
  virtual ScanPage scan(const std::optional<std::string>& token,
                        std::size_t page_budget = kDefaultPageBudget) const = 0;
  virtual std::size_t size() const = 0;
};

// Durable table of samples keyed by sample_id. An append-only data file
// holds put/delete records; the in-memory index is rebuilt from it on open.
// Scans take a shared lock per page, writes an exclusive one.
//
// Scan consistency: a row present for the whole scan is returned exactly
// once. Rows inserted mid-scan appear iff their key sorts after the token.
class Warehouse : public SampleTable {
 public:
  explicit Warehouse(std::filesystem::path data_file, WarehouseOptions options = {});
  ~Warehouse();

  Warehouse(const Warehouse&) = delete;
  Warehouse& operator=(const Warehouse&) = delete;

  PutResult put(const SensorSample& sample) override;
  // One exclusive section for the whole batch.
  std::vector<PutResult> put_batch(const std::vector<SensorSample>& samples);
  DeleteResult remove(const std::string& sample_id) override;

  // Throws DataError on a token minted by another table or not parseable.
  ScanPage scan(const std::optional<std::string>& token,
                std::size_t page_budget = kDefaultPageBudget) const override;
  // Follows tokens to the end.
  std::vector<SensorSample> scan_all(std::size_t page_budget = kDefaultPageBudget) const;

  std::size_t size() const override;
  bool contains(const std::string& sample_id) const;
  std::optional<SensorSample> get(const std::string& sample_id) const;

  void compact();
  std::size_t dead_records() const;

  // 21-column header, then rows in key order.
  void export_csv(std::ostream& out) const;

  const std::string& table_id() const { return options_.table_id; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void open_or_create();
  void append_record(char op, const std::string& payload);
  void throttle();
  void maybe_compact_locked();
  void compact_locked();

  std::filesystem::path path_;
  WarehouseOptions options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, SensorSample> rows_;
  std::size_t dead_ = 0;
  std::FILE* file_ = nullptr;
  std::chrono::steady_clock::time_point next_put_slot_{};
};

// Applies the cleaner's dedup decision to the store: each id is deleted and
// the surviving occurrence written back. Returns the number of ids touched.
std::size_t propagate_dedup(SampleTable& table, const std::map<std::string, SensorSample>& kept);

// Follows continuation tokens to the end of any table.
std::vector<SensorSample> scan_table(const SampleTable& table, std::size_t page_budget = kDefaultPageBudget,
                                     std::size_t* pages = nullptr);

std::string make_scan_token(const std::string& table_id, const std::string& last_key);

std::string warehouse_csv_header();

}  // namespace edgepipe
