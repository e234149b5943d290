#include "edgepipe/warehouse/warehouse.hpp"

#include <cstring>
#include <sstream>
#include <thread>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/csv.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

constexpr char kMagic[8] = {'E', 'P', 'W', 'A', 'R', 'E', 'H', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr char kOpPut = 1;
constexpr char kOpDelete = 2;

std::string file_header(const std::string& table_id) {
  std::string h(kMagic, sizeof kMagic);
  put_u32_be(h, kVersion);
  put_u32_be(h, static_cast<std::uint32_t>(table_id.size()));
  h += table_id;
  return h;
}

std::string encode_record(char op, const std::string& payload) {
  std::string rec(1, op);
  put_u32_be(rec, static_cast<std::uint32_t>(payload.size()));
  rec += payload;
  return rec;
}

std::size_t row_bytes(const SensorSample& s) { return sample_to_csv_line(s).size(); }

}  // namespace

std::string make_scan_token(const std::string& table_id, const std::string& last_key) {
  return "wh1:" + table_id + ":" + to_hex(last_key);
}

std::string warehouse_csv_header() {
  std::vector<std::string> cols;
  for (auto c : sample_columns()) cols.emplace_back(c);
  std::ostringstream out;
  write_csv_row(out, cols);
  return out.str();
}

Warehouse::Warehouse(std::filesystem::path data_file, WarehouseOptions options)
    : path_(std::move(data_file)), options_(std::move(options)) {
  open_or_create();
}

Warehouse::~Warehouse() {
  if (file_) std::fclose(file_);
}

void Warehouse::open_or_create() {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const std::string header = file_header(options_.table_id);
  if (!std::filesystem::exists(path_)) {
    write_file_atomic(path_, header);
  } else {
    const std::string bytes = read_file(path_);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
      throw DataError("warehouse: " + path_.string() + " is not a warehouse data file");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (get_u32_be(p + 8) != kVersion) {
      throw DataError("warehouse: unsupported data file version " + std::to_string(get_u32_be(p + 8)));
    }
    if (bytes.compare(0, header.size(), header) != 0) {
      throw DataError("warehouse: " + path_.string() + " belongs to another table");
    }
    std::size_t off = header.size();
    std::size_t good = off;
    while (off + 5 <= bytes.size()) {
      const char op = bytes[off];
      const std::uint32_t len = get_u32_be(p + off + 1);
      if (off + 5 + len > bytes.size()) break;
      const std::string payload = bytes.substr(off + 5, len);
      if (op == kOpPut) {
        SensorSample s;
        try {
          s = sample_from_json(nlohmann::json::parse(payload));
        } catch (const std::exception&) {
          break;
        }
        const std::string key = s.sample_id;
        if (!rows_.emplace(key, std::move(s)).second) ++dead_;
      } else if (op == kOpDelete) {
        if (rows_.erase(payload)) ++dead_;
        ++dead_;
      } else {
        break;
      }
      off += 5 + len;
      good = off;
    }
    // A crash mid-append leaves a torn record; drop it.
    if (good < bytes.size()) std::filesystem::resize_file(path_, good);
  }
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw IoError("warehouse: cannot open " + path_.string() + ": " + std::strerror(errno));
}

void Warehouse::append_record(char op, const std::string& payload) {
  const std::string rec = encode_record(op, payload);
  if (std::fwrite(rec.data(), 1, rec.size(), file_) != rec.size() || std::fflush(file_) != 0) {
    throw IoError("warehouse: write to " + path_.string() + " failed");
  }
}

void Warehouse::throttle() {
  if (options_.max_puts_per_second <= 0.0) return;
  const auto slot = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / options_.max_puts_per_second));
  const auto now = std::chrono::steady_clock::now();
  if (next_put_slot_ > now) std::this_thread::sleep_until(next_put_slot_);
  next_put_slot_ = std::max(now, next_put_slot_) + slot;
}

PutResult Warehouse::put(const SensorSample& sample) {
  return put_batch({sample}).front();
}

std::vector<PutResult> Warehouse::put_batch(const std::vector<SensorSample>& samples) {
  std::unique_lock lock(mu_);
  std::vector<PutResult> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (rows_.count(s.sample_id)) {
      out.push_back(PutResult::duplicate);
      continue;
    }
    throttle();
    append_record(kOpPut, sample_to_json(s).dump());
    rows_.emplace(s.sample_id, s);
    out.push_back(PutResult::stored);
  }
  return out;
}

DeleteResult Warehouse::remove(const std::string& sample_id) {
  std::unique_lock lock(mu_);
  if (!rows_.count(sample_id)) return DeleteResult::absent;
  append_record(kOpDelete, sample_id);
  rows_.erase(sample_id);
  dead_ += 2;
  maybe_compact_locked();
  return DeleteResult::removed;
}

ScanPage Warehouse::scan(const std::optional<std::string>& token, std::size_t page_budget) const {
  std::string last_key;
  bool resume = false;
  if (token) {
    const std::string prefix = "wh1:" + options_.table_id + ":";
    if (token->rfind("wh1:", 0) != 0) throw DataError("scan: malformed continuation token");
    if (token->rfind(prefix, 0) != 0) throw DataError("scan: token belongs to another table");
    last_key = from_hex(std::string_view(*token).substr(prefix.size()));
    resume = true;
  }
  std::shared_lock lock(mu_);
  ScanPage page;
  auto it = resume ? rows_.upper_bound(last_key) : rows_.begin();
  for (; it != rows_.end(); ++it) {
    const std::size_t bytes = row_bytes(it->second);
    if (!page.rows.empty() && page.byte_size + bytes > page_budget) break;
    page.rows.push_back(it->second);
    page.byte_size += bytes;
  }
  if (it != rows_.end()) page.next_token = make_scan_token(options_.table_id, page.rows.back().sample_id);
  return page;
}

std::vector<SensorSample> Warehouse::scan_all(std::size_t page_budget) const { return scan_table(*this, page_budget); }

std::vector<SensorSample> scan_table(const SampleTable& table, std::size_t page_budget, std::size_t* pages) {
  std::vector<SensorSample> out;
  std::optional<std::string> token;
  std::size_t n = 0;
  do {
    auto page = table.scan(token, page_budget);
    ++n;
    for (auto& r : page.rows) out.push_back(std::move(r));
    token = page.next_token;
  } while (token);
  if (pages) *pages = n;
  return out;
}

std::size_t Warehouse::size() const {
  std::shared_lock lock(mu_);
  return rows_.size();
}

bool Warehouse::contains(const std::string& sample_id) const {
  std::shared_lock lock(mu_);
  return rows_.count(sample_id) != 0;
}

std::optional<SensorSample> Warehouse::get(const std::string& sample_id) const {
  std::shared_lock lock(mu_);
  auto it = rows_.find(sample_id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

std::size_t Warehouse::dead_records() const {
  std::shared_lock lock(mu_);
  return dead_;
}

void Warehouse::compact() {
  std::unique_lock lock(mu_);
  compact_locked();
}

void Warehouse::maybe_compact_locked() {
  if (dead_ >= options_.compact_min_dead &&
      static_cast<double>(dead_) > options_.compact_dead_ratio * static_cast<double>(rows_.size())) {
    compact_locked();
  }
}

void Warehouse::compact_locked() {
  std::string bytes = file_header(options_.table_id);
  for (const auto& [key, s] : rows_) bytes += encode_record(kOpPut, sample_to_json(s).dump());
  std::fclose(file_);
  file_ = nullptr;
  write_file_atomic(path_, bytes);
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw IoError("warehouse: cannot reopen " + path_.string());
  dead_ = 0;
}

void Warehouse::export_csv(std::ostream& out) const {
  std::shared_lock lock(mu_);
  out << warehouse_csv_header();
  for (const auto& [key, s] : rows_) out << sample_to_csv_line(s);
}

std::size_t propagate_dedup(SampleTable& table, const std::map<std::string, SensorSample>& kept) {
  for (const auto& [id, row] : kept) {
    table.remove(id);
    table.put(row);
  }
  return kept.size();
}

}  // namespace edgepipe
