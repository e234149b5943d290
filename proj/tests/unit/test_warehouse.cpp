#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "edgepipe/bus/bus.hpp"
#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/rng.hpp"
#include "edgepipe/sensor/scenario.hpp"
#include "edgepipe/warehouse/ingest_gateway.hpp"
#include "edgepipe/warehouse/warehouse.hpp"
#include "support/temp_dir.hpp"

using namespace edgepipe;
using test_support::TempDir;

namespace {

std::vector<SensorSample> make_rows(std::size_t n, const std::string& preset = "garage") {
  const auto spec = scenario_preset(preset);
  std::vector<SensorSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_tick(spec, static_cast<std::int64_t>(i)));
  return out;
}

std::size_t csv_line_bytes(const SensorSample& s) { return sample_to_csv_line(s).size(); }

}  // namespace

TEST(Warehouse, PutIsIdempotent) {
  TempDir dir;
  Warehouse wh(dir / "t.wh");
  const auto rows = make_rows(3);
  EXPECT_EQ(wh.put(rows[0]), PutResult::stored);
  EXPECT_EQ(wh.put(rows[0]), PutResult::duplicate);
  auto changed = rows[0];
  changed.readings[0] += 1;
  EXPECT_EQ(wh.put(changed), PutResult::duplicate);
  EXPECT_EQ(wh.get(rows[0].sample_id), rows[0]);
  EXPECT_EQ(wh.size(), 1u);
  EXPECT_EQ(wh.remove(rows[0].sample_id), DeleteResult::removed);
  EXPECT_EQ(wh.remove(rows[0].sample_id), DeleteResult::absent);
  EXPECT_FALSE(wh.contains(rows[0].sample_id));
}

TEST(Warehouse, SurvivesReopenAndTornTail) {
  TempDir dir;
  const auto rows = make_rows(50);
  {
    Warehouse wh(dir / "t.wh");
    wh.put_batch(rows);
    wh.remove(rows[7].sample_id);
  }
  {
    // Simulate a crash mid-append.
    std::ofstream f(dir / "t.wh", std::ios::binary | std::ios::app);
    f.write("\x01\x00\x00\x10\x00partial", 12);
  }
  Warehouse wh(dir / "t.wh");
  EXPECT_EQ(wh.size(), 49u);
  EXPECT_FALSE(wh.contains(rows[7].sample_id));
  EXPECT_EQ(wh.get(rows[8].sample_id), rows[8]);
  EXPECT_EQ(wh.put(rows[0]), PutResult::duplicate);
  EXPECT_EQ(wh.put(rows[7]), PutResult::stored);
}

TEST(Warehouse, RejectsForeignFiles) {
  TempDir dir;
  write_file_atomic(dir / "junk", "this is not a warehouse");
  EXPECT_THROW(Warehouse(dir / "junk"), DataError);
  { Warehouse a(dir / "a.wh", {.table_id = "one"}); }
  EXPECT_THROW(Warehouse(dir / "a.wh", {.table_id = "two"}), DataError);
}

TEST(Warehouse, CompactionKeepsContentAndShrinksFile) {
  TempDir dir;
  WarehouseOptions opts;
  opts.compact_min_dead = 1u << 30;  // manual only
  Warehouse wh(dir / "t.wh", opts);
  const auto rows = make_rows(400);
  wh.put_batch(rows);
  for (std::size_t i = 0; i < rows.size(); i += 2) wh.remove(rows[i].sample_id);
  EXPECT_EQ(wh.dead_records(), 400u);
  const auto before = std::filesystem::file_size(dir / "t.wh");
  const auto content = wh.scan_all();
  wh.compact();
  EXPECT_EQ(wh.dead_records(), 0u);
  EXPECT_LT(std::filesystem::file_size(dir / "t.wh"), before);
  EXPECT_EQ(wh.scan_all(), content);
}

TEST(Warehouse, AutoCompactionTriggersOnDeadRatio) {
  TempDir dir;
  WarehouseOptions opts;
  opts.compact_min_dead = 10;
  Warehouse wh(dir / "t.wh", opts);
  const auto rows = make_rows(30);
  wh.put_batch(rows);
  for (int i = 0; i < 20; ++i) wh.remove(rows[i].sample_id);
  EXPECT_LT(wh.dead_records(), 10u);
  EXPECT_EQ(wh.size(), 10u);
}

TEST(Warehouse, ScanTokensAreTableScoped) {
  TempDir dir;
  Warehouse wh(dir / "t.wh");
  wh.put_batch(make_rows(10));
  EXPECT_THROW(wh.scan(std::string("garbage")), DataError);
  EXPECT_THROW(wh.scan(make_scan_token("other", "x")), DataError);
  EXPECT_THROW(wh.scan(std::string("wh1:sensor_data:zz")), DataError);
  const auto page = wh.scan(make_scan_token("sensor_data", ""));
  EXPECT_EQ(page.rows.size(), 10u);
  EXPECT_FALSE(page.next_token);
}

TEST(Warehouse, PageByteSizeAndMinimumOneRow) {
  TempDir dir;
  Warehouse wh(dir / "t.wh");
  const auto rows = make_rows(20);
  wh.put_batch(rows);
  const auto tiny = wh.scan(std::nullopt, 1);
  ASSERT_EQ(tiny.rows.size(), 1u);
  EXPECT_EQ(tiny.byte_size, csv_line_bytes(tiny.rows[0]));
  ASSERT_TRUE(tiny.next_token);
  const auto all = wh.scan(std::nullopt, 1u << 30);
  std::size_t total = 0;
  for (const auto& r : all.rows) total += csv_line_bytes(r);
  EXPECT_EQ(all.byte_size, total);
  EXPECT_FALSE(all.next_token);
  const auto empty_wh_page = Warehouse(dir / "empty.wh").scan(std::nullopt);
  EXPECT_TRUE(empty_wh_page.rows.empty());
  EXPECT_FALSE(empty_wh_page.next_token);
}

TEST(Warehouse, ExportCsvHasHeaderAndKeyOrder) {
  TempDir dir;
  Warehouse wh(dir / "t.wh");
  auto rows = make_rows(5);
  wh.put_batch(rows);
  std::ostringstream out;
  wh.export_csv(out);
  std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.sample_id < b.sample_id; });
  std::string expected = warehouse_csv_header();
  for (const auto& r : rows) expected += sample_to_csv_line(r);
  EXPECT_EQ(out.str(), expected);
}

TEST(WarehouseProperty, ConcurrentPutsStoreEachIdOnce) {
  TempDir dir;
  Warehouse wh(dir / "t.wh");
  const auto rows = make_rows(600);
  std::atomic<int> stored{0};
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        // Overlapping ranges: every row is offered by two threads.
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if ((i / 150 + t) % 4 < 2 && wh.put(rows[i]) == PutResult::stored) ++stored;
        }
      });
    }
  }
  EXPECT_EQ(stored.load(), 600);
  EXPECT_EQ(wh.size(), 600u);
  Warehouse reopened(dir / "t.wh");
  EXPECT_EQ(reopened.size(), 600u);
}

// Pages union to the table exactly once, with rows written during the scan.
TEST(WarehouseProperty, ScanDuringWritesReturnsStableRowsOnce) {
  TempDir dir;
  Warehouse wh(dir / "t.wh");
  const auto base = make_rows(2000, "bedroom");
  wh.put_batch(base);
  const auto extra = make_rows(500, "garage");
  std::set<std::string> stable;
  for (const auto& r : base) stable.insert(r.sample_id);
  std::jthread writer([&] {
    for (const auto& r : extra) wh.put(r);
  });
  std::vector<std::string> seen;
  std::optional<std::string> token;
  do {
    auto page = wh.scan(token, 4096);
    for (auto& r : page.rows) seen.push_back(r.sample_id);
    token = page.next_token;
  } while (token);
  writer.join();
  std::set<std::string> uniq(seen.begin(), seen.end());
  EXPECT_EQ(uniq.size(), seen.size());
  for (const auto& id : stable) EXPECT_TRUE(uniq.count(id)) << id;
  EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
}

TEST(IngestGateway, StampsTsAndCountsDuplicates) {
  TempDir dir;
  KeyRing keys;
  const std::string st = "daniel/house/garage/pi3";
  keys.add(st, KeyRing::derive_key(1, st));
  InProcessBus bus(keys);
  Warehouse wh(dir / "t.wh");
  IngestGateway gw(bus, wh, [] { return std::int64_t{1700000000}; });
  const auto rows = make_rows(4);
  auto publish = [&](const std::string& id, const std::string& payload) {
    Envelope e{id, data_topic(st), st, PayloadKind::sample_batch, payload, ""};
    sign(e, KeyRing::derive_key(1, st));
    return bus.publish(e);
  };
  ASSERT_EQ(publish("m1", samples_to_batch_payload({rows[0], rows[1]})), PublishStatus::ack);
  ASSERT_EQ(publish("m2", samples_to_batch_payload({rows[1], rows[2]})), PublishStatus::ack);
  ASSERT_EQ(publish("m3", "{\"oops\":1}"), PublishStatus::ack);
  EXPECT_EQ(gw.pump(), 3u);
  const auto s = gw.stats();
  EXPECT_EQ(s.batches, 2u);  // well-formed only
  EXPECT_EQ(s.stored, 3u);
  EXPECT_EQ(s.duplicates, 1u);
  EXPECT_EQ(s.malformed, 1u);
  EXPECT_EQ(wh.get(rows[0].sample_id)->ts, 1700000000);
}
