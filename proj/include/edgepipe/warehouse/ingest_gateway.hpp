#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "edgepipe/bus/bus.hpp"
#include "edgepipe/warehouse/warehouse.hpp"

namespace edgepipe {

struct GatewayStats {
  std::uint64_t batches = 0;
  std::uint64_t stored = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t malformed = 0;
};

// Consumes sample_batch envelopes from the bus, stamps the ingest time into
// `ts` and writes the rows. Redelivered samples land as duplicates.
class IngestGateway {
 public:
  using EpochClock = std::function<std::int64_t()>;  // seconds

  IngestGateway(Transport& bus, Warehouse& warehouse, EpochClock clock,
                std::string filter = "+/+/+/+/data", std::string subscriber = "gateway");

  // Handles everything currently queued; returns the number of rows stored.
  std::size_t pump();
  // Blocks up to `timeout` for the first envelope.
  std::size_t pump_for(std::chrono::milliseconds timeout);

  GatewayStats stats() const { return stats_; }

 private:
  std::size_t handle(const Envelope& env);

  Warehouse& warehouse_;
  EpochClock clock_;
  std::shared_ptr<Mailbox> mailbox_;
  GatewayStats stats_;
};

}  // namespace edgepipe
