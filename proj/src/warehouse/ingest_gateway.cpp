#include "edgepipe/warehouse/ingest_gateway.hpp"

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

IngestGateway::IngestGateway(Transport& bus, Warehouse& warehouse, EpochClock clock,
                             std::string filter, std::string subscriber)
    : warehouse_(warehouse), clock_(std::move(clock)) {
  mailbox_ = bus.subscribe(filter, subscriber);
}

std::size_t IngestGateway::handle(const Envelope& env) {
  if (env.payload_kind != PayloadKind::sample_batch) return 0;
  std::vector<SensorSample> samples;
  try {
    samples = samples_from_batch_payload(env.payload);
  } catch (const DataError&) {
    ++stats_.malformed;
    return 0;
  }
  ++stats_.batches;
  const std::int64_t now = clock_();
  for (auto& s : samples) s.ts = now;
  std::size_t stored = 0;
  for (auto r : warehouse_.put_batch(samples)) {
    if (r == PutResult::stored) {
      ++stored;
    } else {
      ++stats_.duplicates;
    }
  }
  stats_.stored += stored;
  return stored;
}

std::size_t IngestGateway::pump() {
  std::size_t stored = 0;
  for (const auto& env : mailbox_->drain()) stored += handle(env);
  return stored;
}

std::size_t IngestGateway::pump_for(std::chrono::milliseconds timeout) {
  auto first = mailbox_->pop_for(timeout);
  if (!first) return 0;
  return handle(*first) + pump();
}

}  // namespace edgepipe
