#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgepipe/bus/bus.hpp"
#include "edgepipe/edge/cache.hpp"
#include "edgepipe/ml/artifact.hpp"

namespace edgepipe {

struct AgentConfig {
  std::string station;
  std::string key;  // HMAC key registered for `station` on the bus
  std::filesystem::path cache_dir;
  std::int64_t tick_period_s = 1;
  std::int64_t flush_period_s = 10;
  std::size_t max_batch = 0;  // samples per flush; 0 sends everything pending
  CacheOptions cache;
};

struct DeployedModel {
  std::shared_ptr<const ModelArtifact> artifact;
  std::int64_t activated_at = 0;
  std::int64_t version = 0;
};

class ModelRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentStats {
  std::uint64_t ingested = 0;
  std::uint64_t flushes = 0;
  std::uint64_t flush_failures = 0;
  std::uint64_t acked = 0;
  std::uint64_t cache_full = 0;
  std::uint64_t scored = 0;
  std::uint64_t no_model = 0;
  std::uint64_t anomalies = 0;
  std::uint64_t reports_sent = 0;
  std::uint64_t report_failures = 0;
  std::uint64_t models_activated = 0;
  std::uint64_t models_rejected = 0;
};

// What an agent sends upstream for each anomaly verdict.
struct AnomalyReport {
  std::string station;
  SensorSample sample;
  double score = 0.0;
  std::int64_t model_version = 0;
  std::int64_t detected_at = 0;

  nlohmann::ordered_json to_json() const;
  static AnomalyReport from_json(const nlohmann::json& j);  // DataError
};

// Payload of a model_deploy envelope is the artifact JSON; the receipt the
// agent sends back is an `ack` envelope on the same model topic.
struct DeployReceipt {
  std::string station;
  std::int64_t version = 0;
  bool accepted = false;
  std::int64_t active_version = 0;
  std::string reason;

  nlohmann::ordered_json to_json() const;
  static DeployReceipt from_json(const nlohmann::json& j);  // DataError
};

// One station's agent. All methods are meant to be driven from a single
// loop; activate_model may also be called from another thread.
class EdgeAgent {
 public:
  using Clock = std::function<std::int64_t()>;  // epoch seconds

  EdgeAgent(AgentConfig config, Transport& bus, Clock clock);

  // Appends to the cache. Under the block policy a full cache is counted and
  // rethrown as CacheFullError.
  CacheEntry ingest_tick(const SensorSample& sample);
  // Sends pending entries as one sample_batch. Returns the number acked.
  std::size_t flush_batch();
  // +1 normal, -1 anomaly. Anomalies are queued for upstream reporting.
  int score_local(const SensorSample& sample);
  // Throws ModelRejected when unapproved, stale, or without a detector for
  // this station.
  DeployedModel activate_model(const ModelArtifact& artifact);
  // Handles model_deploy envelopes waiting on the control topic.
  std::size_t poll_control();
  // Retries queued anomaly reports. Returns how many were acked.
  std::size_t flush_reports();

  // One event-loop iteration: poll control, ingest, score, and flush on the
  // flush period. Returns the verdict.
  int step(const SensorSample& sample);

  std::optional<DeployedModel> active_model() const;
  std::int64_t active_version() const;
  std::size_t pending() const { return cache_.pending_count(); }
  std::size_t outbox_size() const { return outbox_.size(); }
  const EdgeCache& cache() const { return cache_; }
  AgentStats stats() const { return stats_; }
  const AgentConfig& config() const { return config_; }

 private:
  void save_outbox() const;
  void load_outbox();
  void send_receipt(const DeployReceipt& r);

  AgentConfig config_;
  Transport& bus_;
  Clock clock_;
  EdgeCache cache_;
  std::shared_ptr<Mailbox> control_;
  mutable std::mutex model_mu_;
  std::optional<DeployedModel> model_;
  std::vector<std::pair<std::string, AnomalyReport>> outbox_;  // (message_id, report)
  std::int64_t last_flush_ = 0;
  std::uint64_t batch_counter_ = 0;
  AgentStats stats_;
};

}  // namespace edgepipe
