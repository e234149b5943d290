#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/bus/bus.hpp"
#include "edgepipe/edge/agent.hpp"
#include "edgepipe/ml/artifact.hpp"

namespace edgepipe {

struct DeployOptions {
  std::string sender = "orchestrator";
  std::string key;                    // HMAC key registered for `sender`
  std::vector<std::string> stations;  // every registered station
  std::int64_t retry_interval_ms = 2000;
};

struct StationDeployState {
  std::string station;
  std::int64_t version = 0;
  int attempts = 0;
  std::int64_t last_sent_ms = 0;
  PublishStatus last_status = PublishStatus::timeout;
  std::optional<DeployReceipt> receipt;
};

// Pushes approved artifacts to every station's model topic and collects the
// agents' receipts. Stations that have not answered are re-sent the newest
// version every retry_interval_ms, so an agent that was offline picks the
// model up once it can be reached again.
class Deployer {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds

  Deployer(Transport& bus, DeployOptions options, Clock clock);

  // Throws std::invalid_argument for an unapproved artifact (nothing is
  // published). Supersedes any older deployment still waiting for receipts.
  void deploy(const ModelArtifact& artifact);

  // Reads receipts. Returns how many were new.
  std::size_t pump();
  // Re-sends to stations without a receipt whose last attempt is older than
  // the retry interval. Returns the number of sends.
  std::size_t retry_due();
  // pump + retry_due until every station answered or the timeout passes,
  // sleeping between rounds. For processes driven by real time.
  bool wait(std::chrono::milliseconds timeout, std::chrono::milliseconds poll = std::chrono::milliseconds(50));

  bool complete() const;
  std::int64_t current_version() const;
  std::vector<StationDeployState> states() const;
  std::map<std::string, DeployReceipt> receipts() const;

 private:
  void send_locked(StationDeployState& st);

  Transport& bus_;
  DeployOptions options_;
  Clock clock_;
  std::shared_ptr<Mailbox> inbox_;
  mutable std::mutex mu_;
  std::shared_ptr<const std::string> payload_;  // artifact JSON of current_version_
  std::int64_t current_version_ = 0;
  std::uint64_t send_counter_ = 0;
  std::map<std::string, StationDeployState> stations_;
};

}  // namespace edgepipe
