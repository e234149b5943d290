#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgepipe/bus/bus.hpp"
#include "edgepipe/sensor/sample.hpp"
#include "json.hpp"

namespace edgepipe {

// One line of the alert sink. alert_id is the message_id of the anomaly
// report envelope, which makes redeliveries detectable.
struct AlertRecord {
  std::string alert_id;
  std::string station;
  SensorSample sample;
  std::int64_t model_version = 0;
  double score = 0.0;
  std::int64_t detected_at = 0;  // agent clock
  std::int64_t emitted_at = 0;   // dispatcher clock
  // "written" (no webhook configured), "webhook_ok", "webhook_failed",
  // or "sink_failed" (only ever seen in the dead-letter file).
  std::string sink_status;

  nlohmann::ordered_json to_json() const;
  static AlertRecord from_json(const nlohmann::json& j);  // DataError
};

// Reads an NDJSON file of AlertRecords; a torn last line is ignored.
std::vector<AlertRecord> read_alert_file(const std::filesystem::path& path);

// POSTs a JSON body to an http:// URL. Returns true on a 2xx answer.
bool post_webhook(const std::string& url, const std::string& body, std::chrono::milliseconds timeout);

struct AlertOptions {
  std::string subscriber = "alerts";
  std::vector<std::string> filters = {"+/+/+/+/anomaly", "alerts"};
  std::filesystem::path sink = "alerts.ndjson";
  std::filesystem::path dead_letter = "alerts.dead.ndjson";
  std::string webhook_url;  // empty: no webhook
  int max_attempts = 3;     // per sink write and per webhook post
  std::chrono::milliseconds backoff{100};  // doubled after each failed attempt
  std::chrono::milliseconds webhook_timeout{2000};
};

struct AlertStats {
  std::uint64_t received = 0;
  std::uint64_t dispatched = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t invalid = 0;
  std::uint64_t webhook_failures = 0;
  std::uint64_t sink_failures = 0;
  std::uint64_t dead_lettered = 0;
};

// Independent consumer of anomaly reports. Appends one AlertRecord per
// distinct envelope to the sink (the stand-in for the notification email)
// and optionally POSTs it to a webhook. Seen ids are reloaded from the sink
// and dead-letter files on construction so restarts do not duplicate.
class AlertDispatcher {
 public:
  using Clock = std::function<std::int64_t()>;  // epoch seconds
  using Poster = std::function<bool(const std::string& url, const std::string& body)>;

  AlertDispatcher(Transport& bus, AlertOptions options, Clock clock);

  // nullopt for duplicates and envelopes that are not valid anomaly reports.
  std::optional<AlertRecord> dispatch(const Envelope& env);
  // Handles everything waiting in the mailbox.
  std::size_t pump();
  // Waits up to `timeout` for one envelope, then drains.
  std::size_t pump_for(std::chrono::milliseconds timeout);

  // Replaces the HTTP client (tests).
  void set_poster(Poster poster) { poster_ = std::move(poster); }

  AlertStats stats() const;
  const AlertOptions& options() const { return options_; }

 private:
  bool append_with_retry(const std::filesystem::path& path, const std::string& line);

  AlertOptions options_;
  Clock clock_;
  Poster poster_;
  std::shared_ptr<Mailbox> mailbox_;
  mutable std::mutex mu_;
  std::set<std::string> seen_;
  AlertStats stats_;
};

}  // namespace edgepipe
