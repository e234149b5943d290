#include "edgepipe/orchestrator/alerts.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "edgepipe/common/errors.hpp"
#include "edgepipe/edge/agent.hpp"

namespace edgepipe {

nlohmann::ordered_json AlertRecord::to_json() const {
  nlohmann::ordered_json j;
  j["alert_id"] = alert_id;
  j["station"] = station;
  j["model_version"] = model_version;
  j["score"] = score;
  j["detected_at"] = detected_at;
  j["emitted_at"] = emitted_at;
  j["sink_status"] = sink_status;
  j["sample"] = sample_to_json(sample);
  return j;
}

AlertRecord AlertRecord::from_json(const nlohmann::json& j) {
  try {
    AlertRecord r;
    r.alert_id = j.at("alert_id").get<std::string>();
    r.station = j.at("station").get<std::string>();
    r.model_version = j.at("model_version").get<std::int64_t>();
    r.score = j.at("score").get<double>();
    r.detected_at = j.value("detected_at", std::int64_t{0});
    r.emitted_at = j.at("emitted_at").get<std::int64_t>();
    r.sink_status = j.at("sink_status").get<std::string>();
    r.sample = sample_from_json(j.at("sample"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("alert record: ") + e.what());
  }
}

std::vector<AlertRecord> read_alert_file(const std::filesystem::path& path) {
  std::vector<AlertRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("alert file " + path.string() + ": unparseable line");
    out.push_back(AlertRecord::from_json(j));
  }
  return out;
}

AlertDispatcher::AlertDispatcher(Transport& bus, AlertOptions options, Clock clock)
    : options_(std::move(options)), clock_(std::move(clock)) {
  poster_ = [this](const std::string& url, const std::string& body) {
    return post_webhook(url, body, options_.webhook_timeout);
  };
  for (const auto& p : {options_.sink, options_.dead_letter}) {
    for (const auto& r : read_alert_file(p)) seen_.insert(r.alert_id);
  }
  for (const auto& f : options_.filters) mailbox_ = bus.subscribe(f, options_.subscriber);
}

bool AlertDispatcher::append_with_retry(const std::filesystem::path& path, const std::string& line) {
  auto delay = options_.backoff;
  for (int attempt = 1; attempt <= std::max(options_.max_attempts, 1); ++attempt) {
    {
      std::ofstream out(path, std::ios::app | std::ios::binary);
      if (out) {
        out << line << '\n';
        out.flush();
        if (out) return true;
      }
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  return false;
}

std::optional<AlertRecord> AlertDispatcher::dispatch(const Envelope& env) {
  std::lock_guard lock(mu_);
  ++stats_.received;
  if (env.payload_kind != PayloadKind::anomaly_report) {
    ++stats_.invalid;
    return std::nullopt;
  }
  AnomalyReport report;
  try {
    report = AnomalyReport::from_json(nlohmann::json::parse(env.payload));
  } catch (const std::exception&) {
    ++stats_.invalid;
    return std::nullopt;
  }
  if (seen_.count(env.message_id)) {
    ++stats_.duplicates;
    return std::nullopt;
  }

  AlertRecord rec;
  rec.alert_id = env.message_id;
  rec.station = report.station;
  rec.sample = report.sample;
  rec.model_version = report.model_version;
  rec.score = report.score;
  rec.detected_at = report.detected_at;
  rec.emitted_at = clock_();
  rec.sink_status = "written";

  bool webhook_failed = false;
  if (!options_.webhook_url.empty()) {
    const std::string body = rec.to_json().dump();
    bool ok = false;
    auto delay = options_.backoff;
    for (int attempt = 1; attempt <= std::max(options_.max_attempts, 1) && !ok; ++attempt) {
      ok = poster_(options_.webhook_url, body);
      if (!ok && attempt < options_.max_attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
    rec.sink_status = ok ? "webhook_ok" : "webhook_failed";
    if (!ok) {
      ++stats_.webhook_failures;
      webhook_failed = true;
    }
  }

  const std::string line = rec.to_json().dump();
  const bool written = append_with_retry(options_.sink, line);
  if (!written) {
    ++stats_.sink_failures;
    rec.sink_status = "sink_failed";
  }
  if (!written || webhook_failed) {
    if (!append_with_retry(options_.dead_letter, rec.to_json().dump())) {
      throw IoError("alerts: cannot write sink " + options_.sink.string() + " or dead letter " +
                    options_.dead_letter.string());
    }
    ++stats_.dead_lettered;
  }
  seen_.insert(env.message_id);
  ++stats_.dispatched;
  return rec;
}

std::size_t AlertDispatcher::pump() {
  std::size_t n = 0;
  for (auto& env : mailbox_->drain()) n += dispatch(env) ? 1 : 0;
  return n;
}

std::size_t AlertDispatcher::pump_for(std::chrono::milliseconds timeout) {
  std::size_t n = 0;
  if (auto env = mailbox_->pop_for(timeout)) n += dispatch(*env) ? 1 : 0;
  return n + pump();
}

AlertStats AlertDispatcher::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace edgepipe
