#include "edgepipe/edge/agent.hpp"

#include <cmath>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

nlohmann::ordered_json AnomalyReport::to_json() const {
  nlohmann::ordered_json j;
  j["station"] = station;
  j["sample"] = sample_to_json(sample);
  j["score"] = score;
  j["model_version"] = model_version;
  j["detected_at"] = detected_at;
  return j;
}

AnomalyReport AnomalyReport::from_json(const nlohmann::json& j) {
  try {
    AnomalyReport r;
    r.station = j.at("station").get<std::string>();
    r.sample = sample_from_json(j.at("sample"));
    r.score = j.at("score").get<double>();
    r.model_version = j.at("model_version").get<std::int64_t>();
    r.detected_at = j.at("detected_at").get<std::int64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("anomaly report: ") + e.what());
  }
}

nlohmann::ordered_json DeployReceipt::to_json() const {
  nlohmann::ordered_json j;
  j["station"] = station;
  j["version"] = version;
  j["accepted"] = accepted;
  j["active_version"] = active_version;
  j["reason"] = reason;
  return j;
}

DeployReceipt DeployReceipt::from_json(const nlohmann::json& j) {
  try {
    DeployReceipt r;
    r.station = j.at("station").get<std::string>();
    r.version = j.at("version").get<std::int64_t>();
    r.accepted = j.at("accepted").get<bool>();
    r.active_version = j.at("active_version").get<std::int64_t>();
    r.reason = j.value("reason", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("deploy receipt: ") + e.what());
  }
}

EdgeAgent::EdgeAgent(AgentConfig config, Transport& bus, Clock clock)
    : config_(std::move(config)),
      bus_(bus),
      clock_(std::move(clock)),
      cache_(config_.cache_dir, config_.cache) {
  if (config_.station.empty()) throw std::invalid_argument("agent needs a station");
  if (config_.tick_period_s <= 0 || config_.flush_period_s <= 0) {
    throw std::invalid_argument("agent periods must be positive");
  }
  control_ = bus_.subscribe(model_topic(config_.station), config_.station);
  load_outbox();
  last_flush_ = clock_();
}

CacheEntry EdgeAgent::ingest_tick(const SensorSample& sample) {
  try {
    auto e = cache_.append(sample);
    ++stats_.ingested;
    return e;
  } catch (const CacheFullError&) {
    ++stats_.cache_full;
    throw;
  }
}

std::size_t EdgeAgent::flush_batch() {
  const auto batch = cache_.pending(config_.max_batch);
  if (batch.empty()) return 0;
  ++stats_.flushes;
  std::vector<SensorSample> samples;
  samples.reserve(batch.size());
  for (const auto& e : batch) samples.push_back(e.sample);
  Envelope env;
  env.message_id = config_.station + "/b/" + std::to_string(cache_.session()) + "/" +
                   std::to_string(++batch_counter_);
  env.topic = data_topic(config_.station);
  env.sender = config_.station;
  env.payload_kind = PayloadKind::sample_batch;
  env.payload = samples_to_batch_payload(samples);
  sign(env, config_.key);
  PublishStatus status = PublishStatus::timeout;
  try {
    status = bus_.publish(env);
  } catch (const IoError&) {
    status = PublishStatus::timeout;
  }
  if (status != PublishStatus::ack) {
    ++stats_.flush_failures;
    return 0;
  }
  const auto n = cache_.ack_through(batch.back().enqueue_seq);
  stats_.acked += n;
  return n;
}

int EdgeAgent::score_local(const SensorSample& sample) {
  std::shared_ptr<const ModelArtifact> artifact;
  std::int64_t version = 0;
  {
    std::lock_guard lock(model_mu_);
    if (model_) {
      artifact = model_->artifact;
      version = model_->version;
    }
  }
  const IsolationForestModel* detector = artifact ? artifact->detector_for(config_.station) : nullptr;
  if (!detector) {
    ++stats_.no_model;
    return 1;
  }
  ++stats_.scored;
  std::vector<double> x(sample.readings.begin(), sample.readings.end());
  for (double& v : x) {
    if (!std::isfinite(v)) v = 0.0;  // same fill rule as the cleaner
  }
  const double s = detector->score(x);
  const int verdict = detector->verdict_for_score(s);
  if (verdict == -1) {
    ++stats_.anomalies;
    AnomalyReport r{config_.station, sample, s, version, clock_()};
    outbox_.emplace_back(config_.station + "/anomaly/" + sample.sample_id, std::move(r));
    save_outbox();
  }
  return verdict;
}

DeployedModel EdgeAgent::activate_model(const ModelArtifact& artifact) {
  std::lock_guard lock(model_mu_);
  const std::int64_t current = model_ ? model_->version : 0;
  auto reject = [&](const std::string& why) {
    ++stats_.models_rejected;
    throw ModelRejected("model v" + std::to_string(artifact.version) + " rejected: " + why);
  };
  if (!artifact.approved) reject("not approved");
  if (artifact.version <= current) reject("version is not newer than active v" + std::to_string(current));
  if (!artifact.detector_for(config_.station)) reject("no detector for " + config_.station);
  model_ = DeployedModel{std::make_shared<const ModelArtifact>(artifact), clock_(), artifact.version};
  ++stats_.models_activated;
  return *model_;
}

void EdgeAgent::send_receipt(const DeployReceipt& r) {
  Envelope env;
  env.message_id = config_.station + "/receipt/" + std::to_string(r.version) + "/" +
                   std::to_string(cache_.session()) + "/" + std::to_string(++batch_counter_);
  env.topic = model_topic(config_.station);
  env.sender = config_.station;
  env.payload_kind = PayloadKind::ack;
  env.payload = r.to_json().dump();
  sign(env, config_.key);
  try {
    bus_.publish(env);
  } catch (const IoError&) {
    // Lost receipts are recovered by the deployer re-sending.
  }
}

std::size_t EdgeAgent::poll_control() {
  std::size_t handled = 0;
  while (auto env = control_->try_pop()) {
    if (env->payload_kind != PayloadKind::model_deploy) continue;  // our own receipts
    ++handled;
    DeployReceipt r;
    r.station = config_.station;
    try {
      const auto artifact = ModelArtifact::from_json(nlohmann::json::parse(env->payload));
      r.version = artifact.version;
      if (artifact.version == active_version()) {
        r.accepted = true;  // redelivery of what we already run
      } else {
        activate_model(artifact);
        r.accepted = true;
      }
    } catch (const std::exception& e) {
      r.reason = e.what();
    }
    r.active_version = active_version();
    send_receipt(r);
  }
  return handled;
}

std::size_t EdgeAgent::flush_reports() {
  std::size_t sent = 0;
  std::vector<std::pair<std::string, AnomalyReport>> keep;
  for (auto& [id, report] : outbox_) {
    Envelope env;
    env.message_id = id;
    env.topic = anomaly_topic(config_.station);
    env.sender = config_.station;
    env.payload_kind = PayloadKind::anomaly_report;
    env.payload = report.to_json().dump();
    sign(env, config_.key);
    PublishStatus st = PublishStatus::timeout;
    try {
      st = bus_.publish(env);
    } catch (const IoError&) {
    }
    if (st == PublishStatus::ack) {
      ++sent;
      ++stats_.reports_sent;
    } else {
      ++stats_.report_failures;
      keep.emplace_back(std::move(id), std::move(report));
    }
  }
  outbox_ = std::move(keep);
  if (sent) save_outbox();
  return sent;
}

int EdgeAgent::step(const SensorSample& sample) {
  poll_control();
  try {
    ingest_tick(sample);
  } catch (const CacheFullError&) {
    // Backpressure: this tick's sample is not cached; scoring still runs.
  }
  const int verdict = score_local(sample);
  const auto now = clock_();
  if (now - last_flush_ >= config_.flush_period_s) {
    last_flush_ = now;
    flush_batch();
    flush_reports();
  }
  return verdict;
}

std::optional<DeployedModel> EdgeAgent::active_model() const {
  std::lock_guard lock(model_mu_);
  return model_;
}

std::int64_t EdgeAgent::active_version() const {
  std::lock_guard lock(model_mu_);
  return model_ ? model_->version : 0;
}

void EdgeAgent::save_outbox() const {
  std::string text;
  for (const auto& [id, r] : outbox_) {
    nlohmann::ordered_json j;
    j["message_id"] = id;
    j["report"] = r.to_json();
    text += j.dump();
    text += '\n';
  }
  write_file_atomic(config_.cache_dir / "outbox.ndjson", text);
}

void EdgeAgent::load_outbox() {
  const auto path = config_.cache_dir / "outbox.ndjson";
  if (!std::filesystem::exists(path)) return;
  const std::string text = read_file(path);
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string::npos) break;  // torn last line
    const auto j = nlohmann::json::parse(text.substr(start, end - start), nullptr, false);
    if (j.is_discarded()) throw DataError("agent: corrupt outbox " + path.string());
    outbox_.emplace_back(j.at("message_id").get<std::string>(), AnomalyReport::from_json(j.at("report")));
    start = end + 1;
  }
}

}  // namespace edgepipe
