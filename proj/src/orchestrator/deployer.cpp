#include "edgepipe/orchestrator/deployer.hpp"

#include <stdexcept>
#include <thread>

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

Deployer::Deployer(Transport& bus, DeployOptions options, Clock clock)
    : bus_(bus), options_(std::move(options)), clock_(std::move(clock)) {
  for (const auto& s : options_.stations) inbox_ = bus_.subscribe(model_topic(s), options_.sender);
}

void Deployer::send_locked(StationDeployState& st) {
  Envelope env;
  env.message_id = options_.sender + "/deploy/" + std::to_string(st.version) + "/" + st.station + "/" +
                   std::to_string(++send_counter_);
  env.topic = model_topic(st.station);
  env.sender = options_.sender;
  env.payload_kind = PayloadKind::model_deploy;
  env.payload = *payload_;
  sign(env, options_.key);
  ++st.attempts;
  st.last_sent_ms = clock_();
  try {
    st.last_status = bus_.publish(env);
  } catch (const IoError&) {
    st.last_status = PublishStatus::timeout;
  }
}

void Deployer::deploy(const ModelArtifact& artifact) {
  if (!artifact.approved) {
    throw std::invalid_argument("deploy: model v" + std::to_string(artifact.version) + " is not approved");
  }
  std::lock_guard lock(mu_);
  payload_ = std::make_shared<const std::string>(artifact.to_json().dump());
  current_version_ = artifact.version;
  for (const auto& s : options_.stations) {
    StationDeployState st;
    st.station = s;
    st.version = artifact.version;
    stations_[s] = st;
    send_locked(stations_[s]);
  }
}

std::size_t Deployer::pump() {
  if (!inbox_) return 0;
  std::size_t fresh = 0;
  for (auto& env : inbox_->drain()) {
    if (env.payload_kind != PayloadKind::ack) continue;  // our own deploys
    DeployReceipt r;
    try {
      r = DeployReceipt::from_json(nlohmann::json::parse(env.payload));
    } catch (const std::exception&) {
      continue;
    }
    if (r.station != env.sender) continue;
    std::lock_guard lock(mu_);
    auto it = stations_.find(r.station);
    if (it == stations_.end() || r.version != it->second.version || it->second.receipt) continue;
    it->second.receipt = r;
    ++fresh;
  }
  return fresh;
}

std::size_t Deployer::retry_due() {
  std::lock_guard lock(mu_);
  std::size_t sent = 0;
  const auto now = clock_();
  for (auto& [name, st] : stations_) {
    if (st.receipt || now - st.last_sent_ms < options_.retry_interval_ms) continue;
    send_locked(st);
    ++sent;
  }
  return sent;
}

bool Deployer::wait(std::chrono::milliseconds timeout, std::chrono::milliseconds poll) {
  const auto end = std::chrono::steady_clock::now() + timeout;
  while (true) {
    pump();
    if (complete()) return true;
    if (std::chrono::steady_clock::now() >= end) return false;
    retry_due();
    std::this_thread::sleep_for(poll);
  }
}

bool Deployer::complete() const {
  std::lock_guard lock(mu_);
  if (stations_.empty()) return false;
  for (const auto& [name, st] : stations_) {
    if (!st.receipt) return false;
  }
  return true;
}

std::int64_t Deployer::current_version() const {
  std::lock_guard lock(mu_);
  return current_version_;
}

std::vector<StationDeployState> Deployer::states() const {
  std::lock_guard lock(mu_);
  std::vector<StationDeployState> out;
  for (const auto& [name, st] : stations_) out.push_back(st);
  return out;
}

std::map<std::string, DeployReceipt> Deployer::receipts() const {
  std::lock_guard lock(mu_);
  std::map<std::string, DeployReceipt> out;
  for (const auto& [name, st] : stations_) {
    if (st.receipt) out.emplace(name, *st.receipt);
  }
  return out;
}

}  // namespace edgepipe
