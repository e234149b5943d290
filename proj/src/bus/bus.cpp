#include "edgepipe/bus/bus.hpp"

#include <stdexcept>

#include "edgepipe/bus/topic.hpp"
#include "json.hpp"

namespace edgepipe {

std::string_view publish_status_name(PublishStatus s) {
  switch (s) {
    case PublishStatus::ack:
      return "ack";
    case PublishStatus::unknown_sender:
      return "unknown_sender";
    case PublishStatus::bad_auth:
      return "bad_auth";
    case PublishStatus::malformed:
      return "malformed";
    case PublishStatus::timeout:
      return "timeout";
  }
  return "timeout";
}

bool Mailbox::push(Envelope env) {
  std::unique_lock lock(mu_);
  not_full_.wait(lock, [&] { return closed_ || queue_.size() < capacity_; });
  if (closed_) return false;
  queue_.push_back(std::move(env));
  not_empty_.notify_one();
  return true;
}

std::optional<Envelope> Mailbox::try_pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  Envelope env = std::move(queue_.front());
  queue_.pop_front();
  not_full_.notify_one();
  return env;
}

std::optional<Envelope> Mailbox::pop_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); })) {
    return std::nullopt;
  }
  if (queue_.empty()) return std::nullopt;
  Envelope env = std::move(queue_.front());
  queue_.pop_front();
  not_full_.notify_one();
  return env;
}

std::vector<Envelope> Mailbox::drain() {
  std::lock_guard lock(mu_);
  std::vector<Envelope> out(std::make_move_iterator(queue_.begin()),
                            std::make_move_iterator(queue_.end()));
  queue_.clear();
  not_full_.notify_all();
  return out;
}

std::size_t Mailbox::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void Mailbox::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

InProcessBus::InProcessBus(KeyRing keys, std::size_t mailbox_capacity)
    : keys_(std::move(keys)), mailbox_capacity_(mailbox_capacity) {
  clock_ = [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

void InProcessBus::register_sender(const std::string& sender, std::string key) {
  std::lock_guard lock(mu_);
  keys_.add(sender, std::move(key));
}

void InProcessBus::set_clock(Clock clock) {
  std::lock_guard lock(mu_);
  clock_ = std::move(clock);
}

PublishStatus InProcessBus::validate(const Envelope& env) {
  const auto key = keys_.key_for(env.sender);
  if (!key) {
    ++stats_.rejected_unknown_sender;
    return PublishStatus::unknown_sender;
  }
  if (!verify(env, *key)) {
    ++stats_.rejected_bad_auth;
    return PublishStatus::bad_auth;
  }
  bool ok = !env.message_id.empty() && kind_matches_topic(env.payload_kind, env.topic);
  if (ok) {
    const auto body = nlohmann::json::parse(env.payload, nullptr, false);
    ok = !body.is_discarded() && body.is_object();
  }
  if (!ok) {
    ++stats_.rejected_malformed;
    return PublishStatus::malformed;
  }
  return PublishStatus::ack;
}

PublishStatus InProcessBus::publish(const Envelope& env) {
  std::lock_guard dispatch(dispatch_mu_);
  bool deliver_now = true;
  bool lose_ack = false;
  {
    std::lock_guard lock(mu_);
    release_due_locked();
    const auto status = validate(env);
    if (status != PublishStatus::ack) return status;

    if (partitions_.count(env.sender)) {
      ++stats_.dropped_by_fault;
      return PublishStatus::timeout;
    }
    for (const auto& target : {env.sender, std::string()}) {
      if (auto it = drop_next_.find(target); it != drop_next_.end() && it->second > 0) {
        --it->second;
        ++stats_.dropped_by_fault;
        return PublishStatus::timeout;
      }
    }
    for (const auto& target : {env.sender, std::string()}) {
      if (auto it = drop_ack_next_.find(target); it != drop_ack_next_.end() && it->second > 0) {
        --it->second;
        lose_ack = true;
        break;
      }
    }
    ++stats_.published;

    auto& pending = delayed_[env.sender];
    std::int64_t delay = 0;
    if (auto it = delay_ms_.find(env.sender); it != delay_ms_.end()) delay = it->second;
    if (auto it = delay_ms_.find(std::string()); it != delay_ms_.end()) delay = std::max(delay, it->second);
    if (delay > 0 || !pending.empty()) {
      // Queue behind earlier delayed envelopes of this sender to keep FIFO.
      std::int64_t due = clock_() + delay;
      if (!pending.empty()) due = std::max(due, pending.back().due_ms);
      pending.push_back({due, env});
      deliver_now = false;
    }
  }
  if (deliver_now) fan_out(env);
  return lose_ack ? PublishStatus::timeout : PublishStatus::ack;
}

void InProcessBus::fan_out(const Envelope& env) {
  std::vector<std::shared_ptr<Mailbox>> targets;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, sub] : subscribers_) {
      if (partitions_.count(id)) continue;
      for (const auto& filter : sub.filters) {
        if (topic_matches(filter, env.topic)) {
          targets.push_back(sub.mailbox);
          break;
        }
      }
    }
    stats_.delivered += targets.size();
  }
  for (auto& mb : targets) mb->push(env);
}

void InProcessBus::release_due_locked() {
  const auto now = clock_();
  std::vector<Envelope> ready;
  for (auto& [sender, queue] : delayed_) {
    while (!queue.empty() && queue.front().due_ms <= now) {
      ready.push_back(std::move(queue.front().env));
      queue.pop_front();
    }
  }
  if (ready.empty()) return;
  // fan_out takes mu_ itself.
  mu_.unlock();
  for (const auto& env : ready) fan_out(env);
  mu_.lock();
}

void InProcessBus::release_due() {
  std::lock_guard dispatch(dispatch_mu_);
  std::lock_guard lock(mu_);
  release_due_locked();
}

std::shared_ptr<Mailbox> InProcessBus::subscribe(const std::string& filter,
                                                 const std::string& subscriber) {
  if (!valid_filter(filter)) throw std::invalid_argument("invalid topic filter '" + filter + "'");
  std::lock_guard lock(mu_);
  auto& sub = subscribers_[subscriber];
  if (!sub.mailbox) sub.mailbox = std::make_shared<Mailbox>(subscriber, mailbox_capacity_);
  sub.filters.insert(filter);
  return sub.mailbox;
}

void InProcessBus::unsubscribe(const std::string& subscriber) {
  std::shared_ptr<Mailbox> mb;
  {
    std::lock_guard lock(mu_);
    auto it = subscribers_.find(subscriber);
    if (it == subscribers_.end()) return;
    mb = it->second.mailbox;
    subscribers_.erase(it);
  }
  mb->close();
}

void InProcessBus::inject_fault(const FaultSpec& fault) {
  std::lock_guard lock(mu_);
  switch (fault.kind) {
    case FaultSpec::Kind::drop_next_n:
      drop_next_[fault.target] += fault.n;
      break;
    case FaultSpec::Kind::drop_ack_next_n:
      drop_ack_next_[fault.target] += fault.n;
      break;
    case FaultSpec::Kind::delay:
      if (fault.delay_ms <= 0) {
        delay_ms_.erase(fault.target);
      } else {
        delay_ms_[fault.target] = fault.delay_ms;
      }
      break;
    case FaultSpec::Kind::partition:
      if (fault.target.empty()) throw std::invalid_argument("partition needs a target");
      partitions_.insert(fault.target);
      break;
  }
}

void InProcessBus::heal(const std::string& target) {
  std::lock_guard lock(mu_);
  partitions_.erase(target);
}

void InProcessBus::clear_faults() {
  std::lock_guard lock(mu_);
  drop_next_.clear();
  drop_ack_next_.clear();
  delay_ms_.clear();
  partitions_.clear();
}

std::size_t InProcessBus::held() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [sender, queue] : delayed_) n += queue.size();
  return n;
}

bool InProcessBus::partitioned(const std::string& id) const {
  std::lock_guard lock(mu_);
  return partitions_.count(id) != 0;
}

BusStats InProcessBus::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::set<std::string> InProcessBus::match_set(const std::string& topic) const {
  std::lock_guard lock(mu_);
  std::set<std::string> out;
  for (const auto& [id, sub] : subscribers_) {
    if (partitions_.count(id)) continue;
    for (const auto& filter : sub.filters) {
      if (topic_matches(filter, topic)) {
        out.insert(id);
        break;
      }
    }
  }
  return out;
}

}  // namespace edgepipe
