#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgepipe/bus/envelope.hpp"

namespace edgepipe {

enum class PublishStatus {
  ack,             // received and verified; fanned out (or held by a delay fault)
  unknown_sender,  // sender has no registered key
  bad_auth,        // auth_tag does not verify
  malformed,       // invalid topic, kind/namespace mismatch, or payload not JSON
  timeout,         // transport failure: no ack reached the publisher
};

std::string_view publish_status_name(PublishStatus s);

// Bounded FIFO of delivered envelopes for one subscriber. push() blocks
// while full (publisher backpressure) unless the mailbox is closed.
class Mailbox {
 public:
  explicit Mailbox(std::string subscriber, std::size_t capacity = 4096)
      : subscriber_(std::move(subscriber)), capacity_(capacity) {}

  const std::string& subscriber() const { return subscriber_; }

  bool push(Envelope env);
  std::optional<Envelope> try_pop();
  std::optional<Envelope> pop_for(std::chrono::milliseconds timeout);
  std::vector<Envelope> drain();
  std::size_t size() const;
  void close();

 private:
  std::string subscriber_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<Envelope> queue_;
  bool closed_ = false;
};

// Common surface of the in-process bus and the TCP client.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual PublishStatus publish(const Envelope& env) = 0;
  // Idempotent per (filter, subscriber). All filters of one subscriber share
  // a single mailbox, so each matching publish is delivered to it once.
  // Throws std::invalid_argument on a bad filter.
  virtual std::shared_ptr<Mailbox> subscribe(const std::string& filter,
                                             const std::string& subscriber) = 0;
};

struct FaultSpec {
  enum class Kind {
    drop_next_n,      // next n publishes from target are lost; publisher sees timeout
    drop_ack_next_n,  // next n publishes are delivered but the ack is lost
    delay,            // deliveries from target held for delay_ms of bus clock
    partition,        // target can neither publish nor receive until healed
  };
  Kind kind = Kind::drop_next_n;
  std::string target;  // sender/station id; empty matches every sender (not for partition)
  int n = 0;
  std::int64_t delay_ms = 0;
};

struct BusStats {
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;  // mailbox pushes
  std::uint64_t rejected_unknown_sender = 0;
  std::uint64_t rejected_bad_auth = 0;
  std::uint64_t rejected_malformed = 0;
  std::uint64_t dropped_by_fault = 0;
};

class InProcessBus : public Transport {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds

  explicit InProcessBus(KeyRing keys, std::size_t mailbox_capacity = 4096);

  PublishStatus publish(const Envelope& env) override;
  std::shared_ptr<Mailbox> subscribe(const std::string& filter,
                                     const std::string& subscriber) override;
  void unsubscribe(const std::string& subscriber);

  void register_sender(const std::string& sender, std::string key);
  const KeyRing& keys() const { return keys_; }

  void inject_fault(const FaultSpec& fault);
  void heal(const std::string& target);
  void clear_faults();
  bool partitioned(const std::string& id) const;
  // Envelopes accepted but still held back by a delay fault.
  std::size_t held() const;

  // Default clock is std::chrono::steady_clock; simulations install a
  // virtual one. release_due() delivers delayed envelopes whose time came.
  void set_clock(Clock clock);
  void release_due();

  BusStats stats() const;
  // Subscribers whose filters match `topic`, for fan-out checks.
  std::set<std::string> match_set(const std::string& topic) const;

 private:
  struct Subscriber {
    std::shared_ptr<Mailbox> mailbox;
    std::set<std::string> filters;
  };
  struct Delayed {
    std::int64_t due_ms;
    Envelope env;
  };

  PublishStatus validate(const Envelope& env);
  void fan_out(const Envelope& env);
  void release_due_locked();

  mutable std::mutex mu_;        // subscriptions, faults, stats
  std::mutex dispatch_mu_;       // serializes fan-out: per-publisher FIFO
  KeyRing keys_;
  std::size_t mailbox_capacity_;
  std::map<std::string, Subscriber> subscribers_;
  std::map<std::string, int> drop_next_;
  std::map<std::string, int> drop_ack_next_;
  std::map<std::string, std::int64_t> delay_ms_;
  std::set<std::string> partitions_;
  std::map<std::string, std::deque<Delayed>> delayed_;  // by sender
  Clock clock_;
  BusStats stats_;
};

}  // namespace edgepipe
