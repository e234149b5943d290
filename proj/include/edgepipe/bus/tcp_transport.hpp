#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "edgepipe/bus/bus.hpp"

namespace edgepipe {

// Frames on the wire: 4-byte big-endian length, then that many bytes of
// UTF-8 envelope JSON (envelope_to_wire). See docs/protocol.md.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

bool write_frame(int fd, std::string_view body);
std::optional<std::string> read_frame(int fd);

inline constexpr std::string_view kSubscribeTopic = "$sys/subscribe";
inline constexpr std::string_view kReplyTopic = "$sys/reply";
inline constexpr std::string_view kDeliverTopicPrefix = "$sys/deliver/";

// Exposes an InProcessBus over TCP. One reader thread per connection and one
// forwarder thread per subscription on that connection.
class BusServer {
 public:
  // port 0 picks an ephemeral port; see port().
  BusServer(InProcessBus& bus, std::uint16_t port, const std::string& bind_address = "127.0.0.1");
  ~BusServer();

  BusServer(const BusServer&) = delete;
  BusServer& operator=(const BusServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  struct Connection;
  void accept_loop(std::stop_token stop);
  void serve(std::shared_ptr<Connection> conn, std::stop_token stop);

  InProcessBus& bus_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::mutex mu_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::jthread acceptor_;
};

class TcpBusClient : public Transport {
 public:
  // `identity`/`key` authenticate subscribe requests; published envelopes
  // carry their own signatures.
  TcpBusClient(const std::string& host, std::uint16_t port, std::string identity, std::string key,
               std::chrono::milliseconds reply_timeout = std::chrono::seconds(5));
  ~TcpBusClient() override;

  PublishStatus publish(const Envelope& env) override;
  std::shared_ptr<Mailbox> subscribe(const std::string& filter,
                                     const std::string& subscriber) override;
  bool connected() const { return connected_; }

 private:
  void reader_loop(std::stop_token stop);
  std::optional<std::string> request(const Envelope& env);

  int fd_ = -1;
  std::string identity_;
  std::string key_;
  std::chrono::milliseconds reply_timeout_;
  std::atomic<bool> connected_{false};
  std::atomic<std::uint64_t> request_counter_{0};
  std::mutex write_mu_;
  std::mutex mu_;
  std::condition_variable replies_cv_;
  std::map<std::string, std::string> replies_;  // in_reply_to -> status
  std::map<std::string, std::shared_ptr<Mailbox>> mailboxes_;
  std::jthread reader_;
};

// "host:port" -> pair. Throws std::invalid_argument.
std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text);

}  // namespace edgepipe
