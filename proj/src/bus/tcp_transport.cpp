#include "edgepipe/bus/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "edgepipe/bus/topic.hpp"
#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"
#include "json.hpp"

namespace edgepipe {

namespace {

bool write_all(int fd, const char* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, char* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

Envelope make_reply(const std::string& in_reply_to, std::string_view status) {
  Envelope reply;
  reply.message_id = "reply/" + in_reply_to;
  reply.topic = std::string(kReplyTopic);
  reply.sender = "bus";
  reply.payload_kind = PayloadKind::ack;
  nlohmann::ordered_json body;
  body["in_reply_to"] = in_reply_to;
  body["status"] = status;
  reply.payload = body.dump();
  return reply;
}

}  // namespace

bool write_frame(int fd, std::string_view body) {
  std::string header;
  put_u32_be(header, static_cast<std::uint32_t>(body.size()));
  return write_all(fd, header.data(), header.size()) && write_all(fd, body.data(), body.size());
}

std::optional<std::string> read_frame(int fd) {
  unsigned char header[4];
  if (!read_all(fd, reinterpret_cast<char*>(header), 4)) return std::nullopt;
  const std::uint32_t len = get_u32_be(header);
  if (len > kMaxFrameBytes) return std::nullopt;
  std::string body(len, '\0');
  if (!read_all(fd, body.data(), len)) return std::nullopt;
  return body;
}

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("expected host:port, got " + text);
  const int port = std::stoi(text.substr(colon + 1));
  if (port <= 0 || port > 65535) throw std::invalid_argument("bad port in " + text);
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

struct BusServer::Connection {
  int fd = -1;
  std::mutex write_mu;
  std::vector<std::string> subscribers;
  std::vector<std::jthread> forwarders;
  std::jthread reader;

  bool send(const Envelope& env) {
    std::lock_guard lock(write_mu);
    return write_frame(fd, envelope_to_wire(env));
  }
};

BusServer::BusServer(InProcessBus& bus, std::uint16_t port, const std::string& bind_address)
    : bus_(bus) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::invalid_argument("bad bind address " + bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 64) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError("bind/listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::jthread([this](std::stop_token st) { accept_loop(st); });
}

BusServer::~BusServer() { stop(); }

void BusServer::stop() {
  if (acceptor_.joinable()) {
    acceptor_.request_stop();
    acceptor_.join();
  }
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(mu_);
    conns.swap(connections_);
  }
  for (auto& c : conns) {
    ::shutdown(c->fd, SHUT_RDWR);
    c->reader.request_stop();
    if (c->reader.joinable()) c->reader.join();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void BusServer::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    conn->reader = std::jthread([this, conn](std::stop_token st) { serve(conn, st); });
    std::lock_guard lock(mu_);
    connections_.push_back(conn);
  }
}

void BusServer::serve(std::shared_ptr<Connection> conn, std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto frame = read_frame(conn->fd);
    if (!frame) break;
    Envelope env;
    try {
      env = envelope_from_wire(*frame);
    } catch (const DataError&) {
      conn->send(make_reply("", publish_status_name(PublishStatus::malformed)));
      continue;
    }
    if (env.topic == kSubscribeTopic) {
      std::string status = "ack";
      const auto key = bus_.keys().key_for(env.sender);
      const auto body = nlohmann::json::parse(env.payload, nullptr, false);
      if (!key) {
        status = publish_status_name(PublishStatus::unknown_sender);
      } else if (!verify(env, *key)) {
        status = publish_status_name(PublishStatus::bad_auth);
      } else if (body.is_discarded() || !body.contains("filter") || !body.contains("subscriber") ||
                 !valid_filter(body["filter"].get<std::string>())) {
        status = publish_status_name(PublishStatus::malformed);
      } else {
        const std::string subscriber = body["subscriber"].get<std::string>();
        const bool fresh = std::find(conn->subscribers.begin(), conn->subscribers.end(),
                                     subscriber) == conn->subscribers.end();
        auto mailbox = bus_.subscribe(body["filter"].get<std::string>(), subscriber);
        if (fresh) {
          conn->subscribers.push_back(subscriber);
          conn->forwarders.emplace_back([conn, mailbox, subscriber](std::stop_token st) {
            std::uint64_t n = 0;
            while (!st.stop_requested()) {
              auto delivered = mailbox->pop_for(std::chrono::milliseconds(50));
              if (!delivered) continue;
              Envelope wrap;
              wrap.message_id = "deliver/" + std::to_string(++n);
              wrap.topic = std::string(kDeliverTopicPrefix) + subscriber;
              wrap.sender = "bus";
              wrap.payload_kind = delivered->payload_kind;
              wrap.payload = envelope_to_wire(*delivered);
              if (!conn->send(wrap)) break;
            }
          });
        }
      }
      conn->send(make_reply(env.message_id, status));
      continue;
    }
    const auto status = bus_.publish(env);
    // A lost ack is modeled by not replying at all.
    if (status != PublishStatus::timeout) {
      conn->send(make_reply(env.message_id, publish_status_name(status)));
    }
  }
  for (auto& f : conn->forwarders) f.request_stop();
  for (auto& f : conn->forwarders) {
    if (f.joinable()) f.join();
  }
  for (const auto& s : conn->subscribers) bus_.unsubscribe(s);
  ::close(conn->fd);
}

TcpBusClient::TcpBusClient(const std::string& host, std::uint16_t port, std::string identity,
                           std::string key, std::chrono::milliseconds reply_timeout)
    : identity_(std::move(identity)), key_(std::move(key)), reply_timeout_(reply_timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw IoError("cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0) {
    const std::string err = std::strerror(errno);
    if (fd_ >= 0) ::close(fd_);
    throw IoError("connect " + host + ":" + std::to_string(port) + ": " + err);
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  connected_ = true;
  reader_ = std::jthread([this](std::stop_token st) { reader_loop(st); });
}

TcpBusClient::~TcpBusClient() {
  ::shutdown(fd_, SHUT_RDWR);
  reader_.request_stop();
  if (reader_.joinable()) reader_.join();
  ::close(fd_);
  std::lock_guard lock(mu_);
  for (auto& [id, mb] : mailboxes_) mb->close();
}

void TcpBusClient::reader_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto frame = read_frame(fd_);
    if (!frame) break;
    Envelope env;
    try {
      env = envelope_from_wire(*frame);
    } catch (const DataError&) {
      continue;
    }
    if (env.topic == kReplyTopic) {
      const auto body = nlohmann::json::parse(env.payload, nullptr, false);
      if (body.is_discarded()) continue;
      std::lock_guard lock(mu_);
      replies_[body.value("in_reply_to", "")] = body.value("status", "malformed");
      replies_cv_.notify_all();
    } else if (env.topic.rfind(kDeliverTopicPrefix, 0) == 0) {
      const std::string subscriber = env.topic.substr(kDeliverTopicPrefix.size());
      std::shared_ptr<Mailbox> mb;
      {
        std::lock_guard lock(mu_);
        auto it = mailboxes_.find(subscriber);
        if (it != mailboxes_.end()) mb = it->second;
      }
      if (!mb) continue;
      try {
        mb->push(envelope_from_wire(env.payload));
      } catch (const DataError&) {
      }
    }
  }
  connected_ = false;
  replies_cv_.notify_all();
}

std::optional<std::string> TcpBusClient::request(const Envelope& env) {
  if (!connected_) return std::nullopt;
  {
    std::lock_guard lock(write_mu_);
    if (!write_frame(fd_, envelope_to_wire(env))) return std::nullopt;
  }
  std::unique_lock lock(mu_);
  const bool got = replies_cv_.wait_for(lock, reply_timeout_, [&] {
    return replies_.count(env.message_id) != 0 || !connected_;
  });
  if (!got || replies_.count(env.message_id) == 0) return std::nullopt;
  auto status = replies_[env.message_id];
  replies_.erase(env.message_id);
  return status;
}

PublishStatus TcpBusClient::publish(const Envelope& env) {
  const auto status = request(env);
  if (!status) return PublishStatus::timeout;
  for (auto s : {PublishStatus::ack, PublishStatus::unknown_sender, PublishStatus::bad_auth,
                 PublishStatus::malformed}) {
    if (*status == publish_status_name(s)) return s;
  }
  return PublishStatus::timeout;
}

std::shared_ptr<Mailbox> TcpBusClient::subscribe(const std::string& filter,
                                                 const std::string& subscriber) {
  if (!valid_filter(filter)) throw std::invalid_argument("invalid topic filter '" + filter + "'");
  std::shared_ptr<Mailbox> mb;
  {
    std::lock_guard lock(mu_);
    auto& slot = mailboxes_[subscriber];
    if (!slot) slot = std::make_shared<Mailbox>(subscriber);
    mb = slot;
  }
  Envelope req;
  req.message_id = identity_ + "/sub/" + std::to_string(++request_counter_);
  req.topic = std::string(kSubscribeTopic);
  req.sender = identity_;
  req.payload_kind = PayloadKind::ack;
  nlohmann::ordered_json body;
  body["filter"] = filter;
  body["subscriber"] = subscriber;
  req.payload = body.dump();
  sign(req, key_);
  const auto status = request(req);
  if (!status) throw IoError("subscribe " + filter + ": no reply from bus");
  if (*status != "ack") throw DataError("subscribe " + filter + " rejected: " + *status);
  return mb;
}

}  // namespace edgepipe
