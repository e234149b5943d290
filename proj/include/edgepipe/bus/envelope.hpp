#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace edgepipe {

enum class PayloadKind { sample_batch, anomaly_report, model_deploy, ack };

std::string_view payload_kind_name(PayloadKind k);
std::optional<PayloadKind> payload_kind_from_name(std::string_view name);

struct Envelope {
  std::string message_id;
  std::string topic;
  std::string sender;
  PayloadKind payload_kind = PayloadKind::ack;
  std::string payload;   // serialized JSON body
  std::string auth_tag;  // lowercase hex HMAC-SHA256

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

// Wire form: a JSON object with keys in the fixed order message_id, topic,
// sender, payload_kind, payload, auth_tag.
std::string envelope_to_wire(const Envelope& env);
// Throws DataError on malformed input.
Envelope envelope_from_wire(std::string_view text);

// HMAC-SHA256 over each of (message_id, topic, sender, payload_kind,
// payload) as a 4-byte big-endian length followed by the bytes.
std::string compute_auth_tag(std::string_view key, const Envelope& env);
void sign(Envelope& env, std::string_view key);
bool verify(const Envelope& env, std::string_view key);

// Whether the topic namespace admits this payload kind:
//   <station>/data -> sample_batch, <station>/anomaly -> anomaly_report,
//   <station>/model -> model_deploy or ack, alerts -> anomaly_report.
bool kind_matches_topic(PayloadKind kind, std::string_view topic);

std::string data_topic(std::string_view station);
std::string anomaly_topic(std::string_view station);
std::string model_topic(std::string_view station);
inline constexpr std::string_view kAlertsTopic = "alerts";

// Registered sender keys (raw bytes).
class KeyRing {
 public:
  void add(const std::string& sender, std::string key) { keys_[sender] = std::move(key); }
  std::optional<std::string> key_for(const std::string& sender) const;
  bool contains(const std::string& sender) const { return keys_.count(sender) != 0; }
  const std::map<std::string, std::string>& entries() const { return keys_; }

  // "<sender> = <hex key>" per line.
  static KeyRing load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Deterministic 32-byte key for demo/test setups.
  static std::string derive_key(std::uint64_t secret, std::string_view sender);

 private:
  std::map<std::string, std::string> keys_;
};

}  // namespace edgepipe
