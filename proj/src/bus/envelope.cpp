#include "edgepipe/bus/envelope.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <sstream>

#include "edgepipe/bus/topic.hpp"
#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/kv_config.hpp"
#include "edgepipe/common/rng.hpp"
#include "json.hpp"

namespace edgepipe {

std::string_view payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::sample_batch:
      return "sample_batch";
    case PayloadKind::anomaly_report:
      return "anomaly_report";
    case PayloadKind::model_deploy:
      return "model_deploy";
    case PayloadKind::ack:
      return "ack";
  }
  return "ack";
}

std::optional<PayloadKind> payload_kind_from_name(std::string_view name) {
  for (auto k : {PayloadKind::sample_batch, PayloadKind::anomaly_report, PayloadKind::model_deploy,
                 PayloadKind::ack}) {
    if (payload_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string envelope_to_wire(const Envelope& env) {
  nlohmann::ordered_json j;
  j["message_id"] = env.message_id;
  j["topic"] = env.topic;
  j["sender"] = env.sender;
  j["payload_kind"] = payload_kind_name(env.payload_kind);
  j["payload"] = env.payload;
  j["auth_tag"] = env.auth_tag;
  return j.dump();
}

Envelope envelope_from_wire(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("envelope: ") + e.what());
  }
  if (!j.is_object()) throw DataError("envelope: not a JSON object");
  auto str = [&](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw DataError(std::string("envelope: missing string field ") + key);
    }
    return it->get<std::string>();
  };
  Envelope env;
  env.message_id = str("message_id");
  env.topic = str("topic");
  env.sender = str("sender");
  const auto kind = payload_kind_from_name(str("payload_kind"));
  if (!kind) throw DataError("envelope: unknown payload_kind");
  env.payload_kind = *kind;
  env.payload = str("payload");
  env.auth_tag = str("auth_tag");
  return env;
}

std::string compute_auth_tag(std::string_view key, const Envelope& env) {
  std::string msg;
  for (std::string_view field : {std::string_view(env.message_id), std::string_view(env.topic),
                                 std::string_view(env.sender), payload_kind_name(env.payload_kind),
                                 std::string_view(env.payload)}) {
    put_u32_be(msg, static_cast<std::uint32_t>(field.size()));
    msg.append(field);
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
       reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), digest, &len);
  return to_hex(std::span<const unsigned char>(digest, len));
}

void sign(Envelope& env, std::string_view key) { env.auth_tag = compute_auth_tag(key, env); }

bool verify(const Envelope& env, std::string_view key) {
  const std::string expected = compute_auth_tag(key, env);
  return env.auth_tag.size() == expected.size() &&
         CRYPTO_memcmp(env.auth_tag.data(), expected.data(), expected.size()) == 0;
}

bool kind_matches_topic(PayloadKind kind, std::string_view topic) {
  if (!valid_topic(topic)) return false;
  if (topic == kAlertsTopic) return kind == PayloadKind::anomaly_report;
  const auto slash = topic.rfind('/');
  if (slash == std::string_view::npos) return false;
  const auto last = topic.substr(slash + 1);
  if (last == "data") return kind == PayloadKind::sample_batch;
  if (last == "anomaly") return kind == PayloadKind::anomaly_report;
  if (last == "model") return kind == PayloadKind::model_deploy || kind == PayloadKind::ack;
  return false;
}

std::string data_topic(std::string_view station) { return std::string(station) + "/data"; }
std::string anomaly_topic(std::string_view station) { return std::string(station) + "/anomaly"; }
std::string model_topic(std::string_view station) { return std::string(station) + "/model"; }

std::optional<std::string> KeyRing::key_for(const std::string& sender) const {
  const auto it = keys_.find(sender);
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

KeyRing KeyRing::load(const std::filesystem::path& path) {
  const auto cfg = KvConfig::load(path);
  KeyRing ring;
  for (const auto& sender : cfg.keys()) ring.add(sender, from_hex(*cfg.get(sender)));
  return ring;
}

void KeyRing::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "# sender = hex HMAC key\n";
  for (const auto& [sender, key] : keys_) out << sender << " = " << to_hex(key) << "\n";
  write_file_atomic(path, out.str());
}

std::string KeyRing::derive_key(std::uint64_t secret, std::string_view sender) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : sender) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  std::string key;
  for (std::uint64_t i = 0; i < 4; ++i) put_u64_be(key, derive_seed(secret ^ h, i));
  return key;
}

}  // namespace edgepipe
