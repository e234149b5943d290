#include "edgepipe/experiment/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "edgepipe/common/rng.hpp"

namespace edgepipe {

namespace {

struct Device {
  const char* id;
  const char* type;
  const char* location;
};

constexpr Device kDevices[] = {
    {"lightcontrol1", "/lightControler", "BedroomParents"},
    {"lightcontrol2", "/lightControler", "Kitchen"},
    {"lightcontrol3", "/lightControler", "Garage"},
    {"movement1", "/movementSensor", "Entrance"},
    {"movement2", "/movementSensor", "LivingRoom"},
    {"tempin1", "/sensorService", "BedroomParents"},
    {"tempin2", "/sensorService", "Kitchen"},
    {"tempin3", "/sensorService", "Dinningroom"},
    {"thermostat1", "/thermostat", "LivingRoom"},
    {"thermostat2", "/thermostat", "BedroomParents"},
    {"washingmachine1", "/washingService", "Bathroom"},
    {"doorlock1", "/doorLockService", "Entrance"},
    {"doorlock2", "/doorLockService", "Garage"},
    {"battery1", "/batteryService", "Garage"},
    {"battery2", "/batteryService", "Watersupply"},
    {"smartphone1", "/smartPhone", "LivingRoom"},
};
constexpr std::size_t kNumDevices = std::size(kDevices);

// Normal traffic never touches these pairings; anomalies are built on them.
struct AttackRule {
  const char* label;
  const char* source_type;
  const char* dest_type;
  const char* operation;
  const char* node;  // accessed node suffix never used by normal traffic
};

constexpr AttackRule kAttacks[] = {
    {"malitiousControl", "/sensorService", "/doorLockService", "write", "lock"},
    {"DoSattack", "/movementSensor", "/lightControler", "subscribe", "config"},
    {"scan", "/smartPhone", "/washingService", "lockSubtree", "firmware"},
    {"spying", "/lightControler", "/smartPhone", "read", "contacts"},
    {"dataProbing", "/washingService", "/sensorService", "registerService", "admin"},
};

const char* kNodeTypes[] = {"/basic/number", "/basic/text", "/derived/boolean", "/basic/composed"};

bool forbidden(const Device& src, const Device& dst, const std::string& op) {
  for (const auto& a : kAttacks) {
    if (std::string_view(src.type) == a.source_type && std::string_view(dst.type) == a.dest_type &&
        op == a.operation) {
      return true;
    }
  }
  const bool ambiguous_types =
      std::string_view(src.type) == "/batteryService" && std::string_view(dst.type) == "/thermostat";
  return ambiguous_types && op == "write";
}

std::size_t pick_device(Rng& rng, std::string_view type) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < kNumDevices; ++i) {
    if (type == kDevices[i].type) ok.push_back(i);
  }
  return ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
}

std::string pick_operation(Rng& rng) {
  const double u = uniform01(rng);
  if (u < 0.70) return "read";
  if (u < 0.90) return "write";
  if (u < 0.96) return "subscribe";
  if (u < 0.99) return "registerService";
  return "lockSubtree";
}

LabeledEvent make_event(Rng& rng, const Device& src, const Device& dst, const std::string& op, double null_rate) {
  LabeledEvent e;
  const std::string src_addr = std::string("/agent") + std::to_string(1 + (src.id[0] % 4)) + "/" + src.id;
  const std::string dst_addr = std::string("/agent") + std::to_string(1 + (dst.id[0] % 4)) + "/" + dst.id;
  const char* node_type = kNodeTypes[std::uniform_int_distribution<int>(0, 3)(rng)];
  e.categorical[0] = src.id;
  e.categorical[1] = src_addr;
  e.categorical[2] = src.type;
  e.categorical[3] = src.location;
  e.categorical[4] = dst_addr;
  e.categorical[5] = dst.type;
  e.categorical[6] = dst.location;
  e.categorical[7] = dst_addr + "/" + (std::string_view(node_type) == "/basic/number" ? "value" : "state");
  e.categorical[8] = node_type;
  e.categorical[9] = op;
  if (op == "read" || op == "subscribe") {
    e.categorical[10] = "none";
  } else if (std::string_view(node_type) == "/derived/boolean") {
    e.categorical[10] = uniform01(rng) < 0.5 ? "true" : "false";
  } else {
    e.categorical[10] = std::to_string(std::uniform_int_distribution<int>(0, 40)(rng));
  }
  if (uniform01(rng) < null_rate) e.categorical[10].reset();
  if (uniform01(rng) < null_rate) e.categorical[8].reset();
  return e;
}

}  // namespace

std::vector<LabeledEvent> synthetic_labeled(const SyntheticLabeledOptions& o) {
  if (o.rows < 10) throw std::invalid_argument("synthetic: need at least 10 rows");
  const auto n_pos = static_cast<std::size_t>(std::llround(o.positive_rate * static_cast<double>(o.rows)));
  const auto n_amb = static_cast<std::size_t>(std::llround(o.ambiguous_rate * static_cast<double>(o.rows)));
  const auto n_amb_pos =
      static_cast<std::size_t>(std::llround(o.ambiguous_positive_share * static_cast<double>(n_amb)));
  if (n_amb_pos > n_pos || n_amb > o.rows - (n_pos - n_amb_pos)) {
    throw std::invalid_argument("synthetic: positive budget does not cover the ambiguous corner");
  }
  const std::size_t n_rule = n_pos - n_amb_pos;

  // Row kinds: 0 normal, 1 rule anomaly, 2 ambiguous normal, 3 ambiguous anomaly.
  std::vector<int> kind(o.rows, 0);
  std::fill_n(kind.begin(), n_rule, 1);
  std::fill_n(kind.begin() + static_cast<std::ptrdiff_t>(n_rule), n_amb - n_amb_pos, 2);
  std::fill_n(kind.begin() + static_cast<std::ptrdiff_t>(n_rule + n_amb - n_amb_pos), n_amb_pos, 3);
  Rng rng = make_rng(o.seed, 0x5e7);
  std::shuffle(kind.begin(), kind.end(), rng);

  std::vector<LabeledEvent> out;
  out.reserve(o.rows);
  std::int64_t ts = 1522792800000;  // ms
  std::uniform_int_distribution<std::size_t> any_device(0, kNumDevices - 1);
  for (std::size_t r = 0; r < o.rows; ++r) {
    LabeledEvent e;
    switch (kind[r]) {
      case 0: {
        for (;;) {
          const auto& src = kDevices[any_device(rng)];
          const auto& dst = kDevices[any_device(rng)];
          const auto op = pick_operation(rng);
          if (forbidden(src, dst, op)) continue;
          e = make_event(rng, src, dst, op, o.null_rate);
          break;
        }
        e.normality = "normal";
        break;
      }
      case 1: {
        const auto& a = kAttacks[std::uniform_int_distribution<std::size_t>(0, std::size(kAttacks) - 1)(rng)];
        e = make_event(rng, kDevices[pick_device(rng, a.source_type)], kDevices[pick_device(rng, a.dest_type)],
                       a.operation, o.null_rate);
        e.categorical[7] = e.categorical[4].value() + "/" + a.node;
        e.normality = a.label;
        break;
      }
      default: {
        // One miswired battery writing the same setpoint: identical rows.
        e = make_event(rng, kDevices[13], kDevices[8], "write", 0.0);
        e.categorical[7] = e.categorical[4].value() + "/value";
        e.categorical[8] = "/basic/number";
        e.categorical[10] = "21";
        e.normality = kind[r] == 3 ? "wrongSetUp" : "normal";
        break;
      }
    }
    ts += std::uniform_int_distribution<std::int64_t>(50, 2000)(rng);
    e.timestamp = ts;
    e.id = "row" + std::to_string(r + 1);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace edgepipe
