#include "edgepipe/orchestrator/dag.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <stdexcept>

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

std::int64_t parse_duration_seconds(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw DataError("duration: empty");
  std::int64_t mult = 1;
  std::string digits = text;
  switch (text.back()) {
    case 's': mult = 1; digits.pop_back(); break;
    case 'm': mult = 60; digits.pop_back(); break;
    case 'h': mult = 3600; digits.pop_back(); break;
    case 'd': mult = 86400; digits.pop_back(); break;
    default: break;
  }
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (digits.empty() || ec != std::errc() || p != digits.data() + digits.size() || v < 0) {
    throw DataError("duration: cannot parse '" + text + "'");
  }
  return v * mult;
}

const TaskSpec& DagSpec::task(const std::string& n) const {
  for (const auto& t : tasks) {
    if (t.name == n) return t;
  }
  throw std::out_of_range("dag " + name + ": no task '" + n + "'");
}

bool DagSpec::has_task(const std::string& n) const {
  return std::any_of(tasks.begin(), tasks.end(), [&](const TaskSpec& t) { return t.name == n; });
}

void DagSpec::validate() const {
  if (tasks.empty()) throw DataError("dag " + name + ": no tasks");
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (t.name.empty()) throw DataError("dag " + name + ": empty task name");
    if (!names.insert(t.name).second) throw DataError("dag " + name + ": duplicate task '" + t.name + "'");
    if (t.max_retries < 0) throw DataError("dag " + name + ": task '" + t.name + "' has negative max_retries");
  }
  for (const auto& t : tasks) {
    for (const auto& d : t.deps) {
      if (d == t.name) throw DataError("dag " + name + ": task '" + t.name + "' depends on itself");
      if (!names.count(d)) {
        throw DataError("dag " + name + ": task '" + t.name + "' depends on unknown task '" + d + "'");
      }
    }
  }

  std::map<std::string, std::size_t> indeg;
  for (const auto& t : tasks) indeg[t.name] = t.deps.size();
  std::vector<std::string> ready;
  for (const auto& t : tasks) {
    if (indeg[t.name] == 0) ready.push_back(t.name);
  }
  std::size_t done = 0;
  while (!ready.empty()) {
    const std::string cur = ready.back();
    ready.pop_back();
    ++done;
    for (const auto& t : tasks) {
      if (std::find(t.deps.begin(), t.deps.end(), cur) != t.deps.end() && --indeg[t.name] == 0) {
        ready.push_back(t.name);
      }
    }
  }
  if (done != tasks.size()) {
    std::string stuck;
    for (const auto& t : tasks) {
      if (indeg[t.name] > 0) stuck += (stuck.empty() ? "" : ", ") + t.name;
    }
    throw DataError("dag " + name + ": cycle among {" + stuck + "}");
  }
}

std::vector<std::string> DagSpec::topo_order() const {
  std::set<std::string> placed;
  std::vector<std::string> order;
  while (order.size() < tasks.size()) {
    bool progressed = false;
    for (const auto& t : tasks) {
      if (placed.count(t.name)) continue;
      const bool ok = std::all_of(t.deps.begin(), t.deps.end(), [&](const std::string& d) { return placed.count(d); });
      if (ok) {
        placed.insert(t.name);
        order.push_back(t.name);
        progressed = true;
        break;
      }
    }
    if (!progressed) throw DataError("dag " + name + ": cycle");
  }
  return order;
}

std::vector<std::string> DagSpec::downstream_of(const std::string& root) const {
  std::set<std::string> seen;
  std::vector<std::string> frontier{root};
  while (!frontier.empty()) {
    const std::string cur = frontier.back();
    frontier.pop_back();
    for (const auto& t : tasks) {
      if (!seen.count(t.name) && std::find(t.deps.begin(), t.deps.end(), cur) != t.deps.end()) {
        seen.insert(t.name);
        frontier.push_back(t.name);
      }
    }
  }
  std::vector<std::string> out;
  for (const auto& t : tasks) {
    if (seen.count(t.name)) out.push_back(t.name);
  }
  return out;
}

DagSpec DagSpec::from_config(const KvConfig& cfg) {
  DagSpec dag;
  dag.name = cfg.get_string("dag", "");
  if (dag.name.empty()) throw DataError(cfg.source() + ": missing 'dag'");
  if (auto v = cfg.get("schedule_interval")) dag.schedule_interval_s = parse_duration_seconds(*v);
  if (auto v = cfg.get("run_timeout")) dag.run_timeout_s = parse_duration_seconds(*v);
  if (dag.schedule_interval_s <= 0) throw DataError(cfg.source() + ": schedule_interval must be > 0");
  if (dag.run_timeout_s <= 0) throw DataError(cfg.source() + ": run_timeout must be > 0");
  const auto default_retries = static_cast<int>(cfg.get_int("default_max_retries", 0));
  for (const auto& tname : cfg.group_names("task")) {
    TaskSpec t;
    t.name = tname;
    const std::string prefix = "task." + tname + ".";
    for (const auto& key : cfg.keys()) {
      if (key.rfind(prefix, 0) != 0) continue;
      const std::string field = key.substr(prefix.size());
      if (field != "deps" && field != "max_retries") {
        throw DataError(cfg.source() + ": unknown task key '" + key + "'");
      }
    }
    for (const auto& d : split_list(cfg.get_string(prefix + "deps", ""))) {
      if (!d.empty()) t.deps.push_back(d);
    }
    t.max_retries = static_cast<int>(cfg.get_int(prefix + "max_retries", default_retries));
    dag.tasks.push_back(std::move(t));
  }
  dag.validate();
  return dag;
}

DagSpec DagSpec::load(const std::filesystem::path& path) { return from_config(KvConfig::load(path)); }

}  // namespace edgepipe
