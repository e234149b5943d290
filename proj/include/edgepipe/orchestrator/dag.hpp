#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgepipe/common/kv_config.hpp"

namespace edgepipe {

struct TaskSpec {
  std::string name;
  std::vector<std::string> deps;
  int max_retries = 0;
};

// A workflow definition. Loaded from a KvConfig file:
//
//   dag = retrain
//   schedule_interval = 5m        # seconds, or <n>s|m|h|d
//   run_timeout = 10m
//   default_max_retries = 1
//   task.scan.deps =
//   task.clean.deps = scan
//   task.clean.max_retries = 2
//
// Tasks keep file order; that order breaks ties in topo_order().
struct DagSpec {
  std::string name;
  std::int64_t schedule_interval_s = 300;
  std::int64_t run_timeout_s = 600;
  std::vector<TaskSpec> tasks;

  const TaskSpec& task(const std::string& name) const;  // std::out_of_range
  bool has_task(const std::string& name) const;
  // Kahn order, ties by declaration order. Requires a validated spec.
  std::vector<std::string> topo_order() const;
  // Every task reachable from `name` along dependency edges (excluding it).
  std::vector<std::string> downstream_of(const std::string& name) const;

  // Throws DataError on an empty DAG, duplicate task, unknown dependency,
  // self-edge, or cycle (the message names the tasks on it).
  void validate() const;

  static DagSpec from_config(const KvConfig& cfg);  // validates
  static DagSpec load(const std::filesystem::path& path);
};

// "300", "45s", "5m", "2h", "3d". Throws DataError.
std::int64_t parse_duration_seconds(const std::string& text);

}  // namespace edgepipe
