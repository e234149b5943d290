#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/orchestrator/dag.hpp"
#include "edgepipe/orchestrator/run_ledger.hpp"

namespace edgepipe {

enum class TaskState { pending, running, success, failed, retrying, skipped };
enum class RunState { success, failed, timed_out };

std::string_view task_state_name(TaskState s);
std::string_view run_state_name(RunState s);

struct TaskRun {
  std::string run_id;
  std::string task;
  TaskState state = TaskState::pending;
  int attempts = 0;
  std::int64_t started_at = 0;  // first attempt, epoch seconds
  std::int64_t ended_at = 0;
  std::filesystem::path log_path;
  std::string error;                 // last failure message
  std::vector<TaskState> history;    // every state entered, starting with pending
};

struct RunResult {
  std::string run_id;
  RunState state = RunState::success;
  std::string failed_task;
  std::string error;
  std::map<std::string, TaskRun> tasks;
  std::vector<std::string> completion_order;  // tasks in the order they succeeded
};

struct TaskContext {
  const std::string& run_id;
  const std::string& task;
  int attempt;
  std::ostream& log;
  std::stop_token stop;  // set when the run times out
};

using TaskFn = std::function<void(TaskContext&)>;

// Thrown by a task to fail without further retries.
class TaskAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExecutorOptions {
  std::size_t workers = 2;
  RunLedger* ledger = nullptr;       // task transitions and run_finished events
  std::filesystem::path log_dir;     // <log_dir>/<run_id>/<task>.log when set
  std::function<std::int64_t()> clock;  // epoch seconds; system clock when empty
  std::chrono::milliseconds retry_delay{0};
  // Replaces the DAG's run_timeout when set.
  std::optional<std::chrono::milliseconds> timeout;
};

// Runs the DAG's tasks on a bounded pool, each only after all of its
// dependencies succeeded. A task that throws is retried up to max_retries
// times; when it still fails, every task downstream of it is skipped and the
// run fails. Independent branches keep running. On timeout no new attempts
// start, the stop token is raised, in-flight attempts are awaited, and the
// run ends timed_out with the remaining tasks left pending.
// Throws DataError when a task has no function.
RunResult execute_run(const DagSpec& dag, const std::string& run_id,
                      const std::map<std::string, TaskFn>& fns, const ExecutorOptions& options = {});

}  // namespace edgepipe
