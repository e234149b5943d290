#include "edgepipe/orchestrator/executor.hpp"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/worker_pool.hpp"

namespace edgepipe {

std::string_view task_state_name(TaskState s) {
  switch (s) {
    case TaskState::pending: return "pending";
    case TaskState::running: return "running";
    case TaskState::success: return "success";
    case TaskState::failed: return "failed";
    case TaskState::retrying: return "retrying";
    case TaskState::skipped: return "skipped";
  }
  return "?";
}

std::string_view run_state_name(RunState s) {
  switch (s) {
    case RunState::success: return "success";
    case RunState::failed: return "failed";
    case RunState::timed_out: return "timed_out";
  }
  return "?";
}

namespace {

using SteadyTime = std::chrono::steady_clock::time_point;

struct Completion {
  std::string task;
  bool ok = false;
  bool abort = false;
  std::string error;
};

class RunDriver {
 public:
  RunDriver(const DagSpec& dag, const std::string& run_id, const std::map<std::string, TaskFn>& fns,
            const ExecutorOptions& opt)
      : dag_(dag), run_id_(run_id), fns_(fns), opt_(opt) {
    for (const auto& t : dag.tasks) {
      if (!fns.count(t.name)) throw DataError("dag " + dag.name + ": no function for task '" + t.name + "'");
    }
    result_.run_id = run_id;
    for (const auto& t : dag.tasks) {
      TaskRun tr;
      tr.run_id = run_id;
      tr.task = t.name;
      if (!opt.log_dir.empty()) tr.log_path = opt.log_dir / run_id / (t.name + ".log");
      tr.history.push_back(TaskState::pending);
      result_.tasks.emplace(t.name, std::move(tr));
    }
  }

  RunResult run() {
    if (!opt_.log_dir.empty()) std::filesystem::create_directories(opt_.log_dir / run_id_);
    const auto timeout = opt_.timeout.value_or(std::chrono::seconds(dag_.run_timeout_s));
    const SteadyTime deadline = std::chrono::steady_clock::now() + timeout;
    ledger({{"event", "run_started"}, {"dag", dag_.name}, {"run_id", run_id_}, {"at", now()}});

    bool timed_out = false;
    {
      WorkerPool pool(std::max<std::size_t>(opt_.workers, 1));
      std::unique_lock lock(mu_);
      while (true) {
        if (!timed_out) start_ready(pool, lock);
        if (in_flight_ == 0 && (timed_out || (retry_queue_.empty() && !any_startable()))) break;

        SteadyTime wake = timed_out ? SteadyTime::max() : deadline;
        if (!retry_queue_.empty() && !timed_out) wake = std::min(wake, retry_queue_.front().first);
        if (done_.empty()) {
          if (wake == SteadyTime::max()) cv_.wait(lock, [&] { return !done_.empty(); });
          else cv_.wait_until(lock, wake, [&] { return !done_.empty(); });
        }
        while (!done_.empty()) {
          Completion c = std::move(done_.front());
          done_.pop_front();
          --in_flight_;
          lock.unlock();
          on_complete(c, timed_out);
          lock.lock();
        }
        if (!timed_out && std::chrono::steady_clock::now() >= deadline) {
          timed_out = true;
          stop_.request_stop();
          retry_queue_.clear();
        }
      }
    }

    if (timed_out) {
      result_.state = RunState::timed_out;
      if (result_.error.empty()) result_.error = "timeout after " + std::to_string(timeout.count()) + " ms";
    } else if (!result_.failed_task.empty()) {
      result_.state = RunState::failed;
    }
    ledger({{"event", "run_finished"},
            {"dag", dag_.name},
            {"run_id", run_id_},
            {"state", run_state_name(result_.state)},
            {"error", result_.error},
            {"at", now()}});
    return std::move(result_);
  }

 private:
  std::int64_t now() const {
    if (opt_.clock) return opt_.clock();
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  void ledger(nlohmann::json e) {
    if (opt_.ledger) opt_.ledger->append(e);
  }

  void transition(TaskRun& tr, TaskState s) {
    tr.state = s;
    tr.history.push_back(s);
    nlohmann::json e = {{"event", "task"},   {"dag", dag_.name},        {"run_id", run_id_}, {"task", tr.task},
                        {"state", task_state_name(s)}, {"attempt", tr.attempts}, {"at", now()}};
    if (s == TaskState::failed || s == TaskState::retrying) e["error"] = tr.error;
    ledger(std::move(e));
  }

  bool deps_done(const TaskSpec& t) const {
    for (const auto& d : t.deps) {
      if (result_.tasks.at(d).state != TaskState::success) return false;
    }
    return true;
  }

  bool any_startable() const {
    for (const auto& t : dag_.tasks) {
      if (result_.tasks.at(t.name).state == TaskState::pending && deps_done(t)) return true;
    }
    return false;
  }

  // Called with mu_ held.
  void start_ready(WorkerPool& pool, std::unique_lock<std::mutex>& lock) {
    std::vector<std::string> starts;
    const auto t_now = std::chrono::steady_clock::now();
    while (!retry_queue_.empty() && retry_queue_.front().first <= t_now) {
      starts.push_back(retry_queue_.front().second);
      retry_queue_.pop_front();
    }
    for (const auto& t : dag_.tasks) {
      if (result_.tasks.at(t.name).state == TaskState::pending && deps_done(t) && !launched_.count(t.name)) {
        starts.push_back(t.name);
        launched_.insert(t.name);
      }
    }
    if (starts.empty()) return;
    in_flight_ += starts.size();
    lock.unlock();
    for (const auto& name : starts) launch(pool, name);
    lock.lock();
  }

  void launch(WorkerPool& pool, const std::string& name) {
    TaskRun& tr = result_.tasks.at(name);
    ++tr.attempts;
    if (tr.attempts == 1) tr.started_at = now();
    transition(tr, TaskState::running);
    const int attempt = tr.attempts;
    const TaskFn* fn = &fns_.at(name);
    std::stop_token token = stop_.get_token();
    const std::filesystem::path log_path = tr.log_path;
    pool.submit([this, name, attempt, fn, token, log_path] {
      Completion c;
      c.task = name;
      std::ostringstream log;
      try {
        TaskContext ctx{run_id_, name, attempt, log, token};
        (*fn)(ctx);
        c.ok = true;
      } catch (const TaskAbort& e) {
        c.abort = true;
        c.error = e.what();
      } catch (const std::exception& e) {
        c.error = e.what();
      } catch (...) {
        c.error = "unknown exception";
      }
      if (!log_path.empty()) {
        std::ofstream out(log_path, std::ios::app);
        out << "--- attempt " << attempt << " ---\n" << log.str();
        if (!c.ok) out << "error: " << c.error << "\n";
      }
      {
        std::lock_guard lock(mu_);
        done_.push_back(std::move(c));
      }
      cv_.notify_all();
    });
  }

  void on_complete(const Completion& c, bool timed_out) {
    TaskRun& tr = result_.tasks.at(c.task);
    const TaskSpec& spec = dag_.task(c.task);
    if (c.ok) {
      tr.ended_at = now();
      transition(tr, TaskState::success);
      result_.completion_order.push_back(c.task);
      return;
    }
    tr.error = c.error;
    const bool can_retry = !c.abort && !timed_out && tr.attempts <= spec.max_retries;
    if (can_retry) {
      transition(tr, TaskState::failed);
      transition(tr, TaskState::retrying);
      std::lock_guard lock(mu_);
      retry_queue_.emplace_back(std::chrono::steady_clock::now() + opt_.retry_delay, c.task);
      return;
    }
    tr.ended_at = now();
    transition(tr, TaskState::failed);
    if (result_.failed_task.empty()) {
      result_.failed_task = c.task;
      result_.error = c.task + ": " + c.error;
    }
    for (const auto& d : dag_.downstream_of(c.task)) {
      TaskRun& dr = result_.tasks.at(d);
      if (dr.state == TaskState::pending) transition(dr, TaskState::skipped);
    }
  }

  const DagSpec& dag_;
  const std::string& run_id_;
  const std::map<std::string, TaskFn>& fns_;
  const ExecutorOptions& opt_;
  RunResult result_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Completion> done_;
  std::deque<std::pair<SteadyTime, std::string>> retry_queue_;
  std::set<std::string> launched_;
  std::size_t in_flight_ = 0;
  std::stop_source stop_;
};

}  // namespace

RunResult execute_run(const DagSpec& dag, const std::string& run_id, const std::map<std::string, TaskFn>& fns,
                      const ExecutorOptions& options) {
  RunDriver driver(dag, run_id, fns, options);
  return driver.run();
}

}  // namespace edgepipe
