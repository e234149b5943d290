#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/rng.hpp"
#include "edgepipe/orchestrator/executor.hpp"
#include "edgepipe/orchestrator/registry.hpp"
#include "edgepipe/orchestrator/scheduler.hpp"
#include "edgepipe/orchestrator/training.hpp"
#include "support/temp_dir.hpp"

using namespace edgepipe;
using test_support::TempDir;

namespace {

DagSpec dag_from(const std::string& text) { return DagSpec::from_config(KvConfig::parse_string(text)); }

DagSpec linear_abc(int retries_b = 0) {
  return dag_from("dag = t\ntask.A.deps =\ntask.B.deps = A\ntask.B.max_retries = " + std::to_string(retries_b) +
                  "\ntask.C.deps = B\n");
}

TaskFn ok() {
  return [](TaskContext&) {};
}

TaskFn fail_first(int n, std::shared_ptr<std::atomic<int>> calls) {
  return [n, calls](TaskContext&) {
    if (++*calls <= n) throw std::runtime_error("transient");
  };
}

std::vector<TaskState> states(std::initializer_list<TaskState> s) { return s; }

// Random DAG on n nodes: edges only from lower to higher index.
DagSpec random_dag(Rng& rng, std::size_t n, double p) {
  DagSpec dag;
  dag.name = "r";
  for (std::size_t i = 0; i < n; ++i) {
    TaskSpec t;
    t.name = "t" + std::to_string(i);
    for (std::size_t j = 0; j < i; ++j) {
      if (uniform01(rng) < p) t.deps.push_back("t" + std::to_string(j));
    }
    dag.tasks.push_back(t);
  }
  return dag;
}

bool reaches(const DagSpec& dag, const std::string& from, const std::string& to) {
  const auto down = dag.downstream_of(from);
  return std::find(down.begin(), down.end(), to) != down.end();
}

}  // namespace

// --- DAG spec -------------------------------------------------------------

TEST(Dag, ParsesDurations) {
  EXPECT_EQ(parse_duration_seconds("300"), 300);
  EXPECT_EQ(parse_duration_seconds("45s"), 45);
  EXPECT_EQ(parse_duration_seconds("5m"), 300);
  EXPECT_EQ(parse_duration_seconds("2h"), 7200);
  EXPECT_EQ(parse_duration_seconds("3d"), 259200);
  EXPECT_THROW(parse_duration_seconds(""), DataError);
  EXPECT_THROW(parse_duration_seconds("m"), DataError);
  EXPECT_THROW(parse_duration_seconds("5w"), DataError);
  EXPECT_THROW(parse_duration_seconds("-1"), DataError);
}

TEST(Dag, LoadsTasksRetriesAndOrder) {
  const auto dag = dag_from(
      "dag = d\nschedule_interval = 3d\nrun_timeout = 90s\ndefault_max_retries = 1\n"
      "task.c.deps = a, b\ntask.a.deps =\ntask.b.deps = a\ntask.b.max_retries = 4\n");
  EXPECT_EQ(dag.name, "d");
  EXPECT_EQ(dag.schedule_interval_s, 3 * 86400);
  EXPECT_EQ(dag.run_timeout_s, 90);
  ASSERT_EQ(dag.tasks.size(), 3u);
  EXPECT_EQ(dag.task("a").max_retries, 1);
  EXPECT_EQ(dag.task("b").max_retries, 4);
  EXPECT_EQ(dag.task("c").deps, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(dag.topo_order(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(dag.downstream_of("a"), (std::vector<std::string>{"c", "b"}));
}

TEST(Dag, RejectsBadSpecs) {
  EXPECT_THROW(dag_from("task.a.deps =\n"), DataError);                                  // no name
  EXPECT_THROW(dag_from("dag = d\n"), DataError);                                        // no tasks
  EXPECT_THROW(dag_from("dag = d\ntask.a.deps = zz\n"), DataError);                      // unknown dep
  EXPECT_THROW(dag_from("dag = d\ntask.a.deps = a\n"), DataError);                       // self edge
  EXPECT_THROW(dag_from("dag = d\ntask.a.deps = b\ntask.b.deps = a\n"), DataError);      // 2-cycle
  EXPECT_THROW(dag_from("dag = d\ntask.a.deps =\ntask.a.retries = 3\n"), DataError);     // unknown key
  EXPECT_THROW(dag_from("dag = d\ntask.a.deps =\ntask.a.max_retries = -1\n"), DataError);
  EXPECT_THROW(dag_from("dag = d\nschedule_interval = 0\ntask.a.deps =\n"), DataError);
}

TEST(Dag, CycleMessageNamesTheStuckTasks) {
  try {
    dag_from("dag = d\ntask.a.deps =\ntask.b.deps = a, d\ntask.c.deps = b\ntask.d.deps = c\n");
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b, c, d"), std::string::npos) << msg;
  }
}

// Forward-only graphs validate; adding one back edge along an existing path
// always closes a cycle and must be rejected.
TEST(DagProperty, RandomGraphsWithPlantedCycles) {
  Rng rng = make_rng(2024, 1);
  int planted = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 12;
    DagSpec dag = random_dag(rng, n, 0.35);
    ASSERT_NO_THROW(dag.validate());
    const auto order = dag.topo_order();
    for (const auto& t : dag.tasks) {
      const auto pos = std::find(order.begin(), order.end(), t.name) - order.begin();
      for (const auto& d : t.deps) EXPECT_LT(std::find(order.begin(), order.end(), d) - order.begin(), pos);
    }
    // Pick i < j with j reachable from i, or make it reachable, then add j -> i.
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i + 1, n - 1)(rng);
    const std::string ti = "t" + std::to_string(i), tj = "t" + std::to_string(j);
    if (!reaches(dag, ti, tj)) dag.tasks[j].deps.push_back(ti);
    dag.tasks[i].deps.push_back(tj);
    EXPECT_THROW(dag.validate(), DataError) << "trial " << trial;
    ++planted;
  }
  EXPECT_EQ(planted, 300);
}

TEST(Dag, ShippedRetrainConfigMatchesBuiltin) {
  const auto text = read_file(std::filesystem::path(EDGEPIPE_SOURCE_DIR) / "config/dag/retrain.conf");
  EXPECT_EQ(text, TrainingPipeline::default_dag_text());
  const auto dag = TrainingPipeline::default_dag();
  EXPECT_EQ(dag.schedule_interval_s, 300);
  EXPECT_EQ(dag.topo_order(), (std::vector<std::string>{"scan", "clean", "split", "train", "evaluate", "cluster",
                                                         "publish", "approve", "deploy"}));
}

// --- executor -------------------------------------------------------------

TEST(Executor, LinearDagRunsInOrder) {
  std::vector<std::string> seen;
  std::mutex mu;
  auto rec = [&](const std::string& n) {
    return [&, n](TaskContext&) {
      std::lock_guard l(mu);
      seen.push_back(n);
    };
  };
  const auto r = execute_run(linear_abc(), "t-1", {{"A", rec("A")}, {"B", rec("B")}, {"C", rec("C")}});
  EXPECT_EQ(r.state, RunState::success);
  EXPECT_EQ(seen, (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(r.completion_order, seen);
  for (const auto& [n, t] : r.tasks) {
    EXPECT_EQ(t.attempts, 1);
    EXPECT_EQ(t.history, states({TaskState::pending, TaskState::running, TaskState::success}));
  }
}

TEST(Executor, RetryWalkTwoFailuresThenSuccess) {
  auto calls = std::make_shared<std::atomic<int>>(0);
  const auto r = execute_run(linear_abc(2), "t-1", {{"A", ok()}, {"B", fail_first(2, calls)}, {"C", ok()}});
  EXPECT_EQ(r.state, RunState::success);
  const auto& b = r.tasks.at("B");
  EXPECT_EQ(b.attempts, 3);
  EXPECT_EQ(b.history, states({TaskState::pending, TaskState::running, TaskState::failed, TaskState::retrying,
                               TaskState::running, TaskState::failed, TaskState::retrying, TaskState::running,
                               TaskState::success}));
  EXPECT_EQ(r.tasks.at("C").state, TaskState::success);
}

TEST(Executor, ExhaustedRetriesFailRunAndSkipDownstream) {
  auto calls = std::make_shared<std::atomic<int>>(0);
  const auto r = execute_run(linear_abc(1), "t-1", {{"A", ok()}, {"B", fail_first(99, calls)}, {"C", ok()}});
  EXPECT_EQ(r.state, RunState::failed);
  EXPECT_EQ(r.failed_task, "B");
  EXPECT_EQ(r.error, "B: transient");
  EXPECT_EQ(r.tasks.at("B").attempts, 2);
  EXPECT_EQ(r.tasks.at("B").state, TaskState::failed);
  EXPECT_EQ(r.tasks.at("C").state, TaskState::skipped);
  EXPECT_EQ(r.tasks.at("C").attempts, 0);
}

TEST(Executor, AbortIsNotRetried) {
  const auto r = execute_run(linear_abc(5), "t-1",
                             {{"A", ok()}, {"B", [](TaskContext&) { throw TaskAbort("no data"); }}, {"C", ok()}});
  EXPECT_EQ(r.state, RunState::failed);
  EXPECT_EQ(r.tasks.at("B").attempts, 1);
  EXPECT_EQ(r.error, "B: no data");
}

TEST(Executor, IndependentBranchFinishesAfterSiblingFails) {
  const auto dag = dag_from("dag = d\ntask.a.deps =\ntask.b.deps = a\ntask.c.deps = b\ntask.x.deps = a\n"
                            "task.y.deps = x\n");
  const auto r = execute_run(dag, "r", {{"a", ok()},
                                        {"b", [](TaskContext&) { throw std::runtime_error("boom"); }},
                                        {"c", ok()},
                                        {"x", ok()},
                                        {"y", ok()}});
  EXPECT_EQ(r.state, RunState::failed);
  EXPECT_EQ(r.tasks.at("c").state, TaskState::skipped);
  EXPECT_EQ(r.tasks.at("x").state, TaskState::success);
  EXPECT_EQ(r.tasks.at("y").state, TaskState::success);
}

TEST(Executor, IndependentTasksOverlap) {
  const auto dag = dag_from("dag = d\ntask.a.deps =\ntask.b.deps = a\ntask.c.deps = a\ntask.d.deps = b, c\n");
  std::atomic<int> inside{0};
  std::atomic<int> peak{0};
  auto meet = [&](TaskContext&) {
    const int now = ++inside;
    peak = std::max(peak.load(), now);
    // Wait (bounded) for the sibling so the overlap is observable on one core.
    for (int i = 0; i < 200 && inside.load() < 2; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    peak = std::max(peak.load(), inside.load());
    --inside;
  };
  ExecutorOptions opt;
  opt.workers = 2;
  const auto r = execute_run(dag, "r", {{"a", ok()}, {"b", meet}, {"c", meet}, {"d", ok()}}, opt);
  EXPECT_EQ(r.state, RunState::success);
  EXPECT_EQ(peak.load(), 2);
  EXPECT_EQ(r.completion_order.back(), "d");
}

TEST(Executor, TimeoutStopsRunAndKeepsPartialStates) {
  const auto dag = dag_from("dag = d\ntask.a.deps =\ntask.b.deps = a\ntask.c.deps = b\n");
  ExecutorOptions opt;
  opt.timeout = std::chrono::milliseconds(150);
  auto slow = [](TaskContext& ctx) {
    while (!ctx.stop.stop_requested()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    throw std::runtime_error("interrupted");
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = execute_run(dag, "r", {{"a", ok()}, {"b", slow}, {"c", ok()}}, opt);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(5));
  EXPECT_EQ(r.state, RunState::timed_out);
  EXPECT_EQ(r.tasks.at("a").state, TaskState::success);
  EXPECT_EQ(r.tasks.at("b").state, TaskState::failed);
  EXPECT_EQ(r.tasks.at("c").state, TaskState::skipped);
}

TEST(Executor, TimeoutLeavesUnstartedTasksPending) {
  const auto dag = dag_from("dag = d\ntask.a.deps =\ntask.b.deps = a\n");
  ExecutorOptions opt;
  opt.timeout = std::chrono::milliseconds(50);
  auto slow_ok = [](TaskContext&) { std::this_thread::sleep_for(std::chrono::milliseconds(150)); };
  const auto r = execute_run(dag, "r", {{"a", slow_ok}, {"b", ok()}}, opt);
  EXPECT_EQ(r.state, RunState::timed_out);
  EXPECT_EQ(r.tasks.at("a").state, TaskState::success);  // in flight at the deadline; awaited
  EXPECT_EQ(r.tasks.at("b").state, TaskState::pending);
}

TEST(Executor, MissingFunctionIsDataError) {
  EXPECT_THROW(execute_run(linear_abc(), "r", {{"A", ok()}, {"B", ok()}}), DataError);
}

TEST(Executor, LedgerAndTaskLogs) {
  TempDir dir;
  RunLedger ledger(dir / "ledger.ndjson");
  ExecutorOptions opt;
  opt.ledger = &ledger;
  opt.log_dir = dir / "logs";
  opt.clock = [] { return std::int64_t{1000}; };
  auto calls = std::make_shared<std::atomic<int>>(0);
  auto b = fail_first(1, calls);
  const auto r = execute_run(linear_abc(1), "t-7",
                             {{"A", [](TaskContext& c) { c.log << "hello from " << c.task << "\n"; }},
                              {"B", b},
                              {"C", ok()}},
                             opt);
  ASSERT_EQ(r.state, RunState::success);
  const auto events = ledger.events();
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.front()["event"], "run_started");
  EXPECT_EQ(events.back()["event"], "run_finished");
  EXPECT_EQ(events.back()["state"], "success");
  std::vector<std::string> b_states;
  for (const auto& e : events) {
    if (e["event"] == "task" && e["task"] == "B") b_states.push_back(e["state"]);
  }
  EXPECT_EQ(b_states, (std::vector<std::string>{"running", "failed", "retrying", "running", "success"}));
  EXPECT_NE(read_file(dir / "logs/t-7/A.log").find("hello from A"), std::string::npos);
  const auto blog = read_file(dir / "logs/t-7/B.log");
  EXPECT_NE(blog.find("attempt 1"), std::string::npos);
  EXPECT_NE(blog.find("error: transient"), std::string::npos);
  EXPECT_NE(blog.find("attempt 2"), std::string::npos);
}

// Random DAGs with random flaky tasks: attempts are bounded, successes follow
// their dependencies, skips have a failed ancestor, and every history walks
// the legal transitions.
TEST(ExecutorProperty, StateMachineInvariants) {
  Rng rng = make_rng(99, 3);
  for (int trial = 0; trial < 60; ++trial) {
    DagSpec dag = random_dag(rng, 2 + trial % 9, 0.4);
    std::map<std::string, TaskFn> fns;
    for (auto& t : dag.tasks) {
      t.max_retries = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
      const int failures = std::uniform_int_distribution<int>(0, 4)(rng);
      fns[t.name] = fail_first(failures, std::make_shared<std::atomic<int>>(0));
    }
    ExecutorOptions opt;
    opt.workers = 1 + trial % 3;
    const auto r = execute_run(dag, "p", fns, opt);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < r.completion_order.size(); ++i) pos[r.completion_order[i]] = i;
    bool any_failed = false;
    for (const auto& t : dag.tasks) {
      const auto& tr = r.tasks.at(t.name);
      EXPECT_LE(tr.attempts, t.max_retries + 1);
      ASSERT_FALSE(tr.history.empty());
      EXPECT_EQ(tr.history.front(), TaskState::pending);
      for (std::size_t i = 1; i < tr.history.size(); ++i) {
        const auto a = tr.history[i - 1], b = tr.history[i];
        const bool legal = (a == TaskState::pending && (b == TaskState::running || b == TaskState::skipped)) ||
                           (a == TaskState::running && (b == TaskState::success || b == TaskState::failed)) ||
                           (a == TaskState::failed && b == TaskState::retrying) ||
                           (a == TaskState::retrying && b == TaskState::running);
        EXPECT_TRUE(legal) << task_state_name(a) << " -> " << task_state_name(b);
      }
      if (tr.state == TaskState::success) {
        for (const auto& d : t.deps) {
          EXPECT_EQ(r.tasks.at(d).state, TaskState::success);
          EXPECT_LT(pos.at(d), pos.at(t.name));
        }
      }
      if (tr.state == TaskState::failed) any_failed = true;
      if (tr.state == TaskState::skipped) {
        bool has_failed_ancestor = false;
        for (const auto& u : dag.tasks) {
          if (r.tasks.at(u.name).state == TaskState::failed && reaches(dag, u.name, t.name)) has_failed_ancestor = true;
        }
        EXPECT_TRUE(has_failed_ancestor) << t.name;
      }
      EXPECT_NE(tr.state, TaskState::pending);
      EXPECT_NE(tr.state, TaskState::running);
    }
    EXPECT_EQ(r.state == RunState::failed, any_failed);
  }
}

// --- scheduler ------------------------------------------------------------

TEST(Scheduler, IntervalExamples) {
  TempDir dir;
  RunLedger ledger(dir / "ledger.ndjson");
  auto dag = linear_abc();
  dag.schedule_interval_s = 3 * 86400;
  Scheduler s(dag, ledger);
  const std::int64_t t0 = 1'700'000'000;
  EXPECT_EQ(s.schedule(t0), (std::vector<std::string>{"t-000001"}));  // bootstrap
  EXPECT_TRUE(s.schedule(t0 + 2 * 86400).empty());
  EXPECT_EQ(s.schedule(t0 + 4 * 86400), (std::vector<std::string>{"t-000002"}));
  EXPECT_TRUE(s.schedule(t0 + 4 * 86400).empty());
  EXPECT_EQ(s.schedule(t0 + 7 * 86400), (std::vector<std::string>{"t-000003"}));  // exactly on the boundary
  EXPECT_EQ(s.last_claim()->slot, 3);
}

TEST(Scheduler, RestartDoesNotDoubleStart) {
  TempDir dir;
  auto dag = linear_abc();
  dag.schedule_interval_s = 300;
  {
    RunLedger ledger(dir / "ledger.ndjson");
    Scheduler s(dag, ledger);
    EXPECT_EQ(s.schedule(1000).size(), 1u);
  }
  RunLedger ledger(dir / "ledger.ndjson");
  Scheduler again(dag, ledger);
  EXPECT_TRUE(again.schedule(1000).empty());
  EXPECT_TRUE(again.schedule(1299).empty());
  EXPECT_EQ(again.schedule(1300), (std::vector<std::string>{"t-000002"}));
}

TEST(Scheduler, ConcurrentSchedulersClaimEachSlotOnce) {
  TempDir dir;
  auto dag = linear_abc();
  dag.schedule_interval_s = 10;
  std::vector<std::string> all;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      RunLedger ledger(dir / "ledger.ndjson");  // separate handles, shared file
      Scheduler s(dag, ledger);
      for (std::int64_t now = 0; now < 100; ++now) {
        for (auto& id : s.schedule(now)) {
          std::lock_guard l(mu);
          all.push_back(id);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  std::set<std::string> unique(all.begin(), all.end());
  EXPECT_EQ(unique.size(), all.size());
  EXPECT_EQ(all.size(), 10u);  // slots at 0, 10, ..., 90
}

TEST(Scheduler, TornLedgerTailIsDiscarded) {
  TempDir dir;
  auto dag = linear_abc();
  {
    RunLedger ledger(dir / "ledger.ndjson");
    Scheduler s(dag, ledger);
    s.schedule(0);
  }
  {
    std::ofstream out(dir / "ledger.ndjson", std::ios::app);
    out << R"({"event":"run_claimed","dag":"t","run_id":"t-0000)";
  }
  RunLedger ledger(dir / "ledger.ndjson");
  Scheduler s(dag, ledger);
  EXPECT_EQ(s.claims().size(), 1u);
  EXPECT_EQ(s.schedule(300), (std::vector<std::string>{"t-000002"}));
  EXPECT_EQ(s.claims().size(), 2u);
}

// --- registry -------------------------------------------------------------

namespace {

ModelArtifact artifact_with_rate(double rate) {
  ModelArtifact a;
  a.trained_at = "2022-04-01T00:00:00Z";
  a.training_rows = 10;
  a.metrics = {{"test_flag_rate", rate}};
  return a;
}

}  // namespace

TEST(Registry, VersionsAreGaplessAndFilesImmutable) {
  TempDir dir;
  ModelRegistry reg(dir / "reg");
  EXPECT_EQ(reg.max_version(), 0);
  for (int i = 1; i <= 5; ++i) {
    auto a = artifact_with_rate(0.05);
    a.version = 77;     // ignored
    a.approved = true;  // ignored
    EXPECT_EQ(reg.publish(a), i);
  }
  const auto list = reg.list();
  ASSERT_EQ(list.size(), 5u);
  for (std::size_t i = 0; i < list.size(); ++i) {
    EXPECT_EQ(list[i].version, static_cast<std::int64_t>(i + 1));
    EXPECT_FALSE(list[i].approved);
  }
  const auto before = read_file(reg.artifact_path(3));
  reg.approve(3, {});
  EXPECT_EQ(read_file(reg.artifact_path(3)), before);
  EXPECT_TRUE(reg.load(3).approved);
  EXPECT_FALSE(reg.load(2).approved);
  EXPECT_EQ(reg.latest_approved(), 3);
  EXPECT_THROW(reg.load(9), DataError);
}

TEST(Registry, ApprovalBandExamples) {
  TempDir dir;
  ModelRegistry reg(dir / "reg");
  const auto v1 = reg.publish(artifact_with_rate(0.054));
  const auto v2 = reg.publish(artifact_with_rate(0.09));
  ApprovalCriteria c;  // 0.05 +/- 0.02
  const auto a1 = reg.approve(v1, c);
  EXPECT_TRUE(a1.approved);
  EXPECT_FALSE(a1.already);
  const auto a2 = reg.approve(v2, c);
  EXPECT_FALSE(a2.approved);
  EXPECT_FALSE(reg.load(v2).approved);
  EXPECT_EQ(reg.list()[1].note.rfind("rejected: ", 0), 0u);
  const auto again = reg.approve(v1, c);
  EXPECT_TRUE(again.approved);
  EXPECT_TRUE(again.already);
  const auto forced = reg.approve(v2, c, true);
  EXPECT_TRUE(forced.approved);
  EXPECT_TRUE(forced.forced);
  EXPECT_EQ(reg.latest_approved(), v2);
  EXPECT_THROW(reg.approve(42, c), DataError);
}

TEST(Registry, BandEdgesAndStability) {
  ApprovalCriteria c;
  EXPECT_TRUE(check_approval({{"test_flag_rate", 0.07}}, c).approved);
  EXPECT_TRUE(check_approval({{"test_flag_rate", 0.03}}, c).approved);
  EXPECT_FALSE(check_approval({{"test_flag_rate", 0.0701}}, c).approved);
  EXPECT_FALSE(check_approval({{"test_flag_rate", 0.0299}}, c).approved);
  EXPECT_FALSE(check_approval({{"test_flag_rate", 0.05}, {"stable", false}}, c).approved);
  EXPECT_FALSE(check_approval(nlohmann::json::object(), c).approved);
}

TEST(Registry, ArtifactMissingFromIndexIsRecovered) {
  TempDir dir;
  {
    ModelRegistry reg(dir / "reg");
    reg.publish(artifact_with_rate(0.05));
    reg.publish(artifact_with_rate(0.05));
  }
  // Simulate a crash between the artifact write and the index update.
  nlohmann::json idx = nlohmann::json::parse(read_file(dir / "reg/index.json"));
  idx["models"].erase(1);
  write_file_atomic(dir / "reg/index.json", idx.dump());
  ModelRegistry reg(dir / "reg");
  EXPECT_EQ(reg.max_version(), 2);
  EXPECT_EQ(reg.publish(artifact_with_rate(0.05)), 3);
}

TEST(Registry, ConcurrentPublishersStayGapless) {
  TempDir dir;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      ModelRegistry reg(dir / "reg");
      for (int i = 0; i < 5; ++i) reg.publish(artifact_with_rate(0.05));
    });
  }
  for (auto& t : threads) t.join();
  ModelRegistry reg(dir / "reg");
  const auto list = reg.list();
  ASSERT_EQ(list.size(), 20u);
  for (std::size_t i = 0; i < list.size(); ++i) EXPECT_EQ(list[i].version, static_cast<std::int64_t>(i + 1));
}
