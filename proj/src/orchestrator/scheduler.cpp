#include "edgepipe/orchestrator/scheduler.hpp"

#include <cstdio>

namespace edgepipe {

namespace {

std::vector<RunClaim> claims_in(const RunLedger::Events& events, const std::string& dag) {
  std::vector<RunClaim> out;
  for (const auto& e : events) {
    if (e.value("event", "") != "run_claimed" || e.value("dag", "") != dag) continue;
    out.push_back({e.at("run_id").get<std::string>(), e.at("slot").get<std::int64_t>(),
                   e.at("at").get<std::int64_t>()});
  }
  return out;
}

}  // namespace

std::string make_run_id(const std::string& dag, std::int64_t slot) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(slot));
  return dag + "-" + buf;
}

Scheduler::Scheduler(DagSpec dag, RunLedger& ledger) : dag_(std::move(dag)), ledger_(ledger) { dag_.validate(); }

std::vector<std::string> Scheduler::schedule(std::int64_t now) {
  const auto added = ledger_.transact([&](const RunLedger::Events& events) {
    const auto claims = claims_in(events, dag_.name);
    RunLedger::Events add;
    if (claims.empty() || now >= claims.back().claimed_at + dag_.schedule_interval_s) {
      const std::int64_t slot = claims.empty() ? 1 : claims.back().slot + 1;
      add.push_back({{"event", "run_claimed"},
                     {"dag", dag_.name},
                     {"run_id", make_run_id(dag_.name, slot)},
                     {"slot", slot},
                     {"at", now}});
    }
    return add;
  });
  std::vector<std::string> due;
  for (const auto& e : added) due.push_back(e.at("run_id").get<std::string>());
  return due;
}

std::optional<RunClaim> Scheduler::last_claim() const {
  auto all = claims();
  if (all.empty()) return std::nullopt;
  return all.back();
}

std::vector<RunClaim> Scheduler::claims() const { return claims_in(ledger_.events(), dag_.name); }

}  // namespace edgepipe
