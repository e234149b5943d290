#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/orchestrator/dag.hpp"
#include "edgepipe/orchestrator/run_ledger.hpp"

namespace edgepipe {

struct RunClaim {
  std::string run_id;
  std::int64_t slot = 0;  // 1, 2, ... per DAG
  std::int64_t claimed_at = 0;
};

// Decides which runs are due and claims them in the ledger before returning
// them, so a slot is handed out once even across restarts and across
// processes sharing the ledger.
//
// The first call ever (no claim for this DAG in the ledger) returns one run.
// After that a run is due iff now >= last claim time + schedule_interval.
class Scheduler {
 public:
  Scheduler(DagSpec dag, RunLedger& ledger);

  std::vector<std::string> schedule(std::int64_t now);

  std::optional<RunClaim> last_claim() const;
  std::vector<RunClaim> claims() const;
  const DagSpec& dag() const { return dag_; }

 private:
  DagSpec dag_;
  RunLedger& ledger_;
};

std::string make_run_id(const std::string& dag, std::int64_t slot);

}  // namespace edgepipe
