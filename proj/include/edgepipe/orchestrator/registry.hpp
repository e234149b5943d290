#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/ml/artifact.hpp"

namespace edgepipe {

// Automatic approval gate: the pooled test-set flag rate must lie within
// contamination +/- band. An explicit "stable": false in the metrics also
// fails the gate.
struct ApprovalCriteria {
  double contamination = 0.05;
  double band = 0.02;
};

struct ApprovalOutcome {
  std::int64_t version = 0;
  bool approved = false;
  bool already = false;  // was approved before this call; nothing changed
  bool forced = false;
  double flag_rate = 0.0;
  std::string reason;
};

// Checks metrics["test_flag_rate"] (and metrics["stable"] when present).
ApprovalOutcome check_approval(const nlohmann::json& metrics, const ApprovalCriteria& criteria);

struct RegistryEntry {
  std::int64_t version = 0;
  bool approved = false;
  std::string trained_at;
  std::size_t training_rows = 0;
  double test_flag_rate = 0.0;
  std::string approved_at;
  std::string note;  // last approval decision
};

// Directory of immutable artifacts plus a mutable approval index:
//   <dir>/model-v000001.json   written once, always with approved=false
//   <dir>/index.json           {"format":1,"models":[{version, approved, ...}]}
//   <dir>/.lock                flock target serializing writers
// load() overlays the index's approval state on the artifact.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path dir);

  // Assigns version max_version()+1, stores the artifact unapproved, and
  // returns the version.
  std::int64_t publish(ModelArtifact artifact);

  ModelArtifact load(std::int64_t version) const;  // DataError when absent
  std::vector<RegistryEntry> list() const;
  std::int64_t max_version() const;  // 0 when empty
  std::optional<std::int64_t> latest_approved() const;

  // Approves iff check_approval passes or `force` is set. A version that is
  // already approved is left untouched (already = true). DataError when the
  // version does not exist.
  ApprovalOutcome approve(std::int64_t version, const ApprovalCriteria& criteria, bool force = false,
                          const std::string& at = {});

  std::filesystem::path artifact_path(std::int64_t version) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::vector<RegistryEntry> read_index_locked() const;
  void write_index_locked(const std::vector<RegistryEntry>& entries) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

}  // namespace edgepipe
