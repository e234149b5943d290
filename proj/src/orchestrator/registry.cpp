#include "edgepipe/orchestrator/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) {
    const auto p = dir / ".lock";
    fd_ = ::open(p.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("registry: cannot open " + p.string());
    ::flock(fd_, LOCK_EX);
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

std::vector<std::int64_t> versions_on_disk(const std::filesystem::path& dir) {
  static const std::regex re(R"(model-v(\d+)\.json)");
  std::vector<std::int64_t> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (std::regex_match(name, m, re)) out.push_back(std::stoll(m[1]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

RegistryEntry entry_from_artifact(const ModelArtifact& a) {
  RegistryEntry e;
  e.version = a.version;
  e.trained_at = a.trained_at;
  e.training_rows = a.training_rows;
  e.test_flag_rate = a.metrics.value("test_flag_rate", 0.0);
  return e;
}

}  // namespace

ApprovalOutcome check_approval(const nlohmann::json& metrics, const ApprovalCriteria& c) {
  ApprovalOutcome out;
  if (!metrics.contains("test_flag_rate") || !metrics["test_flag_rate"].is_number()) {
    out.reason = "metrics lack test_flag_rate";
    return out;
  }
  out.flag_rate = metrics["test_flag_rate"].get<double>();
  char buf[160];
  if (metrics.contains("stable") && !metrics["stable"].get<bool>()) {
    out.reason = "training flag count unstable";
    return out;
  }
  const double dev = std::fabs(out.flag_rate - c.contamination);
  // Small slack so a rate sitting exactly on the band edge is not lost to rounding.
  out.approved = dev <= c.band + 1e-12;
  std::snprintf(buf, sizeof buf, "test flag rate %.4f %s %.4f +/- %.4f", out.flag_rate,
                out.approved ? "within" : "outside", c.contamination, c.band);
  out.reason = buf;
  return out;
}

ModelRegistry::ModelRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("registry: cannot create " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ModelRegistry::artifact_path(std::int64_t version) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "model-v%06lld.json", static_cast<long long>(version));
  return dir_ / buf;
}

std::vector<RegistryEntry> ModelRegistry::read_index_locked() const {
  std::vector<RegistryEntry> entries;
  const auto idx = dir_ / "index.json";
  if (std::filesystem::exists(idx)) {
    const auto j = nlohmann::json::parse(read_file(idx), nullptr, false);
    if (j.is_discarded() || !j.contains("models")) throw DataError("registry: bad index " + idx.string());
    for (const auto& m : j["models"]) {
      RegistryEntry e;
      e.version = m.at("version").get<std::int64_t>();
      e.approved = m.value("approved", false);
      e.trained_at = m.value("trained_at", "");
      e.training_rows = m.value("training_rows", std::size_t{0});
      e.test_flag_rate = m.value("test_flag_rate", 0.0);
      e.approved_at = m.value("approved_at", "");
      e.note = m.value("note", "");
      entries.push_back(std::move(e));
    }
  }
  // An artifact written just before a crash may be missing from the index.
  for (auto v : versions_on_disk(dir_)) {
    const bool known = std::any_of(entries.begin(), entries.end(), [&](const RegistryEntry& e) { return e.version == v; });
    if (!known) {
      entries.push_back(entry_from_artifact(ModelArtifact::from_json(nlohmann::json::parse(read_file(artifact_path(v))))));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.version < b.version; });
  return entries;
}

void ModelRegistry::write_index_locked(const std::vector<RegistryEntry>& entries) const {
  nlohmann::ordered_json j;
  j["format"] = 1;
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json m;
    m["version"] = e.version;
    m["approved"] = e.approved;
    m["trained_at"] = e.trained_at;
    m["training_rows"] = e.training_rows;
    m["test_flag_rate"] = e.test_flag_rate;
    m["approved_at"] = e.approved_at;
    m["note"] = e.note;
    j["models"].push_back(m);
  }
  write_file_atomic(dir_ / "index.json", j.dump(2) + "\n");
}

std::int64_t ModelRegistry::publish(ModelArtifact artifact) {
  std::lock_guard guard(mu_);
  DirLock lock(dir_);
  auto entries = read_index_locked();
  const std::int64_t version = entries.empty() ? 1 : entries.back().version + 1;
  artifact.version = version;
  artifact.approved = false;
  const auto path = artifact_path(version);
  if (std::filesystem::exists(path)) throw IoError("registry: refusing to overwrite " + path.string());
  write_file_atomic(path, artifact.to_json().dump() + "\n");
  entries.push_back(entry_from_artifact(artifact));
  write_index_locked(entries);
  return version;
}

ModelArtifact ModelRegistry::load(std::int64_t version) const {
  std::lock_guard guard(mu_);
  const auto path = artifact_path(version);
  if (!std::filesystem::exists(path)) throw DataError("registry: no model version " + std::to_string(version));
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError("registry: unparseable " + path.string());
  auto a = ModelArtifact::from_json(j);
  DirLock lock(dir_);
  for (const auto& e : read_index_locked()) {
    if (e.version == version) a.approved = e.approved;
  }
  return a;
}

std::vector<RegistryEntry> ModelRegistry::list() const {
  std::lock_guard guard(mu_);
  DirLock lock(dir_);
  return read_index_locked();
}

std::int64_t ModelRegistry::max_version() const {
  const auto entries = list();
  return entries.empty() ? 0 : entries.back().version;
}

std::optional<std::int64_t> ModelRegistry::latest_approved() const {
  std::optional<std::int64_t> out;
  for (const auto& e : list()) {
    if (e.approved) out = e.version;
  }
  return out;
}

ApprovalOutcome ModelRegistry::approve(std::int64_t version, const ApprovalCriteria& criteria, bool force,
                                       const std::string& at) {
  std::lock_guard guard(mu_);
  DirLock lock(dir_);
  auto entries = read_index_locked();
  auto it = std::find_if(entries.begin(), entries.end(), [&](const RegistryEntry& e) { return e.version == version; });
  if (it == entries.end()) throw DataError("registry: no model version " + std::to_string(version));
  if (it->approved) {
    ApprovalOutcome out;
    out.version = version;
    out.approved = true;
    out.already = true;
    out.flag_rate = it->test_flag_rate;
    out.reason = "already approved";
    return out;
  }
  const auto artifact = ModelArtifact::from_json(nlohmann::json::parse(read_file(artifact_path(version))));
  ApprovalOutcome out = check_approval(artifact.metrics, criteria);
  out.version = version;
  if (!out.approved && force) {
    out.approved = true;
    out.forced = true;
    out.reason = "forced; " + out.reason;
  }
  it->note = (out.approved ? "approved: " : "rejected: ") + out.reason;
  if (out.approved) {
    it->approved = true;
    it->approved_at = at;
  }
  write_index_locked(entries);
  return out;
}

}  // namespace edgepipe
