#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <vector>

#include "json.hpp"

namespace edgepipe {

// Append-only NDJSON event log shared by the scheduler and the executor.
// Every operation takes an exclusive flock on the file, so schedulers in
// separate processes see each other's claims. A torn final line (crash
// mid-write) is truncated away on the next write and ignored on read.
class RunLedger {
 public:
  using Events = std::vector<nlohmann::json>;

  explicit RunLedger(std::filesystem::path path);

  void append(const nlohmann::json& event);
  Events events() const;
  // Reads all events and appends whatever `fn` returns, atomically with
  // respect to other RunLedger users of the same file.
  Events transact(const std::function<Events(const Events&)>& fn);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

}  // namespace edgepipe
