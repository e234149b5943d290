#include "edgepipe/orchestrator/run_ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

class LockedFile {
 public:
  explicit LockedFile(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("run ledger: cannot open " + path.string() + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError("run ledger: flock failed: " + std::string(std::strerror(errno)));
    }
  }
  ~LockedFile() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  LockedFile(const LockedFile&) = delete;
  LockedFile& operator=(const LockedFile&) = delete;

  std::string read_all() const {
    std::string out;
    char buf[65536];
    if (::lseek(fd_, 0, SEEK_SET) < 0) throw IoError("run ledger: seek failed");
    while (true) {
      const ssize_t n = ::read(fd_, buf, sizeof buf);
      if (n < 0) throw IoError("run ledger: read failed");
      if (n == 0) break;
      out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
  }

  void truncate(std::size_t size) {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) throw IoError("run ledger: truncate failed");
  }

  void append(const std::string& text) {
    if (::lseek(fd_, 0, SEEK_END) < 0) throw IoError("run ledger: seek failed");
    std::size_t off = 0;
    while (off < text.size()) {
      const ssize_t n = ::write(fd_, text.data() + off, text.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("run ledger: write failed: " + std::string(std::strerror(errno)));
      }
      off += static_cast<std::size_t>(n);
    }
    ::fsync(fd_);
  }

 private:
  int fd_ = -1;
};

RunLedger::Events parse_events(const std::string& text) {
  RunLedger::Events out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: torn
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("run ledger: unparseable line: " + line.substr(0, 80));
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

RunLedger::RunLedger(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void RunLedger::append(const nlohmann::json& event) {
  transact([&](const Events&) { return Events{event}; });
}

RunLedger::Events RunLedger::events() const {
  std::lock_guard lock(mu_);
  LockedFile f(path_);
  return parse_events(f.read_all());
}

RunLedger::Events RunLedger::transact(const std::function<Events(const Events&)>& fn) {
  std::lock_guard lock(mu_);
  LockedFile f(path_);
  const std::string text = f.read_all();
  if (!text.empty() && text.back() != '\n') {
    const auto nl = text.rfind('\n');
    f.truncate(nl == std::string::npos ? 0 : nl + 1);
  }
  const Events existing = parse_events(text);
  Events add = fn(existing);
  std::string out;
  for (const auto& e : add) out += e.dump() + "\n";
  if (!out.empty()) f.append(out);
  return add;
}

}  // namespace edgepipe
