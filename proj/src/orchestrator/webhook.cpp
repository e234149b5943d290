#include <regex>

#include "edgepipe/orchestrator/alerts.hpp"
#include "httplib.h"

namespace edgepipe {

bool post_webhook(const std::string& url, const std::string& body, std::chrono::milliseconds timeout) {
  static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) return false;
  httplib::Client cli(m[1].str());
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const std::string path = m[2].matched ? m[2].str() : "/";
  auto res = cli.Post(path, body, "application/json");
  return res && res->status >= 200 && res->status < 300;
}

}  // namespace edgepipe
