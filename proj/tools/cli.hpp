#pragma once

#include <memory>
#include <ostream>

#include "CLI11.hpp"

namespace edgepipe::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kRuntime = 2;
inline constexpr int kDataError = 3;

// The full command tree with handlers bound to `out`.
std::unique_ptr<CLI::App> make_app(std::ostream& out);

// Parses and runs. Failures print one line "error: <kind>: <message>" to
// `err`, kind in {usage, runtime, data}.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edgepipe::cli
