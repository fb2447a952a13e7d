#ifndef FIELDSPACE_CLI_HPP_
#define FIELDSPACE_CLI_HPP_

#include <functional>
#include <ostream>

namespace fieldspace {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBind = 3;
inline constexpr int kExitNoRoute = 4;
inline constexpr int kExitViolation = 5;

struct CliHooks {
  // Called by `serve` once the port is bound.
  std::function<void(int port)> on_listening;
};

/// Entry point for the fieldspace tool. Request logs and results go to
/// `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const CliHooks& hooks = {});

/// Makes a running `serve` return. Async-signal-safe.
void request_stop();

}  // namespace fieldspace

#endif  // FIELDSPACE_CLI_HPP_
