#pragma once

// `tgformer` command line: generate / train / eval / grad-check / bench-acom.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgf {

/// Bad or inconsistent configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// The full default configuration as a JSON document.
std::string default_config_json();

/// Entry point; never throws. Human output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace tgf
