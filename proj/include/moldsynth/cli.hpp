#pragma once

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

namespace moldsynth::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitRuntime = 4,
  kExitInterrupted = 130,
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "MOLDSYNTH_OUTPUT_ROOT";

/// Set by the SIGINT handler; long-running commands poll it.
std::atomic<bool>& interrupt_flag();
void install_signal_handlers();

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moldsynth::cli
