#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinforge/io.h"

namespace twinforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Bad flags, config values or inputs; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExecOptions {
  std::filesystem::path out;
  bool force = false;
  int jobs = 1;
  std::vector<std::string> argv;
};

std::vector<std::string> CommandNames();

/// Fully populated default config of a command.
io::Json DefaultConfig(const std::string& command);

/// JSON pointer of the seed a command's --seed / TWINFORGE_SEED overrides,
/// or empty when the command is not seeded.
std::string SeedPointer(const std::string& command);

/// Validates `cfg`, prepares the output directory, runs the command and
/// writes the manifest. Returns an exit code; messages go to stderr.
int Execute(const std::string& command, const io::Json& cfg, const ExecOptions& opt);

/// Re-executes the experiment recorded in a manifest into opt.out and
/// compares output digests with the recorded ones.
int Rerun(const std::filesystem::path& manifest, const ExecOptions& opt);

}  // namespace twinforge::cli
