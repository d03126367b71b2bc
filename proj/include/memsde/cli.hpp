#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "memsde/config.hpp"

namespace memsde {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> T;
  std::optional<double> dt;
  std::optional<std::size_t> n;
  std::optional<std::string> out;
};

const std::vector<std::string>& subcommands();

/// Applies overrides (they win over the config) and re-validates.
RunConfig apply_overrides(RunConfig config, const Overrides& o);

/// Runs one subcommand and writes its artifacts plus manifest.json under the
/// output directory. `config_text` is hashed into the manifest. Returns the
/// exit code; runtime errors propagate as exceptions.
int run_command(const std::string& subcommand, const RunConfig& config,
                const std::string& config_text, const Overrides& overrides, std::size_t threads,
                std::ostream& log);

std::string sha256_hex(const std::string& data);

int cli_main(int argc, char** argv);

}  // namespace memsde
