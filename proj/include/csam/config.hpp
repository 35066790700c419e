// INI experiment configuration: parsing, validation and canonical output.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "csam/mbrl.hpp"

namespace csam {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ExperimentConfig experiment;
  std::string model_path;  // optional preloaded deviation model (transfer runs)
  bool retrain = true;
};

/// Parses INI text. Missing keys keep their defaults; unknown sections or
/// keys and malformed values raise ConfigError. The result is validated.
[[nodiscard]] RunConfig parse_config(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Canonical INI text; parse_config(to_ini(c)) reproduces c exactly.
[[nodiscard]] std::string to_ini(const RunConfig& c);

}  // namespace csam
