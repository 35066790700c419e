// Run directories: CSV logs, manifests and the run / gen-shapes / eval
// commands behind the grind_mbrl tool.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csam/mbrl.hpp"

namespace csam {

inline constexpr int kCsvSchemaVersion = 1;

inline constexpr const char* kEpisodesHeader = "episode,final_chamfer,steps_to_ref,interrupts";
inline constexpr const char* kStepsHeader =
    "episode,t,chamfer,roll,pitch,z,deviation,predicted_err,realized_err,cost_shape,cost_overcut,"
    "cost_var,interrupted";

struct EpisodeRow {
  std::size_t episode = 0;
  double final_chamfer = 0.0;
  std::optional<std::size_t> steps_to_ref;
  std::size_t interrupts = 0;
};

[[nodiscard]] std::vector<EpisodeRow> summarize_episodes(const std::vector<EpisodeLog>& episodes,
                                                         double reference_err);

/// Both files start with a "# schema_version=N" line, then the header.
void write_episodes_csv(const std::filesystem::path& path, const std::vector<EpisodeRow>& rows);
void write_steps_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& episodes);

/// Throws ParseError on a missing/unknown schema version, a wrong header
/// or a malformed row.
[[nodiscard]] std::vector<EpisodeRow> read_episodes_csv(const std::filesystem::path& path);
[[nodiscard]] std::vector<EpisodeLog> read_steps_csv(const std::filesystem::path& path);

/// Git blob object id: SHA-1 of "blob <size>\0<content>", lowercase hex.
[[nodiscard]] std::string git_blob_sha1(const std::string& content);

struct RunOptions {
  std::filesystem::path config;
  std::vector<std::uint64_t> seeds;  // empty: the config's seed
  std::optional<std::string> policy;
  std::optional<std::string> object;
  std::filesystem::path out = "runs";
};

struct GenShapesOptions {
  std::optional<std::filesystem::path> config;
  std::string object = "all";  // A, B, C or all
  std::uint64_t seed = 0;
  std::optional<double> density;
  std::filesystem::path out = "shapes";
};

/// Each command returns a process exit code and reports problems on `err`.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_gen_shapes(const GenShapesOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

}  // namespace csam
