// Text (JSON) persistence for trained GP models.

#pragma once

#include <filesystem>

#include <json.hpp>

#include "csam/gp.hpp"

namespace csam {

inline constexpr int kGpFormatVersion = 1;

[[nodiscard]] nlohmann::json gp_to_json(const GpModel& model);
[[nodiscard]] GpModel gp_from_json(const nlohmann::json& j);

/// Writes {"format": "csam-gp", "version": 1, "meta": meta, "outputs": [...]}.
void save_gp(const MultiOutputGp& model, const std::filesystem::path& path,
             const nlohmann::json& meta = nlohmann::json::object());

struct LoadedGp {
  MultiOutputGp model;
  nlohmann::json meta;
};
[[nodiscard]] LoadedGp load_gp(const std::filesystem::path& path);

}  // namespace csam
