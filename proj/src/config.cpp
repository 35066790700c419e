#include "csam/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace csam {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": expected a number, got '" + s + "'");
  }
}

std::size_t to_count(const std::string& key, const std::string& s) {
  const double v = to_double(key, s);
  if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ConfigError("config: " + key + ": expected a non-negative integer, got '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size() || (!s.empty() && s[0] == '-')) throw std::invalid_argument("bad");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": expected an unsigned integer, got '" + s + "'");
  }
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config: " + key + ": expected true/false, got '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// One entry per accepted key: reads into and writes out of a RunConfig.
struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CSAM_REAL(path, member)                                                           \
  {                                                                                       \
    path, {                                                                               \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
          [](const RunConfig& c) { return fmt(c.member); }                                \
    }                                                                                     \
  }
#define CSAM_COUNT(path, member)                                                          \
  {                                                                                       \
    path, {                                                                               \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_count(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }                     \
    }                                                                                     \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      CSAM_COUNT("experiment.n_episode", experiment.n_episode),
      CSAM_COUNT("experiment.task_horizon", experiment.task_horizon),
      {"experiment.policy",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          try {
            c.experiment.policy = parse_policy(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: experiment.policy: ") + e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.experiment.policy)); }}},
      {"experiment.feature_mode",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          try {
            c.experiment.env.mode = parse_feature_mode(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: experiment.feature_mode: ") + e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.experiment.env.mode)); }}},
      {"experiment.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.seed = to_u64(k, v); },
        [](const RunConfig& c) { return std::to_string(c.experiment.seed); }}},
      CSAM_COUNT("experiment.gp_restarts", experiment.gp_restarts),
      CSAM_REAL("experiment.gp_max_lengthscale", experiment.gp_max_lengthscale),
      CSAM_COUNT("experiment.random_retries", experiment.random_retries),
      CSAM_REAL("experiment.reference_factor", experiment.reference_factor),
      {"experiment.model",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.model_path = v; },
        [](const RunConfig& c) { return c.model_path; }}},
      {"experiment.retrain",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.retrain = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.retrain ? "true" : "false"); }}},

      CSAM_COUNT("initial_data.n_init", experiment.initial.n_init),
      CSAM_REAL("initial_data.volume_min", experiment.initial.volume_min),
      CSAM_REAL("initial_data.volume_max", experiment.initial.volume_max),
      CSAM_COUNT("initial_data.max_retries", experiment.initial.max_retries),

      CSAM_COUNT("planner.horizon", experiment.planner.horizon),
      CSAM_COUNT("planner.n_samples", experiment.planner.n_samples),
      CSAM_REAL("planner.alpha", experiment.planner.alpha),
      CSAM_REAL("planner.beta", experiment.planner.beta),
      CSAM_REAL("planner.eta_floor", experiment.planner.eta_floor),
      CSAM_REAL("planner.overcut_penalty", experiment.planner.overcut_penalty),
      CSAM_REAL("planner.overcut_margin", experiment.planner.overcut_margin),
      CSAM_COUNT("planner.cost_downsample", experiment.planner.cost_downsample),

      CSAM_REAL("bounds.roll_max", experiment.env.bounds.roll_max),
      CSAM_REAL("bounds.pitch_max", experiment.env.bounds.pitch_max),
      CSAM_REAL("bounds.z_min", experiment.env.bounds.z_min),
      CSAM_REAL("bounds.z_max", experiment.env.bounds.z_max),

      {"object.kind",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          try {
            c.experiment.env.object.kind = parse_object_kind(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: object.kind: ") + e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.experiment.env.object.kind)); }}},
      CSAM_REAL("object.half_width", experiment.env.object.half_width),
      CSAM_REAL("object.base_height", experiment.env.object.base_height),
      CSAM_REAL("object.stock_top", experiment.env.object.stock_top),
      CSAM_REAL("object.target_height", experiment.env.object.target_height),
      CSAM_REAL("object.wedge_slope", experiment.env.object.wedge_slope),
      CSAM_REAL("object.step_low", experiment.env.object.step_low),
      CSAM_REAL("object.frustum_slope", experiment.env.object.frustum_slope),
      CSAM_REAL("object.plateau_half", experiment.env.object.plateau_half),
      CSAM_REAL("object.density", experiment.env.object.density),
      CSAM_REAL("object.jitter", experiment.env.object.jitter),

      CSAM_REAL("resistance.k_sim", experiment.env.resistance.k_sim),
      CSAM_REAL("resistance.lambda", experiment.env.resistance.lambda),
      CSAM_REAL("resistance.belt_speed", experiment.env.resistance.belt_speed),
      CSAM_REAL("resistance.angle_gain", experiment.env.resistance.angle_gain),
      CSAM_REAL("resistance.v_max", experiment.env.resistance.v_max),
      CSAM_REAL("resistance.dev_large", experiment.env.resistance.dev_large),
  };
  return table;
}

#undef CSAM_REAL
#undef CSAM_COUNT

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  const auto& table = fields();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' outside of a section");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("config: unknown key '" + full + "'");
      it->second.set(c, full, trim(value.data()));
    }
  }
  try {
    c.experiment.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream out;
  std::string current;
  for (const auto& [full, field] : fields()) {
    const auto dot = full.find('.');
    const std::string section = full.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    const std::string value = field.get(c);
    if (value.empty()) continue;
    out << full.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace csam
