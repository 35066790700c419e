#include "csam/run_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <openssl/sha.h>

#include "csam/config.hpp"
#include "csam/gp_io.hpp"

namespace csam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const fs::path& path, std::size_t line, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError(path.string(), line, "bad number '" + s + "'");
  return v;
}

std::size_t parse_count(const fs::path& path, std::size_t line, const std::string& s) {
  const double v = parse_real(path, line, s);
  if (v < 0.0 || v != std::floor(v)) throw ParseError(path.string(), line, "bad count '" + s + "'");
  return static_cast<std::size_t>(v);
}

// Opens a versioned CSV and checks the schema line and the header.
std::ifstream open_csv(const fs::path& path, const char* header, std::size_t& line_no) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  line_no = 1;
  if (!std::getline(in, line)) throw ParseError(path.string(), line_no, "empty file");
  const std::string prefix = "# schema_version=";
  if (line.rfind(prefix, 0) != 0) throw ParseError(path.string(), line_no, "missing schema version");
  if (line.substr(prefix.size()) != std::to_string(kCsvSchemaVersion)) {
    throw ParseError(path.string(), line_no, "unsupported schema version '" + line.substr(prefix.size()) + "'");
  }
  ++line_no;
  if (!std::getline(in, line) || line != header) throw ParseError(path.string(), line_no, "unexpected header");
  return in;
}

std::ofstream create(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Run-level summary shared by the run and eval commands.
struct RunMetrics {
  std::size_t episodes = 0;
  double final_mean = 0.0;
  double final_sd = 0.0;
  double last2_mean = 0.0;
  double pred_rate_t1 = 0.0;  // mean over episodes, %
  double deviation_t1 = 0.0;  // mean realised deviation at t = 1
  double steps_to_ref_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t reached = 0;
  std::size_t interrupts = 0;
};

RunMetrics compute_metrics(const std::vector<EpisodeLog>& episodes, double reference_err) {
  RunMetrics m;
  m.episodes = episodes.size();
  std::vector<double> finals, rates, devs, reach;
  for (const auto& e : episodes) {
    finals.push_back(e.final_chamfer());
    const auto& first = e.steps.front();
    rates.push_back(shape_prediction_error_rate(first.predicted_err, first.realized_err));
    devs.push_back(first.deviation);
    if (const auto s = steps_to_reference(e, reference_err)) reach.push_back(static_cast<double>(*s));
    m.interrupts += e.interrupts();
  }
  m.final_mean = mean(finals);
  m.final_sd = stddev(finals);
  const std::size_t k = std::min<std::size_t>(2, finals.size());
  m.last2_mean = mean(std::vector<double>(finals.end() - static_cast<std::ptrdiff_t>(k), finals.end()));
  m.pred_rate_t1 = mean(rates);
  m.deviation_t1 = mean(devs);
  m.reached = reach.size();
  if (!reach.empty()) m.steps_to_ref_mean = mean(reach);
  return m;
}

json metrics_json(const RunMetrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"episodes", m.episodes},       {"final_chamfer_mean", num(m.final_mean)},
          {"final_chamfer_sd", num(m.final_sd)}, {"last2_final_chamfer_mean", num(m.last2_mean)},
          {"pred_err_rate_t1", num(m.pred_rate_t1)}, {"deviation_t1", num(m.deviation_t1)},
          {"steps_to_ref_mean", num(m.steps_to_ref_mean)}, {"reached", m.reached},
          {"interrupts", m.interrupts}};
}

void write_logs(const fs::path& dir, const std::vector<EpisodeLog>& episodes, double reference_err) {
  fs::create_directories(dir);
  write_episodes_csv(dir / "episodes.csv", summarize_episodes(episodes, reference_err));
  write_steps_csv(dir / "steps.csv", episodes);
}

bool close(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol;
}

}  // namespace

std::vector<EpisodeRow> summarize_episodes(const std::vector<EpisodeLog>& episodes, double reference_err) {
  std::vector<EpisodeRow> rows;
  for (const auto& e : episodes) {
    rows.push_back({e.episode, e.final_chamfer(), steps_to_reference(e, reference_err), e.interrupts()});
  }
  return rows;
}

void write_episodes_csv(const fs::path& path, const std::vector<EpisodeRow>& rows) {
  auto out = create(path);
  out << "# schema_version=" << kCsvSchemaVersion << '\n' << kEpisodesHeader << '\n';
  for (const auto& r : rows) {
    out << r.episode << ',' << fmt(r.final_chamfer) << ','
        << (r.steps_to_ref ? std::to_string(*r.steps_to_ref) : std::string("none")) << ','
        << r.interrupts << '\n';
  }
}

void write_steps_csv(const fs::path& path, const std::vector<EpisodeLog>& episodes) {
  auto out = create(path);
  out << "# schema_version=" << kCsvSchemaVersion << '\n' << kStepsHeader << '\n';
  for (const auto& e : episodes) {
    for (const auto& s : e.steps) {
      out << s.episode << ',' << s.t << ',' << fmt(s.chamfer) << ',' << fmt(s.action.roll) << ','
          << fmt(s.action.pitch) << ',' << fmt(s.action.z) << ',' << fmt(s.deviation) << ','
          << fmt(s.predicted_err) << ',' << fmt(s.realized_err) << ',' << fmt(s.cost.shape) << ','
          << fmt(s.cost.overcut) << ',' << fmt(s.cost.variance) << ',' << (s.interrupted ? 1 : 0)
          << '\n';
    }
  }
}

std::vector<EpisodeRow> read_episodes_csv(const fs::path& path) {
  std::size_t line_no = 0;
  auto in = open_csv(path, kEpisodesHeader, line_no);
  std::vector<EpisodeRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 4) throw ParseError(path.string(), line_no, "expected 4 columns");
    EpisodeRow r;
    r.episode = parse_count(path, line_no, c[0]);
    r.final_chamfer = parse_real(path, line_no, c[1]);
    if (c[2] != "none") r.steps_to_ref = parse_count(path, line_no, c[2]);
    r.interrupts = parse_count(path, line_no, c[3]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<EpisodeLog> read_steps_csv(const fs::path& path) {
  std::size_t line_no = 0;
  auto in = open_csv(path, kStepsHeader, line_no);
  std::vector<EpisodeLog> episodes;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 13) throw ParseError(path.string(), line_no, "expected 13 columns");
    StepLog s;
    s.episode = parse_count(path, line_no, c[0]);
    s.t = parse_count(path, line_no, c[1]);
    s.chamfer = parse_real(path, line_no, c[2]);
    s.action = {parse_real(path, line_no, c[3]), parse_real(path, line_no, c[4]),
                parse_real(path, line_no, c[5])};
    s.deviation = parse_real(path, line_no, c[6]);
    s.predicted_err = parse_real(path, line_no, c[7]);
    s.realized_err = parse_real(path, line_no, c[8]);
    s.cost = {parse_real(path, line_no, c[9]), parse_real(path, line_no, c[10]),
              parse_real(path, line_no, c[11])};
    s.interrupted = parse_count(path, line_no, c[12]) != 0;
    if (episodes.empty() || episodes.back().episode != s.episode) {
      episodes.push_back({});
      episodes.back().episode = s.episode;
    }
    episodes.back().steps.push_back(s);
  }
  return episodes;
}

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::ostringstream hex;
  for (unsigned char b : digest) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
  return hex.str();
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig base;
  try {
    if (!fs::exists(options.config)) {
      err << "error: config file not found: " << options.config.string() << '\n';
      return 1;
    }
    base = load_config(options.config);
    if (options.policy) base.experiment.policy = parse_policy(*options.policy);
    if (options.object) base.experiment.env.object.kind = parse_object_kind(*options.object);
    base.experiment.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  std::vector<std::uint64_t> seeds = options.seeds;
  if (seeds.empty()) seeds.push_back(base.experiment.seed);

  try {
    MbrlOptions mopts;
    mopts.retrain = base.retrain;
    if (!base.model_path.empty() && base.experiment.policy == Policy::kProposed) {
      fs::path mp = base.model_path;
      if (mp.is_relative()) mp = options.config.parent_path() / mp;
      auto loaded = load_gp(mp);
      if (loaded.model.dim() != feature_dim(base.experiment.env.mode)) {
        err << "error: model input dimension does not match feature_mode\n";
        return 1;
      }
      mopts.model = std::move(loaded.model);
      mopts.model_init_err = loaded.meta.value("init_err", 0.0);
    }

    for (const auto seed : seeds) {
      RunConfig cfg = base;
      cfg.experiment.seed = seed;
      const fs::path dir = options.out / ("seed_" + std::to_string(seed));
      fs::create_directories(dir);
      const std::string ini = to_ini(cfg);
      { create(dir / "config.ini") << ini; }

      const MbrlResult result = run_mbrl(cfg.experiment, mopts);

      // Reference Line from a PROPOSED_GT batch under the same seeds.
      std::vector<EpisodeLog> reference = result.episodes;
      if (cfg.experiment.policy != Policy::kProposedGt) {
        ExperimentConfig gt = cfg.experiment;
        gt.policy = Policy::kProposedGt;
        reference = run_mbrl(gt).episodes;
        write_logs(dir / "reference", reference, reference_line(reference, gt.reference_factor));
      }
      const double ref_err = reference_line(reference, cfg.experiment.reference_factor);
      write_logs(dir, result.episodes, ref_err);

      json files = {"config.ini", "episodes.csv", "steps.csv"};
      if (result.model) {
        const json meta = {{"init_err", result.init_err},
                           {"feature_mode", std::string(to_string(cfg.experiment.env.mode))},
                           {"object", std::string(to_string(cfg.experiment.env.object.kind))},
                           {"seed", seed},
                           {"rows", result.data.size()}};
        save_gp(*result.model, dir / "model.json", meta);
        files.push_back("model.json");
      }
      if (cfg.experiment.policy != Policy::kProposedGt) {
        files.push_back("reference/episodes.csv");
        files.push_back("reference/steps.csv");
      }
      const RunMetrics m = compute_metrics(result.episodes, ref_err);
      json manifest = {{"schema_version", kCsvSchemaVersion},
                       {"tool", "grind_mbrl"},
                       {"seed", seed},
                       {"policy", std::string(to_string(cfg.experiment.policy))},
                       {"object", std::string(to_string(cfg.experiment.env.object.kind))},
                       {"output_dir", dir.string()},
                       {"config", "config.ini"},
                       {"config_sha1", git_blob_sha1(ini)},
                       {"model_source", base.model_path},
                       {"init_err", result.init_err},
                       {"reference_err", ref_err},
                       {"dataset_rows", result.data.size()},
                       {"dataset_interrupted", result.data.interrupted_count()},
                       {"initial_attempts", result.initial_attempts},
                       {"metrics", metrics_json(m)},
                       {"files", files}};
      create(dir / "manifest.json") << manifest.dump(2) << '\n';
      out << "seed " << seed << ": policy=" << to_string(cfg.experiment.policy)
          << " object=" << to_string(cfg.experiment.env.object.kind)
          << " final_chamfer_mean=" << fmt(m.final_mean) << " reference=" << fmt(ref_err)
          << " interrupts=" << m.interrupts << " -> " << dir.string() << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gen-shapes

int cmd_gen_shapes(const GenShapesOptions& options, std::ostream& out, std::ostream& err) {
  std::vector<ObjectKind> kinds;
  try {
    if (options.object == "all") {
      kinds = {ObjectKind::kA, ObjectKind::kB, ObjectKind::kC};
    } else {
      kinds = {parse_object_kind(options.object)};
    }
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << " (expected A, B, C or all)\n";
    return 2;
  }
  try {
    ObjectSpec spec;
    if (options.config) spec = load_config(*options.config).experiment.env.object;
    if (options.density) spec.density = *options.density;
    fs::create_directories(options.out);
    for (const auto kind : kinds) {
      spec.kind = kind;
      const auto clouds = make_object(spec, options.seed);
      const std::string k(to_string(kind));
      save_cloud(clouds.initial, options.out / ("initial_" + k + ".xyz"));
      save_cloud(clouds.target, options.out / ("target_" + k + ".xyz"));
      out << k << ": initial " << clouds.initial.size() << " points, target " << clouds.target.size()
          << " points\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> dirs;
  if (fs::is_directory(run_dir)) {
    if (fs::exists(run_dir / "manifest.json")) {
      dirs.push_back(run_dir);
    } else {
      for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) dirs.push_back(entry.path());
      }
    }
  }
  if (dirs.empty()) {
    err << "error: no runs (manifest.json) found under " << run_dir.string() << '\n';
    return 1;
  }
  std::sort(dirs.begin(), dirs.end());

  constexpr double kTol = 1e-9;
  std::ostringstream csv;
  csv << "# schema_version=" << kCsvSchemaVersion << '\n'
      << "run,episodes,final_chamfer_mean,final_chamfer_sd,last2_final_chamfer_mean,pred_err_rate_t1,"
         "deviation_t1,steps_to_ref_mean,reached,interrupts\n";
  auto row = [&](const std::string& name, const RunMetrics& m) {
    csv << name << ',' << m.episodes << ',' << fmt(m.final_mean) << ',' << fmt(m.final_sd) << ','
        << fmt(m.last2_mean) << ',' << fmt(m.pred_rate_t1) << ',' << fmt(m.deviation_t1) << ','
        << fmt(m.steps_to_ref_mean) << ',' << m.reached << ',' << m.interrupts << '\n';
    out << std::left << std::setw(16) << name << " final " << std::setprecision(6) << m.final_mean
        << " +- " << m.final_sd << "  pred_err@t1 " << m.pred_rate_t1 << "%  dev@t1 " << m.deviation_t1
        << "  steps_to_ref " << m.steps_to_ref_mean << " (" << m.reached << "/" << m.episodes
        << ")  interrupts " << m.interrupts << '\n';
  };

  std::vector<RunMetrics> all;
  try {
    for (const auto& dir : dirs) {
      const json manifest = json::parse(read_file(dir / "manifest.json"));
      const int version = manifest.at("schema_version").get<int>();
      if (version != kCsvSchemaVersion) {
        err << "error: " << dir.string() << ": unsupported schema version " << version << '\n';
        return 1;
      }
      const auto episodes = read_steps_csv(dir / "steps.csv");
      const auto logged = read_episodes_csv(dir / "episodes.csv");
      if (episodes.empty()) throw std::runtime_error(dir.string() + ": steps.csv has no rows");
      const double ref_err = manifest.at("reference_err").get<double>();
      const auto recomputed = summarize_episodes(episodes, ref_err);
      if (recomputed.size() != logged.size()) throw std::runtime_error(dir.string() + ": episode count mismatch");
      for (std::size_t i = 0; i < logged.size(); ++i) {
        const auto& a = recomputed[i];
        const auto& b = logged[i];
        if (a.episode != b.episode || !close(a.final_chamfer, b.final_chamfer, kTol) ||
            a.steps_to_ref != b.steps_to_ref || a.interrupts != b.interrupts) {
          throw std::runtime_error(dir.string() + ": episodes.csv disagrees with steps.csv at episode " +
                                   std::to_string(b.episode));
        }
      }
      const RunMetrics m = compute_metrics(episodes, ref_err);
      const auto& lm = manifest.at("metrics");
      auto check = [&](const char* key, double v) {
        const double logged_v = lm.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                      : lm.at(key).get<double>();
        if (!close(v, logged_v, kTol)) {
          throw std::runtime_error(dir.string() + ": recomputed " + key + " differs from run-time value");
        }
      };
      check("final_chamfer_mean", m.final_mean);
      check("pred_err_rate_t1", m.pred_rate_t1);
      check("deviation_t1", m.deviation_t1);
      check("steps_to_ref_mean", m.steps_to_ref_mean);
      row(dir.filename().string(), m);
      all.push_back(m);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  // Aggregate: mean of the per-run values.
  RunMetrics agg;
  std::vector<double> finals, last2, rates, devs, reach;
  for (const auto& m : all) {
    agg.episodes += m.episodes;
    agg.reached += m.reached;
    agg.interrupts += m.interrupts;
    finals.push_back(m.final_mean);
    last2.push_back(m.last2_mean);
    rates.push_back(m.pred_rate_t1);
    devs.push_back(m.deviation_t1);
    if (!std::isnan(m.steps_to_ref_mean)) reach.push_back(m.steps_to_ref_mean);
  }
  agg.final_mean = mean(finals);
  agg.final_sd = stddev(finals);
  agg.last2_mean = mean(last2);
  agg.pred_rate_t1 = mean(rates);
  agg.deviation_t1 = mean(devs);
  agg.steps_to_ref_mean = mean(reach);
  row("aggregate", agg);
  try {
    create(run_dir / "summary.csv") << csv.str();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace csam
