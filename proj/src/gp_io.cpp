#include "csam/gp_io.hpp"

#include <fstream>
#include <stdexcept>

namespace csam {

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json gp_to_json(const GpModel& model) {
  if (!model.trained()) throw std::logic_error("gp_to_json: model is not trained");
  nlohmann::json j;
  j["dim"] = model.dim();
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.inputs().rows(); ++i) {
    rows.push_back(to_vec(model.inputs().row(i).transpose()));
  }
  j["X"] = std::move(rows);
  j["Y"] = to_vec(model.outputs());
  const auto& h = model.hyperparams();
  j["hyperparams"] = {{"lengthscales", h.lengthscales},
                      {"signal_variance", h.signal_variance},
                      {"noise_variance", h.noise_variance}};
  const auto& s = model.standardization();
  j["standardization"] = {{"input_mean", to_vec(s.input_mean)},
                          {"input_scale", to_vec(s.input_scale)},
                          {"output_mean", s.output_mean}};
  return j;
}

GpModel gp_from_json(const nlohmann::json& j) {
  const auto dim = j.at("dim").get<std::size_t>();
  const auto& rows = j.at("X");
  const auto Yv = j.at("Y").get<std::vector<double>>();
  if (rows.size() != Yv.size()) throw std::runtime_error("gp_from_json: X/Y size mismatch");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i].get<std::vector<double>>();
    if (r.size() != dim) throw std::runtime_error("gp_from_json: row dimension mismatch");
    for (std::size_t k = 0; k < dim; ++k) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[k];
  }
  GpHyperparams h;
  const auto& jh = j.at("hyperparams");
  h.lengthscales = jh.at("lengthscales").get<std::vector<double>>();
  h.signal_variance = jh.at("signal_variance").get<double>();
  h.noise_variance = jh.at("noise_variance").get<double>();
  Standardization s;
  const auto& js = j.at("standardization");
  s.input_mean = from_vec(js.at("input_mean").get<std::vector<double>>());
  s.input_scale = from_vec(js.at("input_scale").get<std::vector<double>>());
  s.output_mean = js.at("output_mean").get<double>();
  return GpModel::from_parts(std::move(X), from_vec(Yv), std::move(h), std::move(s));
}

void save_gp(const MultiOutputGp& model, const std::filesystem::path& path,
             const nlohmann::json& meta) {
  nlohmann::json j;
  j["format"] = "csam-gp";
  j["version"] = kGpFormatVersion;
  j["meta"] = meta;
  auto outputs = nlohmann::json::array();
  for (std::size_t k = 0; k < model.num_outputs(); ++k) outputs.push_back(gp_to_json(model.output(k)));
  j["outputs"] = std::move(outputs);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path.string());
  out << j.dump(1) << '\n';
}

LoadedGp load_gp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid model file " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "csam-gp") throw std::runtime_error("not a csam-gp model file: " + path.string());
  if (j.value("version", 0) != kGpFormatVersion) {
    throw std::runtime_error("unsupported model file version in " + path.string());
  }
  std::vector<GpModel> outputs;
  for (const auto& o : j.at("outputs")) outputs.push_back(gp_from_json(o));
  return {MultiOutputGp(std::move(outputs)), j.value("meta", nlohmann::json::object())};
}

}  // namespace csam
