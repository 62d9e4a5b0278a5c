#include "pamir/model_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace pamir {

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& m) {
  json doc;
  doc["rows"] = m.rows();
  doc["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  doc["data"] = data;  // row-major
  return doc;
}

Matrix matrix_from_json(const json& doc, const std::string& what) {
  if (!doc.contains("rows") || !doc.contains("cols") || !doc.contains("data"))
    throw Error("model file: malformed matrix '" + what + "'");
  const Eigen::Index rows = doc["rows"].get<Eigen::Index>();
  const Eigen::Index cols = doc["cols"].get<Eigen::Index>();
  const auto data = doc["data"].get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      data.size() != static_cast<std::size_t>(rows * cols))
    throw Error("model file: matrix '" + what + "' has inconsistent shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[k++];
  return m;
}

std::vector<double> vector_to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

Vector vector_from_std(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

json basis_to_json(const BasisSpec& spec) {
  json doc;
  switch (spec.kind) {
    case BasisSpec::Kind::Polynomial:
      doc["kind"] = "polynomial";
      doc["degree"] = spec.degree;
      break;
    case BasisSpec::Kind::Identity:
      doc["kind"] = "identity";
      break;
    case BasisSpec::Kind::Table: {
      doc["kind"] = "table";
      json entries = json::array();
      for (const auto& [y, h] : spec.table) {
        json e;
        e["y"] = y;
        e["h"] = vector_to_std(h);
        entries.push_back(e);
      }
      doc["entries"] = entries;
      break;
    }
  }
  return doc;
}

BasisSpec basis_from_json(const json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "polynomial")
    return BasisSpec::polynomial(doc.at("degree").get<int>());
  if (kind == "identity") return BasisSpec::identity();
  if (kind == "table") {
    std::vector<std::pair<double, Vector>> entries;
    for (const auto& e : doc.at("entries"))
      entries.emplace_back(e.at("y").get<double>(),
                           vector_from_std(e.at("h").get<std::vector<double>>()));
    return BasisSpec::from_table(std::move(entries));
  }
  throw Error("model file: unknown basis kind '" + kind + "'");
}

json mh_to_json(const MHConfig& mh) {
  json doc;
  doc["burn_in"] = mh.burn_in;
  doc["n_keep"] = mh.n_keep;
  doc["proposal_scale"] = mh.proposal_scale;
  doc["thinning"] = mh.thinning;
  doc["auto_tune"] = mh.auto_tune;
  return doc;
}

MHConfig mh_from_json(const json& doc) {
  MHConfig mh;
  mh.burn_in = doc.at("burn_in").get<int>();
  mh.n_keep = doc.at("n_keep").get<int>();
  mh.proposal_scale = doc.at("proposal_scale").get<double>();
  mh.thinning = doc.at("thinning").get<int>();
  mh.auto_tune = doc.at("auto_tune").get<bool>();
  return mh;
}

}  // namespace

ModelFile make_model_file(const FitResult& result, const Dataset& data,
                          const std::vector<std::string>& taxa,
                          const FitConfig& cfg) {
  if (static_cast<Eigen::Index>(taxa.size()) != data.p())
    throw Error("make_model_file: taxa list does not match p");
  ModelFile model;
  model.theta = result.theta;
  model.taxa = taxa;
  model.basis_spec = data.basis_spec();
  model.basis_offset = data.basis_offset();
  model.training_responses = data.responses();
  model.meta.seed = cfg.seed;
  model.meta.converged = result.converged;
  model.meta.iterations = result.iterations_used;
  model.meta.final_delta = result.final_delta;
  model.meta.mean_acceptance = result.mean_acceptance;
  model.meta.max_constraint_violation = result.max_constraint_violation;
  model.meta.config = cfg;
  return model;
}

std::string model_to_json(const ModelFile& model) {
  json doc;
  doc["format"] = "pamir-model";
  doc["version"] = model.version;
  doc["p"] = model.theta.p();
  doc["d"] = model.theta.d();
  doc["r"] = model.theta.r();
  doc["taxa"] = model.taxa;
  doc["mu"] = vector_to_std(model.theta.mu);
  doc["gamma"] = matrix_to_json(model.theta.gamma);
  doc["beta"] = matrix_to_json(model.theta.beta);
  doc["sigma"] = matrix_to_json(model.theta.sigma);
  doc["basis"] = basis_to_json(model.basis_spec);
  doc["basis_offset"] = vector_to_std(model.basis_offset);
  doc["training_responses"] = model.training_responses;

  json fitdoc;
  fitdoc["seed"] = model.meta.seed;
  fitdoc["converged"] = model.meta.converged;
  fitdoc["iterations"] = model.meta.iterations;
  fitdoc["final_delta"] = model.meta.final_delta;
  fitdoc["mean_acceptance"] = model.meta.mean_acceptance;
  fitdoc["max_constraint_violation"] = model.meta.max_constraint_violation;
  json cfgdoc;
  cfgdoc["d"] = model.meta.config.d;
  cfgdoc["max_em_iters"] = model.meta.config.max_em_iters;
  cfgdoc["em_tol"] = model.meta.config.em_tol;
  cfgdoc["inner_max_iters"] = model.meta.config.inner_max_iters;
  cfgdoc["inner_tol"] = model.meta.config.inner_tol;
  cfgdoc["sigma_jitter"] = model.meta.config.sigma_jitter;
  cfgdoc["mh"] = mh_to_json(model.meta.config.mh);
  fitdoc["config"] = cfgdoc;
  doc["fit"] = fitdoc;
  return doc.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("model file: invalid JSON: ") + e.what());
  }
  try {
    if (!doc.contains("version"))
      throw Error("model file: missing mandatory 'version' field");
    ModelFile model;
    model.version = doc["version"].get<int>();
    if (model.version != kModelFileVersion)
      throw Error("model file: unsupported version " +
                  std::to_string(model.version));
    if (doc.value("format", std::string()) != "pamir-model")
      throw Error("model file: not a pamir model document");

    model.taxa = doc.at("taxa").get<std::vector<std::string>>();
    model.theta.mu =
        vector_from_std(doc.at("mu").get<std::vector<double>>());
    model.theta.gamma = matrix_from_json(doc.at("gamma"), "gamma");
    model.theta.beta = matrix_from_json(doc.at("beta"), "beta");
    model.theta.sigma = matrix_from_json(doc.at("sigma"), "sigma");
    model.basis_spec = basis_from_json(doc.at("basis"));
    model.basis_offset =
        vector_from_std(doc.at("basis_offset").get<std::vector<double>>());
    model.training_responses =
        doc.at("training_responses").get<std::vector<double>>();

    const json& fitdoc = doc.at("fit");
    model.meta.seed = fitdoc.at("seed").get<std::uint64_t>();
    model.meta.converged = fitdoc.at("converged").get<bool>();
    model.meta.iterations = fitdoc.at("iterations").get<int>();
    model.meta.final_delta = fitdoc.at("final_delta").get<double>();
    model.meta.mean_acceptance = fitdoc.at("mean_acceptance").get<double>();
    model.meta.max_constraint_violation =
        fitdoc.at("max_constraint_violation").get<double>();
    const json& cfgdoc = fitdoc.at("config");
    model.meta.config.d = cfgdoc.at("d").get<int>();
    model.meta.config.max_em_iters = cfgdoc.at("max_em_iters").get<int>();
    model.meta.config.em_tol = cfgdoc.at("em_tol").get<double>();
    model.meta.config.inner_max_iters =
        cfgdoc.at("inner_max_iters").get<int>();
    model.meta.config.inner_tol = cfgdoc.at("inner_tol").get<double>();
    model.meta.config.sigma_jitter = cfgdoc.at("sigma_jitter").get<double>();
    model.meta.config.mh = mh_from_json(cfgdoc.at("mh"));
    model.meta.config.seed = model.meta.seed;

    if (static_cast<Eigen::Index>(model.taxa.size()) != model.theta.p())
      throw Error("model file: taxa list does not match p");
    if (model.training_responses.empty())
      throw Error("model file: no training responses");
    model.theta.validate();
    return model;
  } catch (const json::exception& e) {
    throw Error(std::string("model file: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  out << model_to_json(model);
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace pamir
