#include "toepnmf/model_io.hpp"

#include "toepnmf/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace toepnmf {

using json = nlohmann::json;

Vector SparseFilter::dense() const {
  Vector out = Vector::Zero(length);
  for (std::size_t i = 0; i < indices.size(); ++i) out(indices[i]) = values[i];
  return out;
}

void SparseFilter::validate() const {
  if (indices.size() != values.size()) throw DataError("SparseFilter: indices/values length mismatch");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= length) throw DataError("SparseFilter: index out of range");
    if (i > 0 && indices[i] <= indices[i - 1]) throw DataError("SparseFilter: indices not increasing");
    if (!(values[i] > 0.0) || !std::isfinite(values[i]))
      throw DataError("SparseFilter: values must be positive and finite");
  }
}

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity:
      return "identity";
    case TransformKind::convolution:
      return "convolution";
    case TransformKind::window:
      return "window";
  }
  return "identity";
}

TransformKind transform_kind_from_string(const std::string& name) {
  if (name == "identity") return TransformKind::identity;
  if (name == "convolution") return TransformKind::convolution;
  if (name == "window") return TransformKind::window;
  throw DataError("unknown transform kind '" + name + "'");
}

void FactorModel::validate() const {
  if (filter_length < 1 || filter_length > num_taps)
    throw DataError("FactorModel: need 1 <= K <= M");
  if (f.size() != num_taps - filter_length + 1) throw DataError("FactorModel: len(f) != M-K+1");
  if (G.rows() != num_directions || G.cols() != filter_length)
    throw DataError("FactorModel: G must be N x K");
  if (static_cast<Index>(directions.size()) != num_directions)
    throw DataError("FactorModel: directions count != N");
  if (!f.allFinite() || !G.allFinite()) throw DataError("FactorModel: non-finite parameters");
  if ((G.array() < 0.0).any()) throw DataError("FactorModel: G has negative entries");
  if (sparsity) {
    if (static_cast<Index>(sparsity->rows.size()) != num_directions)
      throw DataError("FactorModel: sparse rows count != N");
    for (const auto& r : sparsity->rows) {
      if (r.length != filter_length) throw DataError("FactorModel: sparse row length != K");
      r.validate();
    }
  }
}

namespace {

json to_json(const FactorModel& m) {
  json j;
  j["format_version"] = 1;
  j["M"] = m.num_taps;
  j["N"] = m.num_directions;
  j["K"] = m.filter_length;
  j["sample_rate_hz"] = m.sample_rate_hz;
  j["seed"] = m.seed;
  j["f"] = std::vector<double>(m.f.data(), m.f.data() + m.f.size());
  j["training_log"] = m.training_log;
  json dirs = json::array();
  for (const auto& d : m.directions) dirs.push_back({{"az_deg", d.azimuth_deg}, {"el_deg", d.elevation_deg}});
  j["directions"] = std::move(dirs);
  if (!m.sparsity) {
    json g = json::array();
    for (Index r = 0; r < m.G.rows(); ++r) {
      json row = json::array();
      for (Index c = 0; c < m.G.cols(); ++c) row.push_back(m.G(r, c));
      g.push_back(std::move(row));
    }
    j["G"] = std::move(g);
  } else {
    const auto& s = *m.sparsity;
    json g = json::array();
    for (const auto& row : s.rows) g.push_back({{"indices", row.indices}, {"values", row.values}});
    j["G"] = std::move(g);
    j["lambda"] = s.lambda;
    j["transform"] = {{"kind", to_string(s.transform.kind)}, {"sigma", s.transform.sigma}};
    j["prune_threshold"] = s.prune_threshold;
    json nnze = json::array();
    for (const auto& row : s.rows) nnze.push_back(row.nnze());
    // JSON has no infinity; an empty reconstruction's SD is written as null.
    json sd = json::array();
    for (const double v : s.sd_db) sd.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    j["per_direction"] = {{"nnze", std::move(nnze)}, {"sd_db", std::move(sd)}};
  }
  return j;
}

FactorModel from_json(const json& j) {
  FactorModel m;
  if (j.at("format_version").get<int>() != 1) throw DataError("unsupported model format_version");
  m.num_taps = j.at("M").get<Index>();
  m.num_directions = j.at("N").get<Index>();
  m.filter_length = j.at("K").get<Index>();
  m.sample_rate_hz = j.at("sample_rate_hz").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto f = j.at("f").get<std::vector<double>>();
  m.f = Eigen::Map<const Vector>(f.data(), static_cast<Index>(f.size()));
  m.training_log = j.value("training_log", std::vector<double>{});
  for (const auto& d : j.at("directions"))
    m.directions.push_back({d.at("az_deg").get<double>(), d.at("el_deg").get<double>()});
  const auto& g = j.at("G");
  if (static_cast<Index>(g.size()) != m.num_directions) throw DataError("model: G has wrong row count");
  m.G = Matrix::Zero(m.num_directions, m.filter_length);
  if (j.contains("lambda")) {
    SparsityInfo s;
    s.lambda = j.at("lambda").get<double>();
    s.transform.kind = transform_kind_from_string(j.at("transform").at("kind").get<std::string>());
    s.transform.sigma = j.at("transform").at("sigma").get<double>();
    s.prune_threshold = j.at("prune_threshold").get<double>();
    for (Index r = 0; r < m.num_directions; ++r) {
      SparseFilter row;
      row.length = m.filter_length;
      row.indices = g[static_cast<std::size_t>(r)].at("indices").get<std::vector<Index>>();
      row.values = g[static_cast<std::size_t>(r)].at("values").get<std::vector<double>>();
      row.validate();
      m.G.row(r) = row.dense().transpose();
      s.rows.push_back(std::move(row));
    }
    for (const auto& v : j.at("per_direction").at("sd_db"))
      s.sd_db.push_back(v.is_null() ? INFINITY : v.get<double>());
    m.sparsity = std::move(s);
  } else {
    for (Index r = 0; r < m.num_directions; ++r) {
      const auto row = g[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<Index>(row.size()) != m.filter_length) throw DataError("model: G row has wrong length");
      for (Index c = 0; c < m.filter_length; ++c) m.G(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
  m.validate();
  return m;
}

}  // namespace

std::string model_to_json(const FactorModel& model) { return to_json(model).dump(1); }

FactorModel model_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const FactorModel& model, const std::filesystem::path& path) {
  model.validate();
  std::ofstream out(path, std::ios::trunc);
  out << model_to_json(model) << '\n';
  if (!out) throw DataError("cannot write model " + path.string());
}

FactorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace toepnmf
