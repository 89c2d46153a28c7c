#pragma once

// File formats: JSON checkpoints (magic "VICE1"), line-delimited training
// logs, selection/bound CSVs, dense matrix files and JSON reports.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vice/error.hpp"
#include "vice/eval.hpp"
#include "vice/format.hpp"
#include "vice/model.hpp"
#include "vice/optim.hpp"
#include "vice/pruning.hpp"
#include "vice/synthetic.hpp"

namespace vice {

using json = nlohmann::json;

inline constexpr const char* kCheckpointMagic = "VICE1";

enum class Method { kVice, kSpose };

inline std::string to_string(Method m) { return m == Method::kVice ? "vice" : "spose"; }

inline Method method_from_string(const std::string& s) {
  if (s == "vice") return Method::kVice;
  if (s == "spose") return Method::kSpose;
  throw ConfigError("unknown method '" + s + "' (expected vice or spose)");
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& rows, std::size_t m, std::size_t d) {
  if (!rows.is_array() || rows.size() != m) throw DataError("matrix: expected " + std::to_string(m) + " rows");
  Matrix out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < m; ++i) {
    if (!rows[i].is_array() || rows[i].size() != d) throw DataError("matrix: row " + std::to_string(i) + " has wrong length");
    for (std::size_t j = 0; j < d; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
  }
  return out;
}

inline json prior_to_json(const SpikeSlabPrior& p) {
  return {{"pi_spike", p.pi_spike}, {"sigma_spike", p.sigma_spike}, {"sigma_slab", p.sigma_slab}};
}

inline SpikeSlabPrior prior_from_json(const json& j) {
  SpikeSlabPrior p;
  p.pi_spike = j.value("pi_spike", p.pi_spike);
  p.sigma_spike = j.value("sigma_spike", p.sigma_spike);
  p.sigma_slab = j.value("sigma_slab", p.sigma_slab);
  return p;
}

/// A trained model of either kind. For SPoSE, `vice.mu` holds x and
/// `vice.log_sigma` is empty.
struct Checkpoint {
  Method method = Method::kVice;
  VariationalParams vice;
  SpoSEParams spose;
  SpikeSlabPrior prior;
  std::uint64_t step = 0;
  std::size_t epochs = 0;

  std::size_t num_objects() const {
    return static_cast<std::size_t>(method == Method::kVice ? vice.mu.rows() : spose.x.rows());
  }
  std::size_t dims() const {
    return static_cast<std::size_t>(method == Method::kVice ? vice.mu.cols() : spose.x.cols());
  }

  /// The fixed embedding used for argmax prediction: [mu]_+ or x.
  Matrix point_embedding() const { return method == Method::kVice ? Matrix(vice.mu.cwiseMax(0.0)) : spose.x; }
};

inline json checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = kCheckpointMagic;
  j["method"] = to_string(c.method);
  j["num_objects"] = c.num_objects();
  j["dims"] = c.dims();
  j["step"] = c.step;
  j["epochs"] = c.epochs;
  if (c.method == Method::kVice) {
    j["prior"] = prior_to_json(c.prior);
    j["mu"] = matrix_to_json(c.vice.mu);
    j["log_sigma"] = matrix_to_json(c.vice.log_sigma);
  } else {
    j["lambda"] = c.spose.lambda;
    j["x"] = matrix_to_json(c.spose.x);
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != kCheckpointMagic)
    throw DataError("not a checkpoint: missing format tag '" + std::string(kCheckpointMagic) + "'");
  try {
    Checkpoint c;
    c.method = method_from_string(j.at("method").get<std::string>());
    const auto m = j.at("num_objects").get<std::size_t>();
    const auto d = j.at("dims").get<std::size_t>();
    c.step = j.value("step", std::uint64_t{0});
    c.epochs = j.value("epochs", std::size_t{0});
    if (c.method == Method::kVice) {
      c.prior = prior_from_json(j.at("prior"));
      c.vice = VariationalParams(matrix_from_json(j.at("mu"), m, d), matrix_from_json(j.at("log_sigma"), m, d));
    } else {
      c.spose.lambda = j.at("lambda").get<double>();
      c.spose.x = matrix_from_json(j.at("x"), m, d);
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_text(path, checkpoint_to_json(c).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json(path)); }

inline json epoch_to_json(const EpochLog& e) {
  json j;
  j["epoch"] = e.epoch;
  j["total"] = e.total;
  j["data_term"] = e.data_term;
  j["complexity_term"] = e.complexity_term;
  j["val_xent"] = std::isfinite(e.val_xent) ? json(e.val_xent) : json(nullptr);
  j["n_dims_selected"] = e.n_dims_selected;
  return j;
}

inline std::string trainlog_jsonl(const TrainLog& log) {
  std::string out;
  for (const auto& e : log.epochs) out += epoch_to_json(e).dump() + "\n";
  return out;
}

inline std::vector<EpochLog> parse_trainlog_jsonl(const std::string& text) {
  std::vector<EpochLog> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    EpochLog e;
    e.epoch = j.at("epoch").get<std::size_t>();
    e.total = j.at("total").get<double>();
    e.data_term = j.at("data_term").get<double>();
    e.complexity_term = j.at("complexity_term").get<double>();
    e.val_xent = j.at("val_xent").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("val_xent").get<double>();
    e.n_dims_selected = j.at("n_dims_selected").get<std::size_t>();
    out.push_back(e);
  }
  return out;
}

inline std::string selection_csv(const std::vector<DimensionImportance>& sel) {
  std::string out = "dim,significant_objects,selected\n";
  for (const auto& s : sel)
    out += std::to_string(s.dim_index) + "," + std::to_string(s.significant_objects) + "," + (s.selected ? "1" : "0") + "\n";
  return out;
}

inline std::string mass_selection_csv(const std::vector<MassImportance>& sel) {
  std::string out = "dim,l1_mass,selected\n";
  for (const auto& s : sel)
    out += std::to_string(s.dim_index) + "," + format_double(s.l1_mass) + "," + (s.selected ? "1" : "0") + "\n";
  return out;
}

/// Whitespace-separated dense matrix, one row per object.
inline std::string matrix_text(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? " " : "") + format_double(m(i, j));
    out += '\n';
  }
  return out;
}

inline Matrix parse_matrix_text(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw DataError("matrix file: non-numeric entry on row " + std::to_string(rows.size()));
    rows.push_back(std::move(row));
  }
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw DataError("matrix file: ragged row " + std::to_string(i));
    for (std::size_t j = 0; j < d; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return out;
}

inline json pruned_sidecar(const PrunedEmbedding& p) {
  return {{"num_objects", p.mu_selected.rows()}, {"dims", p.dims()}, {"kept_dims", p.kept_dims}};
}

/// Reads the pruned mean embedding written by `prune`: matrix text plus the
/// JSON sidecar listing kept dimensions.
inline PrunedEmbedding load_pruned(const std::filesystem::path& matrix_path, const std::filesystem::path& sidecar_path) {
  PrunedEmbedding p;
  p.mu_selected = parse_matrix_text(read_text(matrix_path));
  const auto side = read_json(sidecar_path);
  p.kept_dims = side.at("kept_dims").get<std::vector<std::size_t>>();
  if (p.mu_selected.rows() == 0) p.mu_selected.resize(side.at("num_objects").get<Eigen::Index>(), 0);
  if (static_cast<std::size_t>(p.mu_selected.cols()) != p.kept_dims.size())
    throw DataError("pruned embedding and sidecar disagree on dimension count");
  p.sigma_selected = Matrix::Zero(p.mu_selected.rows(), p.mu_selected.cols());
  return p;
}

inline json ground_truth_to_json(const GroundTruth& gt) {
  return {{"num_objects", gt.x_true.rows()}, {"dims", gt.x_true.cols()}, {"sparsity", gt.sparsity},
          {"seed", gt.seed},                  {"x_true", matrix_to_json(gt.x_true)}};
}

inline GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  gt.sparsity = j.at("sparsity").get<double>();
  gt.seed = j.at("seed").get<std::uint64_t>();
  gt.x_true = matrix_from_json(j.at("x_true"), j.at("num_objects").get<std::size_t>(), j.at("dims").get<std::size_t>());
  return gt;
}

inline json reproducibility_to_json(const ReproducibilityReport& r) {
  return {{"per_run_scores", r.per_run_scores},
          {"reproducibility", r.mean_score},
          {"selected_dims_mean", r.mean_dims},
          {"selected_dims_sd", r.sd_dims}};
}

}  // namespace vice
