#include "semhash/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semhash/binary_io.hpp"

namespace semhash {
namespace {

constexpr std::string_view kFeaturesMagic = "SHRF";
constexpr std::uint32_t kFeaturesVersion = 1;
constexpr double kBetaEdge = 0x1.0p-53;

// Stream ids for splitting a generator seed by purpose.
constexpr std::uint64_t kMeansStream = 1;
constexpr std::uint64_t kSamplesStream = 2;

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

void Dataset::validate(const Taxonomy& t) const {
  if (labels.empty()) throw Error(ErrorKind::kShapeMismatch, "dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, std::to_string(features.rows()) + " feature rows vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  for (NodeId label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= t.size() || !t.is_leaf(label)) {
      throw Error(ErrorKind::kUnknownLabel, "label id " + std::to_string(label));
    }
  }
  if (!features.allFinite()) throw Error(ErrorKind::kNonFiniteInput, "dataset features");
}

double log_gamma_variate(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw Error(ErrorKind::kInvalidShapeParam, "gamma shape " + std::to_string(shape));
  }
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a).
    return log_gamma_variate(shape + 1.0, rng) + std::log(rng.uniform()) / shape;
  }
  // Marsaglia & Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

double beta_variate(double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw Error(ErrorKind::kInvalidShapeParam,
                "Beta(" + std::to_string(alpha) + ", " + std::to_string(beta) + ")");
  }
  const double la = log_gamma_variate(alpha, rng);
  const double lb = log_gamma_variate(beta, rng);
  // X = Ga / (Ga + Gb) = logistic(la - lb).
  const double t = la - lb;
  const double x = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return std::clamp(x, kBetaEdge, 1.0 - kBetaEdge);
}

Matrix beta_sample(double alpha, double beta, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw Error(ErrorKind::kInvalidShapeParam,
                "Beta(" + std::to_string(alpha) + ", " + std::to_string(beta) + ")");
  }
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = beta_variate(alpha, beta, rng);
  return out;
}

Matrix synthetic_class_means(const Taxonomy& t, const SyntheticSpec& spec, const Rng& rng) {
  if (spec.dim < 1 || !(spec.diffusion > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "need dim >= 1 and diffusion > 0");
  }
  const Rng means_rng = rng.split(kMeansStream);
  // Parents always precede children in a breadth-first walk.
  Matrix node_means = Matrix::Zero(static_cast<Eigen::Index>(t.size()), spec.dim);
  std::vector<NodeId> order{t.root()};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (NodeId c : t.children(order[i])) {
      Rng node_rng = means_rng.split(static_cast<std::uint64_t>(c));
      for (int k = 0; k < spec.dim; ++k) {
        node_means(c, k) = node_means(order[i], k) + spec.diffusion * node_rng.normal();
      }
      order.push_back(c);
    }
  }
  Matrix out(static_cast<Eigen::Index>(t.leaves().size()), spec.dim);
  for (std::size_t i = 0; i < t.leaves().size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = node_means.row(t.leaves()[i]);
  }
  return out;
}

Dataset generate_synthetic(const Taxonomy& t, const SyntheticSpec& spec, const Rng& rng) {
  if (t.leaves().empty() || t.size() < 2) {
    throw Error(ErrorKind::kEmptyTaxonomy, "taxonomy needs at least one edge");
  }
  if (spec.per_class < 1 || !(spec.noise >= 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "need per_class >= 1 and noise >= 0");
  }
  const Matrix means = synthetic_class_means(t, spec, rng);
  const Rng samples_rng = rng.split(kSamplesStream);

  Dataset ds;
  ds.universe = t.leaves();
  const auto n = static_cast<Eigen::Index>(t.leaves().size()) * spec.per_class;
  ds.features.resize(n, spec.dim);
  ds.labels.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (std::size_t li = 0; li < t.leaves().size(); ++li) {
    for (int s = 0; s < spec.per_class; ++s, ++row) {
      Rng sample_rng = samples_rng.split(static_cast<std::uint64_t>(row));
      for (int k = 0; k < spec.dim; ++k) {
        ds.features(row, k) =
            round_to_float(means(static_cast<Eigen::Index>(li), k) + spec.noise * sample_rng.normal());
      }
      ds.labels.push_back(t.leaves()[li]);
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, int first_per_class) {
  std::vector<Eigen::Index> first_rows, second_rows;
  std::vector<int> seen(ds.universe.empty() ? 0 : *std::max_element(ds.universe.begin(), ds.universe.end()) + 1, 0);
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const NodeId label = ds.labels[i];
    if (static_cast<std::size_t>(label) >= seen.size()) seen.resize(label + 1, 0);
    (seen[label]++ < first_per_class ? first_rows : second_rows).push_back(static_cast<Eigen::Index>(i));
  }
  auto take = [&](const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.universe = ds.universe;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(rows[r]);
      out.labels.push_back(ds.labels[rows[r]]);
    }
    return out;
  };
  return {take(first_rows), take(second_rows)};
}

std::string encode_features(const Matrix& features) {
  ByteWriter w;
  w.magic(kFeaturesMagic);
  w.u32(kFeaturesVersion);
  w.u32(static_cast<std::uint32_t>(features.rows()));
  w.u32(static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.size(); ++i) {
    w.f32(static_cast<float>(features.data()[i]));
  }
  return w.bytes();
}

Matrix decode_features(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic(kFeaturesMagic);
  if (const auto version = r.u32(); version != kFeaturesVersion) {
    throw Error(ErrorKind::kVersionMismatch, source + ": features version " + std::to_string(version));
  }
  const auto n = r.u32();
  const auto d = r.u32();
  if (static_cast<std::uint64_t>(n) * d * 4 != r.remaining()) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(static_cast<std::uint64_t>(n) * d * 4));
  }
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = r.f32();
  return out;
}

void save_features(const std::string& path, const Matrix& features) {
  write_file(path, encode_features(features));
}

Matrix load_features(const std::string& path) { return decode_features(read_file(path), path); }

std::string encode_labels(const Taxonomy& t, const std::vector<NodeId>& labels) {
  std::string out;
  for (NodeId id : labels) out += t.node(id).name + "\n";
  return out;
}

std::vector<NodeId> decode_labels(std::string_view text, const Taxonomy& t) {
  std::vector<NodeId> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string name, extra;
    if (!(fields >> name) || (fields >> extra)) {
      throw Error(ErrorKind::kMalformedFile,
                  "labels line " + std::to_string(line_no) + ": expected one label name");
    }
    try {
      out.push_back(t.leaf_by_name(name));
    } catch (const Error& e) {
      throw Error(ErrorKind::kUnknownLabel,
                  "labels line " + std::to_string(line_no) + ": " + name + " is not a taxonomy leaf");
    }
  }
  return out;
}

void save_dataset(const std::string& features_path, const std::string& labels_path,
                  const Taxonomy& t, const Dataset& ds) {
  ds.validate(t);
  save_features(features_path, ds.features);
  write_file(labels_path, encode_labels(t, ds.labels));
}

Dataset load_dataset(const std::string& features_path, const std::string& labels_path,
                     const Taxonomy& t) {
  Dataset ds;
  ds.features = load_features(features_path);
  ds.labels = decode_labels(read_file(labels_path), t);
  ds.universe = t.leaves();
  ds.validate(t);
  return ds;
}

}  // namespace semhash
