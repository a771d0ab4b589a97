#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semhash/common.hpp"
#include "semhash/hierarchy.hpp"
#include "semhash/rng.hpp"

namespace semhash {

struct Dataset {
  Matrix features;               // N x D
  std::vector<NodeId> labels;    // leaf node ids, length N
  std::vector<NodeId> universe;  // leaves of the companion taxonomy, ascending

  std::size_t size() const { return labels.size(); }
  /// Checks the invariants against `t`; throws UnknownLabel / ShapeMismatch /
  /// NonFiniteInput.
  void validate(const Taxonomy& t) const;
};

/// Gamma(shape, 1) variate returned as its logarithm, which stays finite for
/// the tiny values small shapes produce.
double log_gamma_variate(double shape, Rng& rng);

/// Beta(alpha, beta) variate via the gamma ratio, computed in log space and
/// clamped to [2^-53, 1 - 2^-53].
double beta_variate(double alpha, double beta, Rng& rng);

/// rows x cols i.i.d. Beta(alpha, beta) entries.
Matrix beta_sample(double alpha, double beta, Eigen::Index rows, Eigen::Index cols, Rng& rng);

struct SyntheticSpec {
  int per_class = 50;
  int dim = 64;
  double diffusion = 1.0;
  double noise = 1.0;
};

/// Hierarchical Gaussian diffusion: the root mean is 0, each child mean adds
/// N(0, diffusion^2 I) to its parent's, and each sample adds N(0, noise^2 I)
/// to its leaf mean. Rows are grouped by leaf in ascending id order. Feature
/// values are rounded to float so they survive the on-disk format exactly.
Dataset generate_synthetic(const Taxonomy& t, const SyntheticSpec& spec, const Rng& rng);

/// Per-leaf means used by `generate_synthetic` (row i belongs to leaves()[i]).
Matrix synthetic_class_means(const Taxonomy& t, const SyntheticSpec& spec, const Rng& rng);

/// Splits each class so that its first `first_per_class` rows go to the first
/// dataset and the rest to the second.
std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, int first_per_class);

/// "SHRF" features file: magic, version, N, D (u32 LE) then N*D f32 LE.
std::string encode_features(const Matrix& features);
Matrix decode_features(std::string_view bytes, const std::string& source = "features");
void save_features(const std::string& path, const Matrix& features);
Matrix load_features(const std::string& path);

/// One leaf name per line.
std::string encode_labels(const Taxonomy& t, const std::vector<NodeId>& labels);
std::vector<NodeId> decode_labels(std::string_view text, const Taxonomy& t);

void save_dataset(const std::string& features_path, const std::string& labels_path,
                  const Taxonomy& t, const Dataset& ds);
Dataset load_dataset(const std::string& features_path, const std::string& labels_path,
                     const Taxonomy& t);

}  // namespace semhash
