#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semhash/common.hpp"
#include "semhash/rng.hpp"

namespace semhash {

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
};

/// Feed-forward encoder: rectifier hidden layers, logistic output layer.
/// `version` changes on every in-place update so a stale forward cache can be
/// detected by backward.
struct EncoderParams {
  std::vector<DenseLayer> layers;
  std::uint64_t version = 0;

  int input_dim() const;
  int code_length() const;
  /// Throws ShapeMismatch / NonFiniteInput on a malformed parameter set.
  void validate() const;
  void touch() { ++version; }
};

struct ClassifierParams {
  Matrix weights;  // C x K
  Vector biases;   // C

  int num_classes() const { return static_cast<int>(weights.rows()); }
  int code_length() const { return static_cast<int>(weights.cols()); }
};

struct EmbeddingBatch {
  Matrix values;  // B x K, entries in (0, 1)
  std::vector<std::int64_t> ids;
};

struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> pre_activations; // per layer
  Matrix output;
  std::uint64_t version = 0;
};

struct EncoderForward {
  EmbeddingBatch embeddings;
  ForwardCache cache;
};

using EncoderGrads = std::vector<DenseLayer>;

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
EncoderParams make_encoder(int input_dim, std::span<const int> hidden, int code_length, Rng& rng);
ClassifierParams make_classifier(int code_length, int num_classes, Rng& rng);

/// Logistic function clamped to [2^-53, 1 - 2^-53] so outputs stay strictly
/// inside (0, 1).
double logistic(double a);

EncoderForward encoder_forward(const EncoderParams& p, const Matrix& x);
EncoderGrads encoder_backward(const EncoderParams& p, const ForwardCache& cache,
                              const Matrix& grad_z);

/// logits = z W^T + b.
Matrix classifier_forward(const ClassifierParams& c, const Matrix& z);
/// Gradients of a loss with respect to the classifier parameters and to `z`
/// given d loss / d logits.
struct ClassifierGrads {
  ClassifierParams params;
  Matrix grad_z;
};
ClassifierGrads classifier_backward(const ClassifierParams& c, const Matrix& z,
                                    const Matrix& grad_logits);

// Flat views used by the optimizer and the gradient checker. Order: encoder
// layers (weights row-major then biases), then classifier weights and biases.
std::size_t parameter_count(const EncoderParams& e, const ClassifierParams& c);
std::vector<double> flatten(const EncoderParams& e, const ClassifierParams& c);
std::vector<double> flatten(const EncoderGrads& e, const ClassifierParams& c);
void unflatten(std::span<const double> flat, EncoderParams& e, ClassifierParams& c);

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor: coordinates whose gradients are both below this are
  /// compared on absolute error scaled by the floor.
  double scale_floor = 1e-6;
  std::size_t max_coordinates = 10000;
  std::uint64_t seed = 0;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

using LossEvaluator = std::function<double(std::span<const double>)>;

/// Central finite differences against `analytic`. Above
/// `max_coordinates` a seeded random subset is checked.
GradientCheckReport gradient_check(const LossEvaluator& loss, std::span<const double> params,
                                   std::span<const double> analytic,
                                   const GradientCheckOptions& options = {});

struct Checkpoint {
  EncoderParams encoder;
  ClassifierParams classifier;
};

/// "SHRW" checkpoint: magic, version, D, K, C, layer count (u32 LE), then for
/// each layer out, in (u32) and row-major f64 weights followed by biases, then
/// the classifier weights and biases.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint");
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace semhash
