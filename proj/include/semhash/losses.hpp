#pragma once

#include <span>

#include "semhash/common.hpp"
#include "semhash/model.hpp"

namespace semhash {

struct SimLossConfig {
  double gamma = 0.1;
  double rho = 2.0;
  double tau_floor = 1e-8;

  void validate() const;
};

/// Distance-matching weight gamma^rho / (gamma + d)^rho; 1 at d = 0, decaying
/// slowly so near pairs dominate.
double pair_weight(double d, const SimLossConfig& cfg);

/// max(mean of the off-diagonal entries, floor).
double batch_scale(const Matrix& distances, double floor);

struct LossAndGrad {
  double value = 0.0;
  Matrix grad;
};

/// Weighted mismatch between batch-normalized Manhattan embedding distances
/// and batch-normalized semantic distances, averaged over all B^2 ordered
/// pairs. The gradient differentiates through the embedding scale and uses
/// sign(0) = 0. `z` is not range-checked.
LossAndGrad sim_loss(const Matrix& z, const Matrix& semantic, const SimLossConfig& cfg,
                     ExecPolicy policy = ExecPolicy::kParallel);

/// Distances are clamped below by this before taking logarithms.
inline constexpr double kKlDistanceFloor = 1e-12;

/// Nearest-neighbor KL estimate between the batch and a target sample:
/// mean over b of log nu(z_b; target) - log nu(z_b; batch without z_b), with
/// Euclidean nu. Neighbor assignments are held fixed when differentiating.
LossAndGrad kl_loss(const Matrix& z, const Matrix& target,
                    ExecPolicy policy = ExecPolicy::kParallel);

/// Mean softmax cross-entropy; `grad` is d loss / d logits.
LossAndGrad cls_loss(const Matrix& logits, std::span<const int> labels);

enum class Variant {
  kShrewd,  // no classification term
  kShred,   // with classification term
};

std::string_view to_string(Variant v);

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  /// Ablation switch; when false the similarity term is not evaluated and
  /// reported as zero.
  bool use_sim = true;
  SimLossConfig sim;
};

struct LossValue {
  double total = 0.0;
  double sim = 0.0;
  double kl = 0.0;
  double cls = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool uses_sim = false;
  bool uses_kl = false;
  bool uses_cls = false;
  Variant variant = Variant::kShrewd;
  Matrix grad_z;
  ClassifierParams grad_classifier;
};

/// total = sim + lambda1 * kl + lambda2 * cls. Components with a zero weight
/// are skipped and report 0. `labels` index the classifier rows.
LossValue total_loss(const Matrix& z, const Matrix& semantic, std::span<const int> labels,
                     const ClassifierParams& classifier, const Matrix& target,
                     const LossWeights& weights, ExecPolicy policy = ExecPolicy::kParallel);

}  // namespace semhash
