#include "semhash/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "semhash/kernels.hpp"

namespace semhash {
namespace {

inline double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

void require_batch(Eigen::Index b, const char* what) {
  if (b < 2) {
    throw Error(ErrorKind::kBatchTooSmall, std::string(what) + " needs B >= 2, got " +
                                               std::to_string(b));
  }
}

double off_diagonal_mean(const Matrix& distances) {
  const Eigen::Index b = distances.rows();
  require_batch(b, "batch_scale");
  if (distances.cols() != b) throw Error(ErrorKind::kShapeMismatch, "distances not square");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      if (i != j) sum += distances(i, j);
    }
  }
  return sum / static_cast<double>(b * (b - 1));
}

double ordered_sum(const std::vector<double>& parts) {
  double s = 0.0;
  for (double p : parts) s += p;
  return s;
}

}  // namespace

void SimLossConfig::validate() const {
  if (!(gamma > 0.0) || !(rho >= 0.0) || !(tau_floor > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "need gamma > 0, rho >= 0, tau_floor > 0");
  }
}

double pair_weight(double d, const SimLossConfig& cfg) {
  return std::pow(cfg.gamma, cfg.rho) / std::pow(cfg.gamma + d, cfg.rho);
}

double batch_scale(const Matrix& distances, double floor) {
  return std::max(off_diagonal_mean(distances), floor);
}

LossAndGrad sim_loss(const Matrix& z, const Matrix& semantic, const SimLossConfig& cfg,
                     ExecPolicy policy) {
  cfg.validate();
  const Eigen::Index b = z.rows();
  const Eigen::Index k = z.cols();
  require_batch(b, "sim_loss");
  if (semantic.rows() != b || semantic.cols() != b) {
    throw Error(ErrorKind::kShapeMismatch, "semantic distances must be B x B");
  }

  const Matrix dz = kernels::pairwise_l1(z, policy);
  const double tau_z = batch_scale(dz, cfg.tau_floor);
  const double tau_y = batch_scale(semantic, cfg.tau_floor);
  const double inv_b2 = 1.0 / static_cast<double>(b * b);

  // Per-pair sign(r) * w / B^2, plus per-row partial sums for the value and
  // for d loss / d tau_z. Rows are independent; partials are combined in row
  // order afterwards.
  Matrix s(b, b);
  std::vector<double> row_value(b), row_dtau(b);
  const bool serial = policy == ExecPolicy::kSerial;
#pragma omp parallel for schedule(static) if (!serial)
  for (Eigen::Index i = 0; i < b; ++i) {
    double value = 0.0;
    double dtau = 0.0;
    for (Eigen::Index j = 0; j < b; ++j) {
      const double w = pair_weight(semantic(i, j), cfg);
      const double r = dz(i, j) / tau_z - semantic(i, j) / tau_y;
      value += std::abs(r) * w;
      const double sij = sign(r) * w * inv_b2;
      s(i, j) = sij;
      dtau -= sij * dz(i, j) / (tau_z * tau_z);
    }
    row_value[i] = value;
    row_dtau[i] = dtau;
  }

  LossAndGrad out;
  out.value = ordered_sum(row_value) * inv_b2;
  const bool tau_clamped = off_diagonal_mean(dz) < cfg.tau_floor;
  // Through tau_z each off-diagonal distance receives the same extra share.
  const double shared = tau_clamped ? 0.0
                                    : ordered_sum(row_dtau) / static_cast<double>(b * (b - 1));

  out.grad = Matrix::Zero(b, k);
#pragma omp parallel for schedule(static) if (!serial)
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      if (i == j) continue;
      const double g = 2.0 * (s(i, j) / tau_z + shared);
      for (Eigen::Index c = 0; c < k; ++c) {
        out.grad(i, c) += g * sign(z(i, c) - z(j, c));
      }
    }
  }
  return out;
}

LossAndGrad kl_loss(const Matrix& z, const Matrix& target, ExecPolicy policy) {
  const Eigen::Index b = z.rows();
  require_batch(b, "kl_loss");
  if (target.rows() < 1) throw Error(ErrorKind::kBatchTooSmall, "kl_loss needs a target sample");
  if (target.cols() != z.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "target sample dimension differs from batch");
  }

  const auto to_target = kernels::nearest_neighbors(z, target, false, policy);
  const auto to_batch = kernels::nearest_neighbors(z, z, true, policy);

  LossAndGrad out;
  out.grad = Matrix::Zero(b, z.cols());
  const double inv_b = 1.0 / static_cast<double>(b);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& nt = to_target[i];
    const auto& nz = to_batch[i];
    const double vt = std::max(nt.distance, kKlDistanceFloor);
    const double vz = std::max(nz.distance, kKlDistanceFloor);
    sum += std::log(vt) - std::log(vz);
    if (nt.distance > kKlDistanceFloor) {
      out.grad.row(i) += (z.row(i) - target.row(nt.index)) * (inv_b / (vt * vt));
    }
    if (nz.distance > kKlDistanceFloor) {
      const auto diff = (z.row(i) - z.row(nz.index)) * (inv_b / (vz * vz));
      out.grad.row(i) -= diff;
      out.grad.row(nz.index) += diff;
    }
  }
  out.value = sum * inv_b;
  return out;
}

LossAndGrad cls_loss(const Matrix& logits, std::span<const int> labels) {
  const Eigen::Index b = logits.rows();
  const Eigen::Index c = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != b || b < 1) {
    throw Error(ErrorKind::kShapeMismatch, "one label per logit row required");
  }
  LossAndGrad out;
  out.grad.resize(b, c);
  double sum = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= c) {
      throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(label) + " with C=" +
                                                   std::to_string(c));
    }
    const double peak = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) z += std::exp(logits(i, j) - peak);
    const double log_z = peak + std::log(z);
    sum += log_z - logits(i, label);
    for (Eigen::Index j = 0; j < c; ++j) {
      out.grad(i, j) = std::exp(logits(i, j) - log_z) * inv_b;
    }
    out.grad(i, label) -= inv_b;
  }
  out.value = sum * inv_b;
  return out;
}

std::string_view to_string(Variant v) {
  return v == Variant::kShrewd ? "shrewd" : "shred";
}

LossValue total_loss(const Matrix& z, const Matrix& semantic, std::span<const int> labels,
                     const ClassifierParams& classifier, const Matrix& target,
                     const LossWeights& weights, ExecPolicy policy) {
  require_batch(z.rows(), "total_loss");
  LossValue out;
  out.lambda1 = weights.lambda1;
  out.lambda2 = weights.lambda2;
  out.uses_sim = weights.use_sim;
  out.uses_kl = weights.lambda1 != 0.0;
  out.uses_cls = weights.lambda2 != 0.0;
  out.variant = out.uses_cls ? Variant::kShred : Variant::kShrewd;
  out.grad_z = Matrix::Zero(z.rows(), z.cols());
  out.grad_classifier.weights = Matrix::Zero(classifier.weights.rows(), classifier.weights.cols());
  out.grad_classifier.biases = Vector::Zero(classifier.biases.size());

  if (out.uses_sim) {
    auto sim = sim_loss(z, semantic, weights.sim, policy);
    out.sim = sim.value;
    out.grad_z += sim.grad;
  }
  if (out.uses_kl) {
    auto kl = kl_loss(z, target, policy);
    out.kl = kl.value;
    out.grad_z += weights.lambda1 * kl.grad;
  }
  if (out.uses_cls) {
    const Matrix logits = classifier_forward(classifier, z);
    auto cls = cls_loss(logits, labels);
    out.cls = cls.value;
    auto back = classifier_backward(classifier, z, cls.grad);
    out.grad_z += weights.lambda2 * back.grad_z;
    out.grad_classifier.weights = weights.lambda2 * back.params.weights;
    out.grad_classifier.biases = weights.lambda2 * back.params.biases;
  }
  out.total = out.sim + weights.lambda1 * out.kl + weights.lambda2 * out.cls;
  return out;
}

}  // namespace semhash
