#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semhash/data.hpp"
#include "semhash/hierarchy.hpp"
#include "semhash/losses.hpp"
#include "semhash/model.hpp"

namespace semhash {

struct TrainConfig {
  int code_length = 16;
  std::vector<int> hidden{256, 128};
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  bool use_sim = true;
  double gamma = 0.1;
  double rho = 2.0;
  double alpha = 0.1;
  double beta = 0.1;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 50;
  std::uint64_t seed = 0;
  double tau_floor = 1e-8;

  Variant variant() const { return lambda2 > 0.0 ? Variant::kShred : Variant::kShrewd; }
  LossWeights loss_weights() const;
  /// Throws InvalidConfig.
  void validate() const;
};

struct ParsedConfig {
  TrainConfig config;
  std::vector<std::string> warnings;
  std::vector<std::string> keys;  // keys present in the text, in order
};

/// `key = value` lines, `#` comments. Unknown keys are an error. A `variant`
/// key takes precedence over `lambda2` (shrewd forces 0, shred forces a
/// positive weight) and records a warning when it changes the value.
ParsedConfig parse_train_config(std::string_view text);
/// Canonical key = value rendering; parses back to the same config.
std::string format_train_config(const TrainConfig& cfg);

/// Applies a variant to `cfg`, returning a warning when lambda2 had to change.
std::string apply_variant(TrainConfig& cfg, Variant v);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

/// Bias-corrected Adam update at 1-based `step`. Moments are sized lazily.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::uint64_t step, const AdamConfig& cfg);

struct StepRecord {
  std::uint64_t step = 0;
  double sim = 0.0;
  double kl = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  double wall_seconds = 0.0;
  std::string params_digest;
};

/// "step,sim,kl,cls,total" with shortest round-trip numbers.
std::string train_log_csv(const TrainLog& log);

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

struct TrainOptions {
  ExecPolicy policy = ExecPolicy::kParallel;
  /// Called after each optimizer step.
  std::function<void(const StepRecord&)> on_step;
};

/// Minibatch Adam over shuffled epochs (ragged last batch dropped). Each step
/// draws a fresh Beta(alpha, beta) target sample of size B x K. Throws
/// DivergedLoss if the loss or any parameter becomes non-finite.
TrainResult train(const TrainConfig& cfg, const Dataset& ds, const Taxonomy& t,
                  const TrainOptions& options = {});

/// Encoder output for every row of `features`, in batches.
Matrix encode(const EncoderParams& encoder, const Matrix& features, Eigen::Index batch = 1024);

}  // namespace semhash
