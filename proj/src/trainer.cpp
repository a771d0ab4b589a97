#include "semhash/trainer.hpp"

#include <chrono>
#include <cmath>
#include <charconv>
#include <map>
#include <optional>
#include <numeric>
#include <sstream>

#include "semhash/digest.hpp"

namespace semhash {
namespace {

// Stream ids for the training seed.
constexpr std::uint64_t kEncoderInitStream = 1;
constexpr std::uint64_t kClassifierInitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kTargetStream = 4;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorKind::kInvalidConfig, key + ": cannot parse \"" + value + "\"");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorKind::kInvalidConfig, key + ": expected true or false");
}

std::vector<int> parse_hidden(const std::string& value) {
  std::vector<int> out;
  if (value.empty() || value == "none") return out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_number<int>("hidden", trim(part)));
  return out;
}

Variant parse_variant(const std::string& value) {
  if (value == "shrewd") return Variant::kShrewd;
  if (value == "shred") return Variant::kShred;
  throw Error(ErrorKind::kInvalidConfig, "variant must be shrewd or shred, got " + value);
}

void check_finite_params(const Checkpoint& ckpt, std::uint64_t step) {
  bool ok = ckpt.classifier.weights.allFinite() && ckpt.classifier.biases.allFinite();
  for (const auto& layer : ckpt.encoder.layers) {
    ok = ok && layer.weights.allFinite() && layer.biases.allFinite();
  }
  if (!ok) {
    throw Error(ErrorKind::kDivergedLoss,
                "non-finite parameter after step " + std::to_string(step));
  }
}

}  // namespace

LossWeights TrainConfig::loss_weights() const {
  LossWeights w;
  w.lambda1 = lambda1;
  w.lambda2 = lambda2;
  w.use_sim = use_sim;
  w.sim = SimLossConfig{gamma, rho, tau_floor};
  return w;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidConfig, msg); };
  if (code_length < 1) fail("code_length must be >= 1");
  for (int h : hidden) {
    if (h < 1) fail("hidden sizes must be >= 1");
  }
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("lambda weights must be >= 0");
  if (!(alpha > 0.0) || !(beta > 0.0)) fail("Beta target parameters must be > 0");
  if (!(learning_rate > 0.0) || !(adam_epsilon > 0.0)) fail("learning rate and epsilon must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!use_sim && lambda1 == 0.0 && lambda2 == 0.0) fail("every loss term is disabled");
  SimLossConfig{gamma, rho, tau_floor}.validate();
}

std::string apply_variant(TrainConfig& cfg, Variant v) {
  if (v == Variant::kShrewd && cfg.lambda2 != 0.0) {
    const std::string old = format_double(cfg.lambda2);
    cfg.lambda2 = 0.0;
    return "variant shrewd overrides lambda2 = " + old + " with 0";
  }
  if (v == Variant::kShred && !(cfg.lambda2 > 0.0)) {
    cfg.lambda2 = 1.0;
    return "variant shred needs lambda2 > 0; using 1";
  }
  return {};
}

ParsedConfig parse_train_config(std::string_view text) {
  ParsedConfig out;
  auto& c = out.config;
  std::optional<Variant> variant;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidConfig,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    out.keys.push_back(key);
    if (key == "code_length") c.code_length = parse_number<int>(key, value);
    else if (key == "hidden") c.hidden = parse_hidden(value);
    else if (key == "lambda1") c.lambda1 = parse_number<double>(key, value);
    else if (key == "lambda2") c.lambda2 = parse_number<double>(key, value);
    else if (key == "use_sim") c.use_sim = parse_bool(key, value);
    else if (key == "gamma") c.gamma = parse_number<double>(key, value);
    else if (key == "rho") c.rho = parse_number<double>(key, value);
    else if (key == "alpha") c.alpha = parse_number<double>(key, value);
    else if (key == "beta") c.beta = parse_number<double>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "adam_beta1") c.adam_beta1 = parse_number<double>(key, value);
    else if (key == "adam_beta2") c.adam_beta2 = parse_number<double>(key, value);
    else if (key == "adam_epsilon") c.adam_epsilon = parse_number<double>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
    else if (key == "epochs") c.epochs = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "tau_floor") c.tau_floor = parse_number<double>(key, value);
    else if (key == "variant") variant = parse_variant(value);
    else throw Error(ErrorKind::kInvalidConfig, "line " + std::to_string(line_no) + ": unknown key " + key);
  }
  if (variant) {
    if (auto warning = apply_variant(c, *variant); !warning.empty()) {
      out.warnings.push_back(std::move(warning));
    }
  }
  c.validate();
  return out;
}

std::string format_train_config(const TrainConfig& c) {
  std::string hidden;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    hidden += (i ? "," : "") + std::to_string(c.hidden[i]);
  }
  if (hidden.empty()) hidden = "none";
  std::string out;
  auto put = [&](const char* key, const std::string& value) {
    out += std::string(key) + " = " + value + "\n";
  };
  put("code_length", std::to_string(c.code_length));
  put("hidden", hidden);
  put("lambda1", format_double(c.lambda1));
  put("lambda2", format_double(c.lambda2));
  put("use_sim", c.use_sim ? "true" : "false");
  put("gamma", format_double(c.gamma));
  put("rho", format_double(c.rho));
  put("alpha", format_double(c.alpha));
  put("beta", format_double(c.beta));
  put("learning_rate", format_double(c.learning_rate));
  put("adam_beta1", format_double(c.adam_beta1));
  put("adam_beta2", format_double(c.adam_beta2));
  put("adam_epsilon", format_double(c.adam_epsilon));
  put("batch_size", std::to_string(c.batch_size));
  put("epochs", std::to_string(c.epochs));
  put("seed", std::to_string(c.seed));
  put("tau_floor", format_double(c.tau_floor));
  put("variant", std::string(to_string(c.variant())));
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::uint64_t step, const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw Error(ErrorKind::kShapeMismatch, "parameter and gradient lengths differ");
  }
  if (step < 1) throw Error(ErrorKind::kInvalidConfig, "Adam step index starts at 1");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw Error(ErrorKind::kShapeMismatch, "Adam moments sized for a different parameter set");
  }
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "step,sim,kl,cls,total\n";
  for (const auto& r : log.steps) {
    out += std::to_string(r.step) + "," + format_double(r.sim) + "," + format_double(r.kl) + "," +
           format_double(r.cls) + "," + format_double(r.total) + "\n";
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const Dataset& ds, const Taxonomy& t,
                  const TrainOptions& options) {
  cfg.validate();
  ds.validate(t);
  const auto n = static_cast<Eigen::Index>(ds.size());
  const Eigen::Index b = cfg.batch_size;
  if (n < b) {
    throw Error(ErrorKind::kBatchTooSmall, "dataset has " + std::to_string(n) +
                                               " rows, batch size is " + std::to_string(b));
  }
  const auto start = std::chrono::steady_clock::now();

  const Rng root(cfg.seed);
  Rng encoder_rng = root.split(kEncoderInitStream);
  Rng classifier_rng = root.split(kClassifierInitStream);
  const int num_classes = static_cast<int>(t.leaves().size());

  TrainResult result;
  auto& encoder = result.checkpoint.encoder;
  auto& classifier = result.checkpoint.classifier;
  encoder = make_encoder(static_cast<int>(ds.features.cols()), cfg.hidden, cfg.code_length,
                         encoder_rng);
  classifier = make_classifier(cfg.code_length, num_classes, classifier_rng);

  const Matrix leaf_distances = distance_matrix(t, t.leaves()).values;
  std::vector<int> class_of(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) class_of[i] = t.leaf_index(ds.labels[i]);

  const LossWeights weights = cfg.loss_weights();
  const AdamConfig adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
  AdamState adam_state;
  const Rng shuffle_root = root.split(kShuffleStream);
  const Rng target_root = root.split(kTargetStream);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  Matrix x(b, ds.features.cols());
  Matrix semantic(b, b);
  std::vector<int> batch_labels(static_cast<std::size_t>(b));
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = shuffle_root.split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (Eigen::Index first = 0; first + b <= n; first += b) {
      ++step;
      for (Eigen::Index r = 0; r < b; ++r) {
        const Eigen::Index row = order[first + r];
        x.row(r) = ds.features.row(row);
        batch_labels[r] = class_of[row];
      }
      for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
          semantic(i, j) = leaf_distances(batch_labels[i], batch_labels[j]);
        }
      }
      Rng target_rng = target_root.split(step);
      const Matrix target = weights.lambda1 != 0.0
                                ? beta_sample(cfg.alpha, cfg.beta, b, cfg.code_length, target_rng)
                                : Matrix();

      auto fwd = encoder_forward(encoder, x);
      auto loss = total_loss(fwd.embeddings.values, semantic, batch_labels, classifier, target,
                             weights, options.policy);
      if (!std::isfinite(loss.total) || !loss.grad_z.allFinite()) {
        throw Error(ErrorKind::kDivergedLoss,
                    "step " + std::to_string(step) + ": total=" + format_double(loss.total) +
                        " sim=" + format_double(loss.sim) + " kl=" + format_double(loss.kl) +
                        " cls=" + format_double(loss.cls));
      }
      const auto enc_grads = encoder_backward(encoder, fwd.cache, loss.grad_z);
      auto flat = flatten(encoder, classifier);
      const auto flat_grads = flatten(enc_grads, loss.grad_classifier);
      adam_step(flat, flat_grads, adam_state, step, adam);
      unflatten(flat, encoder, classifier);
      check_finite_params(result.checkpoint, step);

      const StepRecord record{step, loss.sim, loss.kl, loss.cls, loss.total};
      result.log.steps.push_back(record);
      if (options.on_step) options.on_step(record);
    }
  }

  result.log.params_digest = sha256_hex(encode_checkpoint(result.checkpoint));
  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Matrix encode(const EncoderParams& encoder, const Matrix& features, Eigen::Index batch) {
  Matrix out(features.rows(), encoder.code_length());
  for (Eigen::Index first = 0; first < features.rows(); first += batch) {
    const Eigen::Index rows = std::min(batch, features.rows() - first);
    out.middleRows(first, rows) =
        encoder_forward(encoder, features.middleRows(first, rows)).embeddings.values;
  }
  return out;
}

}  // namespace semhash
