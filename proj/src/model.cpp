#include "semhash/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semhash/binary_io.hpp"

namespace semhash {
namespace {

constexpr std::string_view kCheckpointMagic = "SHRW";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kLogisticEdge = 0x1.0p-53;

void glorot_fill(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

int EncoderParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int EncoderParams::code_length() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

void EncoderParams::validate() const {
  if (layers.empty()) throw Error(ErrorKind::kShapeMismatch, "encoder has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.biases.size() != layer.weights.rows()) {
      throw Error(ErrorKind::kShapeMismatch, "layer " + std::to_string(l) + " bias size");
    }
    if (l > 0 && layer.weights.cols() != layers[l - 1].weights.rows()) {
      throw Error(ErrorKind::kShapeMismatch, "layer " + std::to_string(l) + " does not chain");
    }
    if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
      throw Error(ErrorKind::kNonFiniteInput, "layer " + std::to_string(l) + " parameters");
    }
  }
}

EncoderParams make_encoder(int input_dim, std::span<const int> hidden, int code_length, Rng& rng) {
  if (input_dim < 1 || code_length < 1) {
    throw Error(ErrorKind::kShapeMismatch, "encoder dimensions must be positive");
  }
  EncoderParams p;
  int in = input_dim;
  auto add = [&](int out) {
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    glorot_fill(layer.weights, rng);
    p.layers.push_back(std::move(layer));
    in = out;
  };
  for (int h : hidden) {
    if (h < 1) throw Error(ErrorKind::kShapeMismatch, "hidden size must be positive");
    add(h);
  }
  add(code_length);
  return p;
}

ClassifierParams make_classifier(int code_length, int num_classes, Rng& rng) {
  ClassifierParams c{Matrix(num_classes, code_length), Vector::Zero(num_classes)};
  glorot_fill(c.weights, rng);
  return c;
}

double logistic(double a) {
  const double y = a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
  return std::clamp(y, kLogisticEdge, 1.0 - kLogisticEdge);
}

EncoderForward encoder_forward(const EncoderParams& p, const Matrix& x) {
  p.validate();
  if (x.cols() != p.input_dim()) {
    throw Error(ErrorKind::kShapeMismatch, "input has " + std::to_string(x.cols()) +
                                               " columns, encoder expects " +
                                               std::to_string(p.input_dim()));
  }
  if (!all_finite(x)) throw Error(ErrorKind::kNonFiniteInput, "encoder input");

  EncoderForward out;
  out.cache.version = p.version;
  Matrix h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix a = h * layer.weights.transpose();
    a.rowwise() += layer.biases.transpose();
    out.cache.inputs.push_back(std::move(h));
    const bool last = l + 1 == p.layers.size();
    h = last ? a.unaryExpr(&logistic) : Matrix(a.cwiseMax(0.0));
    out.cache.pre_activations.push_back(std::move(a));
  }
  out.cache.output = h;
  out.embeddings.values = std::move(h);
  out.embeddings.ids.resize(x.rows());
  std::iota(out.embeddings.ids.begin(), out.embeddings.ids.end(), 0);
  return out;
}

EncoderGrads encoder_backward(const EncoderParams& p, const ForwardCache& cache,
                              const Matrix& grad_z) {
  if (cache.version != p.version || cache.inputs.size() != p.layers.size()) {
    throw Error(ErrorKind::kStaleCache, "forward cache does not match parameters");
  }
  if (grad_z.rows() != cache.output.rows() || grad_z.cols() != cache.output.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "grad_z shape differs from encoder output");
  }
  EncoderGrads grads(p.layers.size());
  const Matrix& y = cache.output;
  Matrix delta = grad_z.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& input = cache.inputs[l];
    if (input.cols() != p.layers[l].weights.cols()) {
      throw Error(ErrorKind::kStaleCache, "cached input width differs from layer");
    }
    grads[l].weights = delta.transpose() * input;
    grads[l].biases = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix grad_h = delta * p.layers[l].weights;
    const Matrix& a_prev = cache.pre_activations[l - 1];
    delta = grad_h.array() * (a_prev.array() > 0.0).cast<double>();
  }
  return grads;
}

Matrix classifier_forward(const ClassifierParams& c, const Matrix& z) {
  if (z.cols() != c.code_length() || c.biases.size() != c.weights.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "classifier expects K=" +
                                               std::to_string(c.code_length()));
  }
  Matrix logits = z * c.weights.transpose();
  logits.rowwise() += c.biases.transpose();
  return logits;
}

ClassifierGrads classifier_backward(const ClassifierParams& c, const Matrix& z,
                                    const Matrix& grad_logits) {
  if (z.cols() != c.code_length() || grad_logits.cols() != c.num_classes() ||
      grad_logits.rows() != z.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "classifier backward shapes");
  }
  ClassifierGrads g;
  g.params.weights = grad_logits.transpose() * z;
  g.params.biases = grad_logits.colwise().sum().transpose();
  g.grad_z = grad_logits * c.weights;
  return g;
}

std::size_t parameter_count(const EncoderParams& e, const ClassifierParams& c) {
  std::size_t n = 0;
  for (const auto& layer : e.layers) n += layer.weights.size() + layer.biases.size();
  return n + c.weights.size() + c.biases.size();
}

namespace {

void append(std::vector<double>& out, const double* data, Eigen::Index n) {
  out.insert(out.end(), data, data + n);
}

std::vector<double> flatten_layers(const std::vector<DenseLayer>& layers,
                                   const ClassifierParams& c) {
  std::vector<double> out;
  for (const auto& layer : layers) {
    append(out, layer.weights.data(), layer.weights.size());
    append(out, layer.biases.data(), layer.biases.size());
  }
  append(out, c.weights.data(), c.weights.size());
  append(out, c.biases.data(), c.biases.size());
  return out;
}

}  // namespace

std::vector<double> flatten(const EncoderParams& e, const ClassifierParams& c) {
  return flatten_layers(e.layers, c);
}

std::vector<double> flatten(const EncoderGrads& e, const ClassifierParams& c) {
  return flatten_layers(e, c);
}

void unflatten(std::span<const double> flat, EncoderParams& e, ClassifierParams& c) {
  if (flat.size() != parameter_count(e, c)) {
    throw Error(ErrorKind::kShapeMismatch, "flat parameter vector length");
  }
  std::size_t pos = 0;
  auto take = [&](double* dst, Eigen::Index n) {
    std::copy_n(flat.data() + pos, n, dst);
    pos += static_cast<std::size_t>(n);
  };
  for (auto& layer : e.layers) {
    take(layer.weights.data(), layer.weights.size());
    take(layer.biases.data(), layer.biases.size());
  }
  take(c.weights.data(), c.weights.size());
  take(c.biases.data(), c.biases.size());
  e.touch();
}

GradientCheckReport gradient_check(const LossEvaluator& loss, std::span<const double> params,
                                   std::span<const double> analytic,
                                   const GradientCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw Error(ErrorKind::kShapeMismatch, "analytic gradient length");
  }
  std::vector<double> point(params.begin(), params.end());
  const double base = loss(point);
  if (loss(point) != base) {
    throw Error(ErrorKind::kNonDeterministicLoss, "two evaluations at the same point differ");
  }

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), 0);
  if (coords.size() > options.max_coordinates) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_coordinates; ++i) {
      std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    }
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradientCheckReport report;
  for (std::size_t c : coords) {
    const double saved = point[c];
    point[c] = saved + options.step;
    const double up = loss(point);
    point[c] = saved - options.step;
    const double down = loss(point);
    point[c] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double scale =
        std::max({std::abs(analytic[c]), std::abs(numeric), options.scale_floor});
    const double err = std::abs(analytic[c] - numeric) / scale;
    if (err > report.max_relative_error || report.coordinates_checked == 0) {
      report.max_relative_error = err;
      report.worst_coordinate = c;
      report.worst_analytic = analytic[c];
      report.worst_numeric = numeric;
    }
    ++report.coordinates_checked;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.encoder.validate();
  const auto& c = ckpt.classifier;
  if (c.code_length() != ckpt.encoder.code_length() || c.biases.size() != c.weights.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "classifier does not match encoder");
  }
  ByteWriter w;
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.encoder.input_dim()));
  w.u32(static_cast<std::uint32_t>(ckpt.encoder.code_length()));
  w.u32(static_cast<std::uint32_t>(c.num_classes()));
  w.u32(static_cast<std::uint32_t>(ckpt.encoder.layers.size()));
  auto put = [&](const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) w.f64(data[i]);
  };
  for (const auto& layer : ckpt.encoder.layers) {
    w.u32(static_cast<std::uint32_t>(layer.weights.rows()));
    w.u32(static_cast<std::uint32_t>(layer.weights.cols()));
    put(layer.weights.data(), layer.weights.size());
    put(layer.biases.data(), layer.biases.size());
  }
  put(c.weights.data(), c.weights.size());
  put(c.biases.data(), c.biases.size());
  return w.bytes();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic(kCheckpointMagic);
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw Error(ErrorKind::kVersionMismatch,
                source + ": checkpoint version " + std::to_string(version));
  }
  const auto input_dim = r.u32();
  const auto code_length = r.u32();
  const auto num_classes = r.u32();
  const auto layer_count = r.u32();
  if (layer_count == 0 || layer_count > 64) r.fail("implausible layer count");

  auto fill = [&](double* data, Eigen::Index n) {
    if (r.remaining() / 8 < static_cast<std::size_t>(n)) r.fail("truncated parameter block");
    for (Eigen::Index i = 0; i < n; ++i) data[i] = r.f64();
  };
  Checkpoint ckpt;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const auto out = r.u32();
    const auto in = r.u32();
    if (static_cast<std::size_t>(out) * in > r.remaining() / 8) r.fail("layer shape too large");
    DenseLayer layer{Matrix(out, in), Vector(out)};
    fill(layer.weights.data(), layer.weights.size());
    fill(layer.biases.data(), layer.biases.size());
    ckpt.encoder.layers.push_back(std::move(layer));
  }
  if (static_cast<std::size_t>(num_classes) * code_length > r.remaining() / 8) {
    r.fail("classifier shape too large");
  }
  ckpt.classifier.weights = Matrix(num_classes, code_length);
  ckpt.classifier.biases = Vector(num_classes);
  fill(ckpt.classifier.weights.data(), ckpt.classifier.weights.size());
  fill(ckpt.classifier.biases.data(), ckpt.classifier.biases.size());
  r.expect_end();

  try {
    ckpt.encoder.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kMalformedFile, source + ": " + e.what());
  }
  if (static_cast<std::uint32_t>(ckpt.encoder.input_dim()) != input_dim ||
      static_cast<std::uint32_t>(ckpt.encoder.code_length()) != code_length) {
    throw Error(ErrorKind::kMalformedFile, source + ": header dimensions disagree with layers");
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path), path);
}

}  // namespace semhash
