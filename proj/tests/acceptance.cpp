// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "loss_fixtures.hpp"
#include "map_miner.hpp"
#include "oracles.hpp"
#include "semhash/binary_io.hpp"
#include "semhash/data.hpp"
#include "semhash/metrics.hpp"
#include "semhash/trainer.hpp"

using namespace semhash;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << n << "  " << name << "  (" << detail
            << ")" << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix as_matrix(std::span<const double> v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// ------------------------------------------------------------ criterion 1

struct GradInstance {
  Matrix semantic;
  Matrix x;
  Matrix target;
  std::vector<int> labels;
  EncoderParams encoder;
  ClassifierParams classifier;
};

bool relu_clear(const ForwardCache& cache, double margin) {
  for (std::size_t l = 0; l + 1 < cache.pre_activations.size(); ++l) {
    if (cache.pre_activations[l].cwiseAbs().minCoeff() < margin) return false;
  }
  return true;
}

GradInstance draw_instance(Rng& rng) {
  for (;;) {
    const Eigen::Index b = 4 + static_cast<Eigen::Index>(rng.below(5));
    const int k = 4 + static_cast<int>(rng.below(13));
    const int d = 6, classes = 4;
    GradInstance g;
    g.semantic = lossfix::random_semantic(b, rng);
    g.x = testutil::uniform_matrix(b, d, rng, -2.0, 2.0);
    g.target = beta_sample(0.1, 0.1, b, k, rng);
    for (Eigen::Index i = 0; i < b; ++i) g.labels.push_back(static_cast<int>(rng.below(classes)));
    g.encoder = make_encoder(d, std::vector<int>{10}, k, rng);
    g.classifier = make_classifier(k, classes, rng);
    const auto fwd = encoder_forward(g.encoder, g.x);
    const Matrix& z = fwd.embeddings.values;
    if (relu_clear(fwd.cache, 1e-3) && lossfix::sim_smooth(z, g.semantic, 1e-3) &&
        lossfix::nn_unambiguous(z, g.target, false, 1e-3) &&
        lossfix::nn_unambiguous(z, z, true, 1e-3)) {
      return g;
    }
  }
}

double check_on_z(const Matrix& z, const Matrix& grad, const std::function<double(const Matrix&)>& f) {
  std::vector<double> p(z.data(), z.data() + z.size());
  std::vector<double> a(grad.data(), grad.data() + grad.size());
  const auto r = gradient_check(
      [&](std::span<const double> v) { return f(as_matrix(v, z.rows(), z.cols())); }, p, a);
  return r.max_relative_error;
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240101);
  const int instances = 24;
  double worst[4] = {0, 0, 0, 0};
  LossWeights weights;
  weights.lambda1 = 0.7;
  weights.lambda2 = 0.4;
  for (int n = 0; n < instances; ++n) {
    const auto g = draw_instance(rng);
    const Matrix z = encoder_forward(g.encoder, g.x).embeddings.values;
    const SimLossConfig sim_cfg;

    worst[0] = std::max(worst[0], check_on_z(z, sim_loss(z, g.semantic, sim_cfg).grad, [&](const Matrix& m) {
                          return sim_loss(m, g.semantic, sim_cfg).value;
                        }));
    worst[1] = std::max(worst[1], check_on_z(z, kl_loss(z, g.target).grad, [&](const Matrix& m) {
                          return kl_loss(m, g.target).value;
                        }));
    const Matrix logits = classifier_forward(g.classifier, z);
    worst[2] = std::max(worst[2], check_on_z(logits, cls_loss(logits, g.labels).grad, [&](const Matrix& m) {
                          return cls_loss(m, g.labels).value;
                        }));

    // Composed loss, differentiated with respect to every network parameter.
    auto fwd = encoder_forward(g.encoder, g.x);
    const auto loss = total_loss(fwd.embeddings.values, g.semantic, g.labels, g.classifier,
                                 g.target, weights);
    const auto enc_grads = encoder_backward(g.encoder, fwd.cache, loss.grad_z);
    const auto analytic = flatten(enc_grads, loss.grad_classifier);
    const auto params = flatten(g.encoder, g.classifier);
    EncoderParams enc = g.encoder;
    ClassifierParams cls = g.classifier;
    const auto r = gradient_check(
        [&](std::span<const double> v) {
          unflatten(v, enc, cls);
          const Matrix zz = encoder_forward(enc, g.x).embeddings.values;
          return total_loss(zz, g.semantic, g.labels, cls, g.target, weights).total;
        },
        params, analytic);
    worst[3] = std::max(worst[3], r.max_relative_error);
  }
  const double secs = seconds_since(t0);
  const double max_err = std::max({worst[0], worst[1], worst[2], worst[3]});
  report(1, "gradient correctness", max_err < 1e-4 && secs < 60.0,
         std::to_string(instances) + " instances, max rel err sim " + fmt(worst[0], 2) + " kl " +
             fmt(worst[1], 2) + " cls " + fmt(worst[2], 2) + " total " + fmt(worst[3], 2) + ", " +
             fmt(secs, 3) + " s");
}

// ------------------------------------------------------------ criterion 2

void criterion_kl_consistency() {
  const int seeds = 50;
  const Eigen::Index b = 256, k = 16;
  double same_sum = 0.0;
  int concentrated_higher = 0;
  for (int s = 0; s < seeds; ++s) {
    const Rng root(static_cast<std::uint64_t>(s));
    Rng zr = root.split(1), tr = root.split(2), cr = root.split(3);
    const Matrix target = beta_sample(0.1, 0.1, b, k, tr);
    const double same = kl_loss(beta_sample(0.1, 0.1, b, k, zr), target).value;
    // Concentrated near one half: Beta(20, 20) has standard deviation 0.078.
    const double off = kl_loss(beta_sample(20.0, 20.0, b, k, cr), target).value;
    same_sum += same;
    concentrated_higher += off > same;
  }
  const double mean = same_sum / seeds;
  report(2, "KL estimator consistency", mean >= -0.2 && mean <= 0.2 && concentrated_higher >= 45,
         "p=q mean " + fmt(mean) + ", concentrated higher in " + std::to_string(concentrated_higher) +
             "/50");
}

// ------------------------------------------------------------ criterion 3

HashIndex random_index(Rng& rng, std::size_t n, int bits, int labels) {
  HashIndex index(bits);
  // Few distinct codes when n is large relative to 2^bits, so ties are common.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(bits));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(2));
    index.add(static_cast<std::int64_t>(rng.below(1u << 20)), static_cast<std::int32_t>(rng.below(labels)),
              pack_bits(b));
  }
  return index;
}

void criterion_oracles() {
  Rng rng(3);
  int topk_ok = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.below(1000);
    const int bits = 1 + static_cast<int>(rng.below(inst % 2 ? 12 : 150));
    const auto index = random_index(rng, n, bits, 1);
    const auto q = index.code(rng.below(n));
    const std::size_t k = 1 + rng.below(n + 5);
    topk_ok += query_topk(index, q, k, ExecPolicy::kParallel) == oracle::naive_topk(index, q, k) &&
               query_topk(index, q, k, ExecPolicy::kSerial) == oracle::naive_topk(index, q, k);
  }

  int hamming_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    const int bits = 1 + static_cast<int>(rng.below(256));
    const auto idx = random_index(rng, 2, bits, 1);
    hamming_ok += hamming(idx.code(0), idx.code(1)) == oracle::hamming_bits(idx.code(0), idx.code(1));
  }

  // Every ranked label sequence of length <= 8 over a three-leaf tree, every
  // query label and cutoff.
  const auto t = parse_taxonomy("root X\nroot c\nX a\nX b\n");
  const auto& leaves = t.leaves();
  std::size_t metric_cases = 0, metric_bad = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<NodeId> ranked(n);
      for (std::size_t i = 0, rest = code; i < n; ++i, rest /= 3) ranked[i] = leaves[rest % 3];
      for (NodeId q : leaves) {
        ++metric_cases;
        bool ok = std::abs(ahp_at_k(ranked, q, n, t) - oracle::ahp_at_k(t, ranked, q, n)) < 1e-12;
        for (std::size_t k = 1; k <= n; ++k) {
          ok = ok && std::abs(hp_at_k(ranked, q, k, t) - oracle::hp_at_k(t, ranked, q, k)) < 1e-12;
        }
        const double ap = oracle::average_precision(ranked, q);
        if (ap >= 0) {
          ok = ok && std::abs(average_precision(ranked, q) - ap) < 1e-12;
        } else {
          try {
            (void)average_precision(ranked, q);
            ok = false;
          } catch (const Error& e) {
            ok = ok && e.kind() == ErrorKind::kNoRelevantItems;
          }
        }
        metric_bad += !ok;
      }
    }
  }
  report(3, "oracle equivalence", topk_ok == 100 && hamming_ok == 10000 && metric_bad == 0,
         "top-k " + std::to_string(topk_ok) + "/100, hamming " + std::to_string(hamming_ok) +
             "/10000, metric cases " + std::to_string(metric_cases - metric_bad) + "/" +
             std::to_string(metric_cases));
}

// ------------------------------------------------------------ criterion 4

void criterion_map_miner() {
  const auto t = parse_taxonomy(fixtures::kTwoSuperclasses);
  const auto index = miner::build(t);
  EvalOptions opts;
  opts.k_max = miner::kKMax;
  const auto r = evaluate(index, index, t, opts);
  const double mahp = r.mahp_at_k.at(miner::kKMax);
  report(4, "mAP-miner", r.map == 1.0 && mahp < 1.0 && std::abs(mahp - miner::kExpectedMahp) < 1e-12,
         "mAP " + format_double(r.map) + ", mAHP@5 " + format_double(mahp) + " vs oracle " +
             format_double(miner::kExpectedMahp));
}

// ------------------------------------------------------- criteria 5, 6, 7

// Pinned benchmark: 4 x 2 x 2 taxonomy (16 leaves), 100 samples per class
// split 50 train / 50 retrieval, D = 64, diffusion 1, noise 1.5, batch 64,
// 50 epochs, mAHP@125 over the retrieval split with the query held out.
constexpr int kSeeds = 5;
constexpr std::size_t kBenchKMax = 125;

struct Scores {
  double binary = 0.0;
  double continuous = 0.0;
  double seconds = 0.0;
};

Scores run_benchmark(TrainConfig cfg, const Dataset& train_set, const Dataset& eval_set,
                     const Taxonomy& t, bool continuous) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train(cfg, train_set, t);
  const Matrix z = encode(result.checkpoint.encoder, eval_set.features);
  const auto codes = binarize(z);
  HashIndex index(cfg.code_length);
  EmbeddingTable table{z, {}, eval_set.labels};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    index.add(static_cast<std::int64_t>(i), eval_set.labels[i], codes[i]);
    table.ids.push_back(static_cast<std::int64_t>(i));
  }
  EvalOptions opts;
  opts.k_max = kBenchKMax;
  Scores s;
  s.binary = evaluate(index, index, t, opts).mahp_at_k.at(kBenchKMax);
  if (continuous) s.continuous = evaluate(table, table, t, opts).mahp_at_k.at(kBenchKMax);
  s.seconds = seconds_since(t0);
  return s;
}

void criteria_benchmark() {
  const auto t = parse_taxonomy(fixtures::three_level(4, 2, 2));
  SyntheticSpec spec;
  spec.per_class = 100;
  spec.dim = 64;
  spec.diffusion = 1.0;
  spec.noise = 1.5;

  TrainConfig base;
  base.code_length = 16;
  base.batch_size = 64;
  base.epochs = 50;
  TrainConfig shrewd = base;
  shrewd.lambda1 = 1.0;
  shrewd.lambda2 = 0.0;
  TrainConfig cls_only = base;
  cls_only.use_sim = false;
  cls_only.lambda1 = 0.0;
  cls_only.lambda2 = 1.0;
  TrainConfig no_kl = shrewd;
  no_kl.lambda1 = 0.0;
  TrainConfig shrewd32 = shrewd;
  shrewd32.code_length = 32;

  int wins5 = 0, wins6 = 0, wins7 = 0;
  double slowest = 0.0;
  std::string d5, d6, d7;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto ds = generate_synthetic(t, spec, Rng(static_cast<std::uint64_t>(s)));
    const auto [train_set, eval_set] = split_per_class(ds, 50);
    for (auto* c : {&shrewd, &cls_only, &no_kl, &shrewd32}) c->seed = static_cast<std::uint64_t>(s);
    const auto a = run_benchmark(shrewd, train_set, eval_set, t, true);
    const auto b = run_benchmark(cls_only, train_set, eval_set, t, false);
    const auto c = run_benchmark(no_kl, train_set, eval_set, t, true);
    const auto d = run_benchmark(shrewd32, train_set, eval_set, t, false);
    slowest = std::max({slowest, a.seconds, b.seconds, c.seconds, d.seconds});
    const double gap_kl = a.continuous - a.binary, gap_no_kl = c.continuous - c.binary;
    wins5 += a.binary > b.binary;
    wins6 += gap_kl < gap_no_kl;
    wins7 += d.binary >= a.binary;
    const std::string sep = s > 1 ? "; " : "";
    d5 += sep + fmt(a.binary, 3) + " vs " + fmt(b.binary, 3);
    d6 += sep + fmt(gap_kl, 3) + " vs " + fmt(gap_no_kl, 3);
    d7 += sep + fmt(d.binary, 3) + " vs " + fmt(a.binary, 3);
  }
  const bool fast = slowest <= 600.0;
  report(5, "SHREWD binary mAHP above cls-only", wins5 >= 4 && fast,
         std::to_string(wins5) + "/5 seeds; " + d5 + "; slowest run " + fmt(slowest, 3) + " s");
  report(6, "KL narrows the binarization gap", wins6 >= 4,
         std::to_string(wins6) + "/5 seeds; gap lambda1=1 vs lambda1=0: " + d6);
  report(7, "32-bit codes at least as good as 16-bit", wins7 >= 4,
         std::to_string(wins7) + "/5 seeds; " + d7);
}

// ------------------------------------------------------------ criterion 8

int sh(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "semhash_acceptance_determinism";
  fs::remove_all(root);
  const std::string cli = SEMHASH_CLI;
  bool ran = true;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = root / name;
    fs::create_directories(dir);
    write_file(dir / "tax.txt", fixtures::three_level(2, 2, 2));
    const std::string pre = "cd '" + dir.string() + "' && '" + cli + "' ";
    ran = ran &&
          sh(pre + "gen-data --taxonomy tax.txt --per-class 30 --dim 16 --seed 7 --out data 2>/dev/null") == 0 &&
          sh(pre + "train --features data/features.bin --labels data/labels.txt --taxonomy tax.txt "
                   "--epochs 5 --batch-size 32 --seed 7 --quiet --out run 2>/dev/null") == 0 &&
          sh(pre + "encode --checkpoint run/checkpoint.bin --features data/features.bin "
                   "--labels data/labels.txt --taxonomy tax.txt --out enc") == 0 &&
          sh(pre + "eval --index enc/index.bin --taxonomy tax.txt --k-max 50 --out ev >/dev/null") == 0;
  }
  bool same = ran;
  for (const char* f : {"data/features.bin", "run/checkpoint.bin", "run/train_log.csv",
                        "enc/index.bin", "enc/embeddings.bin", "ev/report.json", "ev/hp_curve.csv"}) {
    same = same && read_file(root / "a" / f) == read_file(root / "b" / f);
  }
  fs::remove_all(root);
  report(8, "determinism", same,
         ran ? "checkpoints, indexes and reports compared byte for byte" : "pipeline failed to run");
}

}  // namespace

int main() {
  try {
    criterion_gradients();
    criterion_kl_consistency();
    criterion_oracles();
    criterion_map_miner();
    criteria_benchmark();
    criterion_determinism();
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
