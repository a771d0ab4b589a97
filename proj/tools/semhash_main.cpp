// semhash: data generation, training, encoding, search and evaluation.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "semhash/binary_io.hpp"
#include "semhash/data.hpp"
#include "semhash/digest.hpp"
#include "semhash/hashing.hpp"
#include "semhash/metrics.hpp"
#include "semhash/trainer.hpp"

namespace fs = std::filesystem;
using namespace semhash;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

class Manifest {
 public:
  explicit Manifest(std::string command) {
    json_["tool"] = "semhash";
    json_["version"] = SEMHASH_VERSION;
    json_["command"] = std::move(command);
  }
  void seed(std::uint64_t s) { json_["seed"] = s; }
  Json& config() { return json_["config"]; }
  void input(const std::string& role, const std::string& path) {
    json_["inputs"][role] = {{"path", path}, {"sha256", sha256_hex(read_file(path))}};
  }
  void output(const fs::path& path) { json_["outputs"].push_back(path.string()); }
  void write(const fs::path& dir) {
    output(dir / "manifest.json");
    write_file(dir / "manifest.json", json_.dump(2) + "\n");
  }

 private:
  Json json_;
};

fs::path prepare_dir(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

void write_output(Manifest& m, const fs::path& path, std::string_view bytes) {
  write_file(path, bytes);
  m.output(path);
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string taxonomy, out;
  SyntheticSpec spec;
  std::uint64_t seed = 0;
};

void cmd_gen_data(const GenDataArgs& a) {
  const auto t = load_taxonomy(a.taxonomy);
  const auto ds = generate_synthetic(t, a.spec, Rng(a.seed));
  const auto dir = prepare_dir(a.out);
  Manifest m("gen-data");
  m.seed(a.seed);
  m.config() = {{"per_class", a.spec.per_class},
                {"dim", a.spec.dim},
                {"diffusion", a.spec.diffusion},
                {"noise", a.spec.noise}};
  m.input("taxonomy", a.taxonomy);
  write_output(m, dir / "features.bin", encode_features(ds.features));
  write_output(m, dir / "labels.txt", encode_labels(t, ds.labels));
  m.write(dir);
  std::cerr << "wrote " << ds.size() << " rows over " << t.leaves().size() << " classes to "
            << dir.string() << "\n";
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config, features, labels, taxonomy, out, variant;
  std::optional<int> code_length, batch_size, epochs;
  std::optional<double> lambda1, lambda2, learning_rate;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

template <typename T>
void override_value(const char* key, const std::optional<T>& flag, T& slot,
                    const std::vector<std::string>& file_keys) {
  if (!flag) return;
  if (*flag != slot && std::find(file_keys.begin(), file_keys.end(), key) != file_keys.end()) {
    warn(std::string("flag overrides config file value of ") + key);
  }
  slot = *flag;
}

Json config_json(const TrainConfig& cfg) {
  Json out = Json::object();
  std::istringstream in(format_train_config(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

void cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  std::vector<std::string> file_keys;
  const bool from_file = !a.config.empty();
  if (from_file) {
    auto parsed = parse_train_config(read_file(a.config));
    for (const auto& w : parsed.warnings) warn(w);
    cfg = parsed.config;
    file_keys = parsed.keys;
  }
  override_value("code_length", a.code_length, cfg.code_length, file_keys);
  override_value("batch_size", a.batch_size, cfg.batch_size, file_keys);
  override_value("epochs", a.epochs, cfg.epochs, file_keys);
  override_value("lambda1", a.lambda1, cfg.lambda1, file_keys);
  override_value("lambda2", a.lambda2, cfg.lambda2, file_keys);
  override_value("learning_rate", a.learning_rate, cfg.learning_rate, file_keys);
  override_value("seed", a.seed, cfg.seed, file_keys);
  if (!a.variant.empty()) {
    const Variant v = a.variant == "shrewd" ? Variant::kShrewd : Variant::kShred;
    if (auto w = apply_variant(cfg, v); !w.empty()) warn(w);
  }
  cfg.validate();

  const auto t = load_taxonomy(a.taxonomy);
  const auto ds = load_dataset(a.features, a.labels, t);
  TrainOptions opts;
  const std::size_t per_epoch = ds.size() / static_cast<std::size_t>(cfg.batch_size);
  if (!a.quiet) {
    opts.on_step = [&](const StepRecord& r) {
      if (per_epoch && r.step % per_epoch == 0) {
        std::cerr << "epoch " << r.step / per_epoch << " step " << r.step
                  << " total " << format_double(r.total) << "\n";
      }
    };
  }
  const auto result = train(cfg, ds, t, opts);

  const auto dir = prepare_dir(a.out);
  Manifest m("train");
  m.seed(cfg.seed);
  m.config() = config_json(cfg);
  m.input("taxonomy", a.taxonomy);
  m.input("features", a.features);
  m.input("labels", a.labels);
  if (from_file) m.input("config", a.config);
  write_output(m, dir / "checkpoint.bin", encode_checkpoint(result.checkpoint));
  write_output(m, dir / "train_log.csv", train_log_csv(result.log));
  write_output(m, dir / "config.txt", format_train_config(cfg));
  m.write(dir);
  std::cerr << "variant " << to_string(cfg.variant()) << ", " << result.log.steps.size()
            << " steps, final total " << format_double(result.log.steps.back().total)
            << ", params sha256 " << result.log.params_digest << "\n";
}

// ------------------------------------------------------------ encode/index

HashIndex index_from(const Matrix& embeddings, const std::vector<NodeId>& labels) {
  const auto codes = binarize(embeddings);
  HashIndex index(static_cast<int>(embeddings.cols()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    index.add(static_cast<std::int64_t>(i), labels[i], codes[i]);
  }
  return index;
}

// Embeddings are stored in single precision; rounding first keeps the index
// built here identical to one rebuilt from the stored file.
Matrix round_to_float(const Matrix& m) { return m.cast<float>().cast<double>(); }

struct EncodeArgs {
  std::string checkpoint, features, labels, taxonomy, out;
};

void cmd_encode(const EncodeArgs& a) {
  const auto t = load_taxonomy(a.taxonomy);
  const auto ds = load_dataset(a.features, a.labels, t);
  const auto ckpt = load_checkpoint(a.checkpoint);
  const Matrix z = round_to_float(encode(ckpt.encoder, ds.features));
  const auto dir = prepare_dir(a.out);
  Manifest m("encode");
  m.input("checkpoint", a.checkpoint);
  m.input("features", a.features);
  m.input("labels", a.labels);
  m.input("taxonomy", a.taxonomy);
  write_output(m, dir / "embeddings.bin", encode_features(z));
  write_output(m, dir / "labels.txt", encode_labels(t, ds.labels));
  write_output(m, dir / "index.bin", encode_index(index_from(z, ds.labels)));
  m.write(dir);
}

struct IndexArgs {
  std::string embeddings, labels, taxonomy, out;
};

void cmd_index(const IndexArgs& a) {
  const auto t = load_taxonomy(a.taxonomy);
  const auto ds = load_dataset(a.embeddings, a.labels, t);
  save_index(a.out, index_from(ds.features, ds.labels));
}

// ------------------------------------------------------------------- query

struct QueryArgs {
  std::string index, code;
  std::optional<std::int64_t> id;
  std::size_t k = 10;
};

void cmd_query(const QueryArgs& a) {
  const auto index = load_index(a.index);
  HashCode query;
  std::optional<std::int64_t> self;
  if (a.id) {
    const auto& ids = index.ids();
    const auto it = std::find(ids.begin(), ids.end(), *a.id);
    if (it == ids.end()) throw Error(ErrorKind::kUnknownNode, "no item with id " + std::to_string(*a.id));
    query = index.code(static_cast<std::size_t>(it - ids.begin()));
    self = *a.id;
  } else {
    std::vector<std::uint8_t> bits;
    for (char c : a.code) {
      if (c != '0' && c != '1') throw Error(ErrorKind::kMalformedLine, "--code takes 0 and 1 only");
      bits.push_back(c == '1');
    }
    query = pack_bits(bits);
  }
  // A queried item is listed first; its own entry is not repeated below.
  std::vector<SearchResult> rows;
  if (self) rows.push_back({*self, 0});
  for (const auto& r : query_topk(index, query, a.k + (self ? 1 : 0))) {
    if (rows.size() == a.k) break;
    if (!self || r.id != *self) rows.push_back(r);
  }
  for (const auto& r : rows) std::cout << r.id << " " << r.distance << "\n";
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string index, queries, checkpoint, features, labels, taxonomy, out;
  std::size_t k_max = 250;
  std::vector<std::size_t> cutoffs;
  bool no_binarize = false;
  bool per_query = false;
};

void cmd_eval(const EvalArgs& a) {
  const auto t = load_taxonomy(a.taxonomy);
  EvalOptions opts;
  opts.k_max = a.k_max;
  opts.cutoffs = a.cutoffs;
  opts.per_query = a.per_query;
  Manifest m("eval");
  m.input("taxonomy", a.taxonomy);
  m.config() = {{"k_max", a.k_max}, {"binarize", !a.no_binarize}};

  MetricsReport report;
  if (!a.index.empty()) {
    if (a.no_binarize) throw Error(ErrorKind::kInvalidConfig, "--no-binarize needs --checkpoint");
    const auto db = load_index(a.index);
    m.input("index", a.index);
    if (!a.queries.empty()) {
      m.input("queries", a.queries);
      report = evaluate(db, load_index(a.queries), t, opts);
    } else {
      report = evaluate(db, db, t, opts);
    }
  } else {
    const auto ds = load_dataset(a.features, a.labels, t);
    const auto ckpt = load_checkpoint(a.checkpoint);
    m.input("checkpoint", a.checkpoint);
    m.input("features", a.features);
    m.input("labels", a.labels);
    const Matrix z = round_to_float(encode(ckpt.encoder, ds.features));
    if (a.no_binarize) {
      EmbeddingTable table{z, {}, ds.labels};
      for (std::size_t i = 0; i < ds.size(); ++i) table.ids.push_back(static_cast<std::int64_t>(i));
      report = evaluate(table, table, t, opts);
    } else {
      const auto db = index_from(z, ds.labels);
      report = evaluate(db, db, t, opts);
    }
  }
  if (report.map_skipped) warn(std::to_string(report.map_skipped) + " queries have no same-class item and are left out of mAP");

  const auto dir = prepare_dir(a.out);
  write_output(m, dir / "report.json", report_json(report));
  write_output(m, dir / "hp_curve.csv", hp_curve_csv(report));
  m.write(dir);
  std::cout << "mAP " << format_double(report.map) << "\n"
            << "mAHP@" << report.k_max << " " << format_double(report.mahp_at_k.at(report.k_max))
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic hashing with hierarchy-aware losses"};
  app.set_version_flag("--version", SEMHASH_VERSION);
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample a synthetic dataset from a taxonomy");
  gen_cmd->add_option("--taxonomy", gen.taxonomy, "Edge list, one \"parent child\" per line")->required();
  gen_cmd->add_option("--per-class", gen.spec.per_class)->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dim", gen.spec.dim)->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed)->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--diffusion", gen.spec.diffusion)->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise)->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train an encoder");
  train_cmd->add_option("--config", tr.config, "key = value file")->check(CLI::ExistingFile);
  train_cmd->add_option("--features", tr.features)->required();
  train_cmd->add_option("--labels", tr.labels)->required();
  train_cmd->add_option("--taxonomy", tr.taxonomy)->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--variant", tr.variant)->check(CLI::IsMember({"shrewd", "shred"}));
  train_cmd->add_option("--code-length", tr.code_length);
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--lambda1", tr.lambda1);
  train_cmd->add_option("--lambda2", tr.lambda2);
  train_cmd->add_option("--learning-rate", tr.learning_rate);
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_flag("--quiet", tr.quiet);

  EncodeArgs enc;
  auto* encode_cmd = app.add_subcommand("encode", "Embed a dataset and build its index");
  encode_cmd->add_option("--checkpoint", enc.checkpoint)->required();
  encode_cmd->add_option("--features", enc.features)->required();
  encode_cmd->add_option("--labels", enc.labels)->required();
  encode_cmd->add_option("--taxonomy", enc.taxonomy)->required();
  encode_cmd->add_option("--out", enc.out, "Output directory")->required();

  IndexArgs idx;
  auto* index_cmd = app.add_subcommand("index", "Binarize stored embeddings into an index");
  index_cmd->add_option("--embeddings", idx.embeddings)->required();
  index_cmd->add_option("--labels", idx.labels)->required();
  index_cmd->add_option("--taxonomy", idx.taxonomy)->required();
  index_cmd->add_option("--out", idx.out, "Index file")->required();

  QueryArgs qa;
  auto* query_cmd = app.add_subcommand("query", "Print the k nearest codes as \"id distance\"");
  query_cmd->add_option("--index", qa.index)->required();
  auto* id_opt = query_cmd->add_option("--id", qa.id, "Query with an indexed item");
  auto* code_opt = query_cmd->add_option("--code", qa.code, "Query with a bit string");
  id_opt->excludes(code_opt);
  query_cmd->add_option("-k,--k", qa.k)->capture_default_str()->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Write mAP, mAHP and the HP@k curve");
  auto* eval_index = eval_cmd->add_option("--index", ev.index, "Database index");
  eval_cmd->add_option("--queries", ev.queries, "Query index (default: the database)")->needs(eval_index);
  auto* eval_ckpt = eval_cmd->add_option("--checkpoint", ev.checkpoint);
  auto* eval_features = eval_cmd->add_option("--features", ev.features);
  auto* eval_labels = eval_cmd->add_option("--labels", ev.labels);
  eval_ckpt->needs(eval_features)->needs(eval_labels)->excludes(eval_index);
  eval_cmd->add_option("--taxonomy", ev.taxonomy)->required();
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_option("--k-max", ev.k_max)->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--cutoffs", ev.cutoffs, "Extra mAHP cutoffs")->delimiter(',');
  eval_cmd->add_flag("--no-binarize", ev.no_binarize, "Rank continuous embeddings by Manhattan distance");
  eval_cmd->add_flag("--per-query", ev.per_query);

  try {
    app.parse(argc, argv);
    if (eval_cmd->parsed() && ev.index.empty() && ev.checkpoint.empty()) {
      throw CLI::RequiredError("eval needs --index or --checkpoint");
    }
    if (query_cmd->parsed() && !qa.id && qa.code.empty()) {
      throw CLI::RequiredError("query needs --id or --code");
    }
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) cmd_gen_data(gen);
    else if (train_cmd->parsed()) cmd_train(tr);
    else if (encode_cmd->parsed()) cmd_encode(enc);
    else if (index_cmd->parsed()) cmd_index(idx);
    else if (query_cmd->parsed()) cmd_query(qa);
    else if (eval_cmd->parsed()) cmd_eval(ev);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kDivergedLoss ? kExitDiverged : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
