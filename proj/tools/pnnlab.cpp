// pnnlab command-line tool: synth, train, eval, gradcheck, bench.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pnnlab/data.hpp"
#include "pnnlab/diagnostics.hpp"
#include "pnnlab/metrics.hpp"
#include "pnnlab/model.hpp"
#include "pnnlab/training.hpp"

namespace fs = std::filesystem;
using namespace pnnlab;

namespace {

std::string num(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Turns a parse function that throws into a CLI11 validator message.
template <class Parse>
CLI::Validator parses_with(Parse parse, std::string name) {
  return CLI::Validator(
      [parse](std::string& s) -> std::string {
        try {
          parse(s);
          return {};
        } catch (const std::exception& e) {
          return e.what();
        }
      },
      "", std::move(name));
}

struct SynthOpts {
  SynthConfig cfg;
  std::size_t test_samples = 0;
  std::string out;
};

struct TrainOpts {
  TrainConfig cfg;
  std::string model = "ipnn";
  std::string activation = "relu";
  std::string fusion = "add";
  std::string schema, train, val, out, log, fm_init;
  double downsample = 1.0;
  bool no_timing = false;
};

struct EvalOpts {
  std::string schema, data, model;
  double downsampling_ratio = 1.0;
};

struct GradOpts {
  GradcheckConfig cfg;
  std::string model = "ipnn";
  std::string activation = "relu";
  std::string fusion = "add";
};

struct BenchOpts {
  std::size_t min_n = 8, max_n = 256;
  BenchConfig cfg;
  std::vector<std::string> forms;
  std::string out;
};

void write_truth(const fs::path& path, const std::vector<double>& probs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (double p : probs) out << num(p) << '\n';
  if (!out) throw std::runtime_error("error writing '" + path.string() + "'");
}

int run_synth(const SynthOpts& o) {
  SynthConfig cfg = o.cfg;
  cfg.n_samples = o.cfg.n_samples + o.test_samples;
  const SynthData data = synth_generate(cfg);
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());

  auto [train, test] = split_dataset(data.dataset, o.cfg.n_samples);
  const auto& truth = data.true_probability;
  write_schema((dir / "schema.txt").string(), data.encoding);
  write_dataset((dir / "train.txt").string(), train, data.encoding.dictionary);
  write_truth(dir / "train.truth",
              std::vector<double>(truth.begin(), truth.begin() + static_cast<long>(train.size())));
  if (o.test_samples > 0) {
    write_dataset((dir / "test.txt").string(), test, data.encoding.dictionary);
    write_truth(dir / "test.truth",
                std::vector<double>(truth.begin() + static_cast<long>(train.size()), truth.end()));
  }
  std::cout << "positive rate: " << num(data.dataset.positive_rate()) << '\n';
  return 0;
}

int run_train(TrainOpts o) {
  TrainConfig cfg = o.cfg;
  cfg.model.kind = parse_model_kind(o.model);
  cfg.model.activation = parse_activation(o.activation);
  cfg.model.fusion = parse_fusion(o.fusion);
  validate(cfg);

  const Encoding enc = read_schema(o.schema);
  Dataset train_set = parse_dataset(o.train, enc);
  const Dataset val_set = o.val.empty() ? Dataset{enc.schema, {}} : parse_dataset(o.val, enc);
  if (o.downsample < 1.0) {
    Rng rng(cfg.seed ^ 0x444f574e53ULL);
    train_set = downsample_negatives(train_set, o.downsample, rng);
  }

  Rng rng(cfg.seed);
  Model init = init_params(enc.schema, cfg.model, rng);
  if (!o.fm_init.empty()) {
    const Model fm = read_checkpoint(o.fm_init);
    const auto* fmp = std::get_if<FmParams>(&fm.params);
    if (!fmp) throw std::runtime_error("--fm-init expects an fm checkpoint");
    if (!(fm.schema == enc.schema)) throw std::runtime_error("--fm-init checkpoint schema differs");
    EmbeddingTable emb = fm_pretrain_embedding(*fmp, enc.schema, cfg.model.embedding_order);
    if (auto* p = std::get_if<FnnParams>(&init.params)) p->embedding = std::move(emb);
    else if (auto* q = std::get_if<PnnParams>(&init.params)) q->embedding = std::move(emb);
    else throw std::runtime_error("--fm-init applies to network models only");
  }

  const TrainResult result = train(std::move(init), train_set, val_set, cfg);
  write_checkpoint(o.out, result.model);
  if (!o.log.empty()) write_train_log(o.log, result.log, !o.no_timing);
  const EpochRecord& best = result.log.epochs.at(result.log.best_epoch - 1);
  std::cout << "epochs run: " << result.log.epochs.size() << ", best epoch: " << best.epoch
            << ", val_logloss: " << num(best.val_logloss) << ", val_auc: " << num(best.val_auc)
            << '\n';
  return 0;
}

int run_eval(const EvalOpts& o) {
  const Encoding enc = read_schema(o.schema);
  const Model model = read_checkpoint(o.model);
  if (!(model.schema == enc.schema)) {
    throw std::runtime_error("schema mismatch between checkpoint '" + o.model + "' and '" +
                             o.schema + "'");
  }
  const Dataset ds = parse_dataset(o.data, enc);
  const MetricsReport r = evaluate(model, ds, o.downsampling_ratio);
  std::cout << metrics_csv_header() << '\n' << to_csv(r) << '\n';
  return 0;
}

int run_gradcheck(GradOpts o) {
  o.cfg.kind = parse_model_kind(o.model);
  o.cfg.activation = parse_activation(o.activation);
  o.cfg.fusion = parse_fusion(o.fusion);
  const GradcheckReport r = gradcheck(o.cfg);
  std::cout << "block,max_rel_error,status\n";
  for (const auto& b : r.blocks) {
    std::cout << b.name << ',' << num(b.max_rel_error) << ','
              << (b.max_rel_error <= o.cfg.tolerance ? "pass" : "FAIL") << '\n';
  }
  std::cout << (r.passed ? "gradcheck passed" : "gradcheck FAILED") << '\n';
  return r.passed ? 0 : 1;
}

int run_bench(BenchOpts o) {
  o.cfg.ns.clear();
  for (std::size_t n = o.min_n; n <= o.max_n; n *= 2) o.cfg.ns.push_back(n);
  if (!o.forms.empty()) {
    o.cfg.forms.clear();
    for (const auto& f : o.forms) o.cfg.forms.push_back(parse_bench_form(f));
  }
  const BenchReport r = run_bench(o.cfg);
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw std::runtime_error("cannot write '" + o.out + "'");
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  out << "form,N,seconds\n";
  for (const auto& row : r.rows) out << to_string(row.form) << ',' << row.n << ',' << num(row.seconds) << '\n';
  out << "\nform,slope\n";
  for (const auto& s : r.slopes) out << to_string(s.form) << ',' << num(s.slope) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product-based neural networks for CTR estimation"};
  app.require_subcommand(1);

  SynthOpts synth;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic multi-field dataset");
  sy->add_option("--fields", synth.cfg.n_fields, "Number of fields")->check(CLI::PositiveNumber);
  sy->add_option("--cardinality", synth.cfg.cardinality, "Categories per field")->check(CLI::PositiveNumber);
  sy->add_option("--samples", synth.cfg.n_samples, "Training samples")->check(CLI::PositiveNumber);
  sy->add_option("--test-samples", synth.test_samples, "Extra held-out samples");
  sy->add_option("--interaction", synth.cfg.interaction_strength, "Pairwise interaction strength");
  sy->add_option("--additive", synth.cfg.additive_strength, "Per-category additive strength");
  sy->add_option("--bias", synth.cfg.bias, "Logit offset");
  sy->add_option("--seed", synth.cfg.seed, "Random seed");
  sy->add_option("--out", synth.out, "Output directory")->required();

  TrainOpts tr;
  auto* tc = app.add_subcommand("train", "Train a model");
  tc->add_option("--schema", tr.schema, "Schema file")->required()->check(CLI::ExistingFile);
  tc->add_option("--train", tr.train, "Training data")->required()->check(CLI::ExistingFile);
  tc->add_option("--val", tr.val, "Validation data")->check(CLI::ExistingFile);
  tc->add_option("--model", tr.model, "lr, fm, fnn, ipnn, opnn or pnnstar")
      ->check(parses_with(parse_model_kind, "KIND"));
  tc->add_option("--out", tr.out, "Checkpoint path")->required();
  tc->add_option("--log", tr.log, "Training log CSV path");
  tc->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  tc->add_option("--batch-size", tr.cfg.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  tc->add_option("--epochs", tr.cfg.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  tc->add_option("--dropout", tr.cfg.dropout_rate, "Dropout rate on hidden layers")
      ->check(CLI::Range(0.0, 0.999999));
  tc->add_option("--l2", tr.cfg.l2_lambda, "L2 strength for lr/fm weights")->check(CLI::NonNegativeNumber);
  tc->add_option("--seed", tr.cfg.seed, "Random seed");
  tc->add_option("--patience", tr.cfg.patience, "Early-stopping patience")->check(CLI::PositiveNumber);
  tc->add_option("--activation", tr.activation, "relu, tanh or sigmoid")
      ->check(CLI::IsMember({"relu", "tanh", "sigmoid"}));
  tc->add_option("--embedding-order", tr.cfg.model.embedding_order, "Embedding order M")
      ->check(CLI::PositiveNumber);
  tc->add_option("--d1", tr.cfg.model.d1, "First hidden width")->check(CLI::PositiveNumber);
  tc->add_option("--d2", tr.cfg.model.d2, "Further hidden width")->check(CLI::PositiveNumber);
  tc->add_option("--hidden-layers", tr.cfg.model.hidden_layers, "Hidden layers")->check(CLI::PositiveNumber);
  tc->add_option("--k", tr.cfg.model.k_order, "Inner-product factorization order")->check(CLI::PositiveNumber);
  tc->add_option("--fusion", tr.fusion, "pnnstar signal fusion")->check(CLI::IsMember({"add", "concat"}));
  tc->add_option("--embedding-init", tr.cfg.model.embedding_init, "Embedding init half-width")
      ->check(CLI::NonNegativeNumber);
  tc->add_option("--downsample", tr.downsample, "Keep negatives with this probability")
      ->check(CLI::Range(1e-9, 1.0));
  tc->add_option("--fm-init", tr.fm_init, "FM checkpoint to initialize embeddings")
      ->check(CLI::ExistingFile);
  tc->add_flag("--no-timing", tr.no_timing, "Write 0 in the seconds column");

  EvalOpts ev;
  auto* ec = app.add_subcommand("eval", "Evaluate a checkpoint");
  ec->add_option("--schema", ev.schema, "Schema file")->required()->check(CLI::ExistingFile);
  ec->add_option("--data", ev.data, "Dataset")->required()->check(CLI::ExistingFile);
  ec->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ec->add_option("--downsampling-ratio", ev.downsampling_ratio, "Negative keep rate used in training")
      ->check(CLI::Range(1e-9, 1.0));

  GradOpts gr;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc->add_option("--model", gr.model, "Model kind")->check(parses_with(parse_model_kind, "KIND"));
  gc->add_option("--k", gr.cfg.k_order, "Inner-product factorization order")->check(CLI::PositiveNumber);
  gc->add_option("--activation", gr.activation, "relu, tanh or sigmoid")
      ->check(CLI::IsMember({"relu", "tanh", "sigmoid"}));
  gc->add_option("--fusion", gr.fusion, "pnnstar signal fusion")->check(CLI::IsMember({"add", "concat"}));
  gc->add_option("--draws", gr.cfg.draws, "Random draws")->check(CLI::PositiveNumber);
  gc->add_option("--seed", gr.cfg.seed, "Random seed");
  gc->add_flag("--corrupt", gr.cfg.corrupt)->group("");

  BenchOpts be;
  auto* bc = app.add_subcommand("bench", "Time naive and reduced product layers");
  bc->add_option("--min-n", be.min_n, "Smallest N")->check(CLI::PositiveNumber);
  bc->add_option("--max-n", be.max_n, "Largest N (N doubles from min-n)")->check(CLI::PositiveNumber);
  bc->add_option("--order", be.cfg.order, "Embedding order M")->check(CLI::PositiveNumber);
  bc->add_option("--d1", be.cfg.d1, "Product-layer width")->check(CLI::PositiveNumber);
  bc->add_option("--forms", be.forms, "naive_inner factorized_inner naive_outer superposed_outer");
  bc->add_option("--min-seconds", be.cfg.min_seconds, "Minimum time per measurement");
  bc->add_option("--repeats", be.cfg.repeats, "Measurements per point")->check(CLI::PositiveNumber);
  bc->add_option("--seed", be.cfg.seed, "Random seed");
  bc->add_option("--out", be.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sy) return run_synth(synth);
    if (*tc) return run_train(tr);
    if (*ec) return run_eval(ev);
    if (*gc) return run_gradcheck(gr);
    if (*bc) return run_bench(be);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
