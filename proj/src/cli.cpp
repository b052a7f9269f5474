#include "aggnet/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aggnet/dataset.hpp"
#include "aggnet/embeddings.hpp"
#include "aggnet/errors.hpp"
#include "aggnet/metrics.hpp"
#include "aggnet/model.hpp"
#include "aggnet/pipeline.hpp"
#include "aggnet/preprocess.hpp"
#include "aggnet/serialize.hpp"
#include "aggnet/train.hpp"
#include "aggnet/vocab.hpp"

#include "CLI11.hpp"

namespace fs = std::filesystem;

namespace aggnet::cli {
namespace {

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) {
    std::cerr << "warning: " << w << '\n';
  }
}

Dataset load_csv(const std::string& path) {
  std::vector<std::string> warnings;
  Dataset ds = load_dataset(path, &warnings);
  print_warnings(warnings);
  return ds;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      out += ' ';
    }
    out += tokens[i];
  }
  return out;
}

// ---- preprocess ---------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out, stopwords, emoji;
};

void run_preprocess(const PreprocessArgs& a) {
  Dataset ds = load_csv(a.in);
  Preprocessor prep = Preprocessor::from_files(a.stopwords, a.emoji);
  std::ostringstream body;
  for (const LabeledExample& ex : ds.examples) {
    body << ex.id << '\t' << label_name(ex.label) << '\t' << join_tokens(prep.clean(ex.text).tokens)
         << '\n';
  }
  write_file_atomic(a.out, body.str());
  std::cout << "wrote " << ds.size() << " cleaned examples to " << a.out << '\n';
}

// ---- train-embeddings -----------------------------------------------------------

struct TrainEmbArgs {
  std::string mode, corpus, glove, out, stopwords, emoji;
  SkipgramConfig sg;
};

void run_train_embeddings(const TrainEmbArgs& a) {
  std::cout << "seed=" << a.sg.seed << '\n';
  EmbeddingSource src = parse_embedding_source(a.mode);
  if (src == EmbeddingSource::kGlovePlusPlus && a.glove.empty()) {
    throw UsageError("--glove is required when --mode is glove++");
  }

  Dataset ds = load_csv(a.corpus);
  Preprocessor prep = Preprocessor::from_files(a.stopwords, a.emoji);
  std::vector<std::vector<std::string>> docs;
  std::vector<int> labels;
  docs.reserve(ds.size());
  labels.reserve(ds.size());
  for (const LabeledExample& ex : ds.examples) {
    docs.push_back(prep.clean(ex.text).tokens);
    labels.push_back(ex.label);
  }

  if (src == EmbeddingSource::kTrigram) {
    auto [vocab, matrix] = build_trigram_embeddings(docs, a.sg);
    save_embedding_bundle(a.out, matrix, vocab, a.stopwords, a.emoji);
    std::cout << "saved trigram embeddings (vocab " << vocab.size() << ", dim " << matrix.dim
              << ") to " << a.out << '\n';
    return;
  }

  Vocab vocab = Vocab::build(docs, a.sg.min_count);
  EmbeddingMatrix matrix;
  if (src == EmbeddingSource::kGlovePlusPlus) {
    auto pretrained = load_pretrained(a.glove, vocab, a.sg.dim);
    auto trained = train_skipgram(docs, a.sg);
    matrix = compose_glove_plus_plus(vocab, pretrained, trained);
  } else {
    matrix = build_aggression_embeddings(docs, labels, vocab, a.sg);
  }
  save_embedding_bundle(a.out, matrix, vocab, a.stopwords, a.emoji);
  std::cout << "saved " << embedding_source_name(src) << " embeddings (vocab " << vocab.size()
            << ", dim " << matrix.dim << ") to " << a.out << '\n';
}

// ---- train -----------------------------------------------------------------------

struct TrainArgs {
  std::string preset_name, train_csv, augmented_csv, embeddings_dir, out_dir, dev_csv;
  double holdout = 0.0;
  int epochs = 10;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  int patience = 0;
};

void run_train(const TrainArgs& a) {
  std::cout << "seed=" << a.seed << '\n';
  EnsembleConfig cfg = preset(a.preset_name);
  cfg.seed = a.seed;

  LoadedEmbeddings emb = load_embeddings_for(cfg, a.embeddings_dir);
  const bool needs_tri = cfg.uses_source(EmbeddingSource::kTrigram);
  if (needs_tri && !emb.trigram_vocab.has_value()) {
    throw DataError("preset " + a.preset_name + " needs trigram embeddings but none were loaded");
  }
  const Vocab* tri = emb.trigram_vocab ? &*emb.trigram_vocab : nullptr;
  Preprocessor prep = Preprocessor::from_files(emb.stopwords_path, emb.emoji_path);

  Dataset train_ds = load_csv(a.train_csv);
  if (!a.augmented_csv.empty()) {
    train_ds = merge_datasets(train_ds, load_csv(a.augmented_csv));
  }
  std::cout << "training examples: " << train_ds.size() << '\n';

  Dataset holdout_train, holdout_dev;
  const Dataset* fit_ds = &train_ds;
  std::optional<Dataset> dev_ds;
  if (!a.dev_csv.empty()) {
    dev_ds = load_csv(a.dev_csv);
  } else if (a.holdout > 0.0) {
    stratified_split(train_ds, a.holdout, a.seed, &holdout_train, &holdout_dev);
    fit_ds = &holdout_train;
    dev_ds = std::move(holdout_dev);
    std::cout << "holdout split: " << fit_ds->size() << " train / " << dev_ds->size() << " dev\n";
  }

  std::vector<EncodedExample> fit =
      encode_dataset(*fit_ds, prep, emb.word_vocab, tri, cfg.max_len, needs_tri);
  std::vector<EncodedExample> dev;
  if (dev_ds) {
    dev = encode_dataset(*dev_ds, prep, emb.word_vocab, tri, cfg.max_len, needs_tri);
  }

  Model model(cfg, std::move(emb.matrices));
  std::cout << "model " << cfg.name << ": " << model.params().total_size() << " parameters\n";

  TrainConfig tcfg;
  tcfg.epochs = a.epochs;
  tcfg.batch_size = a.batch_size;
  tcfg.lr = a.lr;
  tcfg.seed = a.seed;
  tcfg.early_stop_patience = a.patience;

  TrainResult result = train(model, fit, tcfg, dev.empty() ? nullptr : &dev);
  std::string log = format_train_log(result);
  std::cout << log;

  fs::create_directories(a.out_dir);
  write_file_atomic(a.out_dir + "/train_log.tsv", log);
  save_model_bundle(a.out_dir, model, emb.word_vocab, tri, emb.stopwords_path, emb.emoji_path);
  if (result.best_epoch > 0) {
    std::printf("best epoch %d, dev weighted_f1=%.6f\n", result.best_epoch, result.best_dev_f1);
  }
  std::cout << "model saved to " << a.out_dir << '\n';
}

// ---- eval ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model_dir, test_csv, report;
};

void run_eval(const EvalArgs& a) {
  ModelBundle mb = load_model_bundle(a.model_dir);
  Dataset test = load_csv(a.test_csv);
  std::vector<EncodedExample> enc = mb.encode(test);

  std::vector<int> gold;
  gold.reserve(test.size());
  for (const LabeledExample& ex : test.examples) {
    gold.push_back(ex.label);
  }
  std::vector<int> pred = predict_classes(*mb.model, enc);
  EvalReport report = evaluate(gold, pred);
  std::string text = format_report(report);

  if (!a.report.empty()) {
    write_file_atomic(a.report, text);
  } else {
    std::cout << text;
  }
  std::printf("weighted_f1=%.6f\n", report.weighted_f1);
}

// ---- predict ---------------------------------------------------------------------

struct PredictArgs {
  std::string model_dir, text, file;
};

void predict_one(const ModelBundle& mb, const std::string& text) {
  LabeledExample ex;
  ex.id = "-";
  ex.text = text;
  ex.label = -1;
  Tensor probs = mb.model->infer_probs(mb.encode(ex));
  std::printf("%s\t%.6f\t%.6f\t%.6f\n", label_name(argmax_class(probs)), probs[0], probs[1],
              probs[2]);
}

void run_predict(const PredictArgs& a) {
  if (a.text.empty() == a.file.empty()) {
    throw UsageError("exactly one of --text and --file is required");
  }
  ModelBundle mb = load_model_bundle(a.model_dir);
  if (!a.text.empty()) {
    predict_one(mb, a.text);
    return;
  }
  std::ifstream in(a.file);
  if (!in) {
    throw IoError("cannot open " + a.file);
  }
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    predict_one(mb, line);
  }
}

// ---- export-features -----------------------------------------------------------

struct ExportArgs {
  std::string model_dir, data_csv, subnetwork = "merged", out;
};

void run_export(const ExportArgs& a) {
  FeatureTap tap = FeatureTap::kMerged;
  std::size_t index = 0;
  if (a.subnetwork == "merged") {
    tap = FeatureTap::kMerged;
  } else if (a.subnetwork == "head") {
    tap = FeatureTap::kHead;
  } else {
    try {
      std::size_t pos = 0;
      long v = std::stol(a.subnetwork, &pos);
      if (pos != a.subnetwork.size() || v < 1) {
        throw std::invalid_argument(a.subnetwork);
      }
      index = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw UsageError("--subnetwork must be merged, head or a 1-based subnetwork index, got " +
                       a.subnetwork);
    }
    tap = FeatureTap::kSubnetwork;
  }

  ModelBundle mb = load_model_bundle(a.model_dir);
  Dataset data = load_csv(a.data_csv);
  std::vector<EncodedExample> enc = mb.encode(data);
  write_file_atomic(a.out, export_features_tsv(*mb.model, enc, tap, index));
  std::cout << "wrote features for " << enc.size() << " examples to " << a.out << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Aggression classifier toolkit: preprocessing, embeddings, training, evaluation"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  CLI::App* c_pre = app.add_subcommand("preprocess", "Clean and tokenize a CSV dataset");
  c_pre->add_option("--in", pre.in, "Input CSV (id,text,label)")->required();
  c_pre->add_option("--out", pre.out, "Output TSV (id, label, tokens)")->required();
  c_pre->add_option("--stopwords", pre.stopwords, "Stopword list, one per line")->required();
  c_pre->add_option("--emoji-ranges", pre.emoji, "Emoji codepoint ranges")->required();

  TrainEmbArgs temb;
  CLI::App* c_temb = app.add_subcommand("train-embeddings", "Build an embedding bundle");
  c_temb->add_option("--mode", temb.mode, "glove++ | aggression | trigram")
      ->required()
      ->check(CLI::IsMember({"glove++", "aggression", "trigram"}));
  c_temb->add_option("--corpus", temb.corpus, "Training CSV (id,text,label)")->required();
  c_temb->add_option("--glove", temb.glove, "Pretrained GloVe text file (glove++ only)");
  c_temb->add_option("--out", temb.out, "Bundle directory to create")->required();
  c_temb->add_option("--stopwords", temb.stopwords, "Stopword list")->required();
  c_temb->add_option("--emoji-ranges", temb.emoji, "Emoji codepoint ranges")->required();
  c_temb->add_option("--dim", temb.sg.dim, "Embedding dimension");
  c_temb->add_option("--window", temb.sg.window, "Skip-gram window");
  c_temb->add_option("--negatives", temb.sg.negatives, "Negative samples per pair");
  c_temb->add_option("--epochs", temb.sg.epochs, "Skip-gram epochs");
  c_temb->add_option("--lr", temb.sg.lr, "Skip-gram learning rate");
  c_temb->add_option("--min-count", temb.sg.min_count, "Minimum token frequency");
  c_temb->add_option("--seed", temb.sg.seed, "Random seed");

  TrainArgs tr;
  CLI::App* c_tr = app.add_subcommand("train", "Train an ensemble model");
  c_tr->add_option("--preset", tr.preset_name, "DL1 | DL2 | CN1 | CN2")
      ->required()
      ->check(CLI::IsMember({"DL1", "DL2", "CN1", "CN2"}));
  c_tr->add_option("--train", tr.train_csv, "Training CSV")->required();
  c_tr->add_option("--augmented", tr.augmented_csv, "Augmented CSV appended to the training set");
  c_tr->add_option("--embeddings-dir", tr.embeddings_dir,
                   "Directory holding one bundle per source (glove++/, aggression/, trigram/)")
      ->required();
  c_tr->add_option("--out-dir", tr.out_dir, "Model bundle directory to create")->required();
  c_tr->add_option("--epochs", tr.epochs, "Training epochs");
  c_tr->add_option("--batch-size", tr.batch_size, "Minibatch size");
  c_tr->add_option("--lr", tr.lr, "Adam learning rate");
  c_tr->add_option("--seed", tr.seed, "Random seed");
  CLI::Option* o_dev = c_tr->add_option("--dev", tr.dev_csv, "Dev CSV for per-epoch weighted F1");
  c_tr->add_option("--holdout", tr.holdout, "Stratified dev fraction carved from the training set")
      ->excludes(o_dev);
  c_tr->add_option("--patience", tr.patience,
                   "Early-stop after this many epochs without dev improvement (0 = off)");

  EvalArgs ev;
  CLI::App* c_ev = app.add_subcommand("eval", "Evaluate a model bundle on a labeled CSV");
  c_ev->add_option("--model-dir", ev.model_dir, "Model bundle directory")->required();
  c_ev->add_option("--test", ev.test_csv, "Labeled CSV")->required();
  c_ev->add_option("--report", ev.report, "Write the full report to this path");

  PredictArgs pd;
  CLI::App* c_pd = app.add_subcommand("predict", "Classify raw text");
  c_pd->add_option("--model-dir", pd.model_dir, "Model bundle directory")->required();
  c_pd->add_option("--text", pd.text, "One text to classify");
  c_pd->add_option("--file", pd.file, "File with one text per line");

  ExportArgs ex;
  CLI::App* c_ex = app.add_subcommand("export-features", "Dump intermediate representations");
  c_ex->add_option("--model-dir", ex.model_dir, "Model bundle directory")->required();
  c_ex->add_option("--data", ex.data_csv, "CSV to run through the model")->required();
  c_ex->add_option("--subnetwork", ex.subnetwork, "merged | head | 1-based subnetwork index");
  c_ex->add_option("--out", ex.out, "Output TSV path")->required();

  try {
    app.parse(argc, argv);
    if (c_pre->parsed()) run_preprocess(pre);
    if (c_temb->parsed()) run_train_embeddings(temb);
    if (c_tr->parsed()) run_train(tr);
    if (c_ev->parsed()) run_eval(ev);
    if (c_pd->parsed()) run_predict(pd);
    if (c_ex->parsed()) run_export(ex);
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("aggnet");
  for (const std::string& a : args) {
    argv.push_back(a.c_str());
  }
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace aggnet::cli
