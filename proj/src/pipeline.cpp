#include "aggnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <utility>

#include "aggnet/errors.hpp"
#include "aggnet/rng.hpp"
#include "aggnet/serialize.hpp"

namespace fs = std::filesystem;

namespace aggnet {
namespace {

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Copies src into dir/name and returns the content hash for the manifest.
std::string copy_into(const std::string& dir, const std::string& name, const std::string& src) {
  std::string bytes = read_file_bytes(src);
  write_file_atomic(dir + "/" + name, bytes);
  auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  return hash_string(fnv1a64(std::span<const unsigned char>(p, bytes.size())));
}

void verify_artifacts(const std::string& dir, const nlohmann::json& manifest) {
  if (!manifest.contains("artifacts")) {
    return;
  }
  for (const auto& [name, expected] : manifest.at("artifacts").items()) {
    const std::string want = expected.get<std::string>();
    const std::string got = hash_string(fnv1a64_file(dir + "/" + name));
    if (got != want) {
      throw HashMismatchError("artifact " + name + ": manifest records " + want + " but file hashes to " + got);
    }
  }
}

std::string manifest_kind(const nlohmann::json& manifest) {
  if (!manifest.contains("kind") || !manifest.at("kind").is_string()) {
    throw DataError("manifest has no kind field");
  }
  return manifest.at("kind").get<std::string>();
}

}  // namespace

// ---- Encoding ----------------------------------------------------------------

EncodedExample encode_example(const LabeledExample& ex, const Preprocessor& prep,
                              const Vocab& words, const Vocab* trigrams, std::size_t max_len,
                              bool needs_trigrams) {
  EncodedExample out;
  out.id = ex.id;
  out.label = ex.label;
  CleanText clean = prep.clean(ex.text);
  out.word_ids = encode_sequence(clean.tokens, words, max_len);
  if (needs_trigrams) {
    if (trigrams == nullptr) {
      throw ConfigError("model needs trigram inputs but no trigram vocab was given");
    }
    out.trigram_ids = encode_sequence(to_trigram_stream(clean.tokens), *trigrams, max_len);
  }
  return out;
}

std::vector<EncodedExample> encode_dataset(const Dataset& ds, const Preprocessor& prep,
                                           const Vocab& words, const Vocab* trigrams,
                                           std::size_t max_len, bool needs_trigrams) {
  std::vector<EncodedExample> out;
  out.reserve(ds.size());
  for (const LabeledExample& ex : ds.examples) {
    out.push_back(encode_example(ex, prep, words, trigrams, max_len, needs_trigrams));
  }
  return out;
}

void stratified_split(const Dataset& ds, double dev_fraction, std::uint64_t seed,
                      Dataset* train_out, Dataset* dev_out) {
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
    throw ConfigError("dev fraction must be in [0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
  }

  Rng rng(seed);
  std::vector<bool> in_dev(ds.size(), false);
  for (auto& ids : by_class) {
    for (std::size_t i = ids.size(); i > 1; --i) {
      std::swap(ids[i - 1], ids[rng.below(i)]);
    }
    std::size_t take = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(ids.size())));
    if (dev_fraction > 0.0 && !ids.empty() && take == 0) {
      take = 1;
    }
    if (take >= ids.size() && ids.size() > 1) {
      take = ids.size() - 1;
    }
    for (std::size_t i = 0; i < take && i < ids.size(); ++i) {
      in_dev[ids[i]] = true;
    }
  }

  train_out->examples.clear();
  dev_out->examples.clear();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_dev[i] ? dev_out : train_out)->examples.push_back(ds.examples[i]);
  }
}

// ---- Embedding bundles ---------------------------------------------------------

void save_embedding_bundle(const std::string& dir, const EmbeddingMatrix& matrix,
                           const Vocab& vocab, const std::string& stopwords_path,
                           const std::string& emoji_path) {
  if (matrix.table.rank() != 2 || matrix.table.dim(0) != vocab.size()) {
    throw ShapeError("embedding table rows do not match the vocab");
  }
  fs::create_directories(dir);
  vocab.save(dir + "/vocab.txt");

  nlohmann::json artifacts;
  artifacts["vocab.txt"] = hash_string(fnv1a64_file(dir + "/vocab.txt"));
  artifacts["stopwords.txt"] = copy_into(dir, "stopwords.txt", stopwords_path);
  artifacts["emoji_ranges.txt"] = copy_into(dir, "emoji_ranges.txt", emoji_path);

  ParamStore store;
  store.add("table", matrix.table, false);

  nlohmann::json extra;
  extra["kind"] = "embedding";
  extra["source"] = embedding_source_name(matrix.source);
  extra["dim"] = matrix.dim;
  extra["artifacts"] = artifacts;
  save_bundle(dir, store, std::move(extra));
}

EmbeddingBundle load_embedding_bundle(const std::string& dir) {
  LoadedBundle lb = load_bundle(dir);
  if (manifest_kind(lb.manifest) != "embedding") {
    throw DataError(dir + " is not an embedding bundle");
  }
  verify_artifacts(dir, lb.manifest);

  EmbeddingBundle out;
  out.source = parse_embedding_source(lb.manifest.at("source").get<std::string>());
  out.vocab = Vocab::load(dir + "/vocab.txt");

  bool found = false;
  for (std::size_t i = 0; i < lb.records.size(); ++i) {
    if (lb.records[i].name == "table") {
      out.matrix.table = std::move(lb.tensors[i]);
      found = true;
      break;
    }
  }
  if (!found) {
    throw DataError(dir + ": bundle has no table tensor");
  }
  if (out.matrix.table.rank() != 2 || out.matrix.table.dim(0) != out.vocab.size()) {
    throw DataError(dir + ": table shape does not match vocab.txt");
  }
  out.matrix.source = out.source;
  out.matrix.dim = out.matrix.table.dim(1);
  out.matrix.trainable = false;

  const auto& artifacts = lb.manifest.at("artifacts");
  out.vocab_hash = artifacts.at("vocab.txt").get<std::string>();
  out.stopwords_hash = artifacts.at("stopwords.txt").get<std::string>();
  out.emoji_hash = artifacts.at("emoji_ranges.txt").get<std::string>();
  return out;
}

LoadedEmbeddings load_embeddings_for(const EnsembleConfig& cfg, const std::string& root) {
  constexpr EmbeddingSource kAll[] = {EmbeddingSource::kGlovePlusPlus,
                                      EmbeddingSource::kAggression, EmbeddingSource::kTrigram};
  LoadedEmbeddings out;
  std::string stop_hash, emoji_hash, word_vocab_hash;
  bool have_words = false;

  for (EmbeddingSource src : kAll) {
    if (!cfg.uses_source(src)) {
      continue;
    }
    const std::string dir = root + "/" + embedding_source_name(src);
    EmbeddingBundle b = load_embedding_bundle(dir);
    if (b.source != src) {
      throw DataError(dir + " holds " + embedding_source_name(b.source) + " embeddings, expected " +
                      embedding_source_name(src));
    }

    if (stop_hash.empty()) {
      stop_hash = b.stopwords_hash;
      emoji_hash = b.emoji_hash;
      out.stopwords_path = dir + "/stopwords.txt";
      out.emoji_path = dir + "/emoji_ranges.txt";
    } else if (b.stopwords_hash != stop_hash || b.emoji_hash != emoji_hash) {
      throw DataError("embedding bundles under " + root + " were built with different stopword or emoji files");
    }

    if (src == EmbeddingSource::kTrigram) {
      out.trigram_vocab = std::move(b.vocab);
    } else if (!have_words) {
      out.word_vocab = std::move(b.vocab);
      word_vocab_hash = b.vocab_hash;
      have_words = true;
    } else if (b.vocab_hash != word_vocab_hash) {
      throw DataError("word-level embedding bundles under " + root + " use different vocabularies");
    }
    out.matrices.emplace(src, std::move(b.matrix));
  }

  if (out.matrices.empty()) {
    throw ConfigError("configuration uses no embedding source");
  }
  return out;
}

// ---- Model bundles --------------------------------------------------------------

void save_model_bundle(const std::string& dir, const Model& model, const Vocab& word_vocab,
                       const Vocab* trigram_vocab, const std::string& stopwords_path,
                       const std::string& emoji_path) {
  const EnsembleConfig& cfg = model.config();
  if (cfg.uses_source(EmbeddingSource::kTrigram) && trigram_vocab == nullptr) {
    throw ConfigError("model uses trigram inputs; a trigram vocab is required to save it");
  }
  fs::create_directories(dir);

  nlohmann::json artifacts;
  word_vocab.save(dir + "/vocab.txt");
  artifacts["vocab.txt"] = hash_string(fnv1a64_file(dir + "/vocab.txt"));
  if (trigram_vocab != nullptr) {
    trigram_vocab->save(dir + "/trigram_vocab.txt");
    artifacts["trigram_vocab.txt"] = hash_string(fnv1a64_file(dir + "/trigram_vocab.txt"));
  }
  artifacts["stopwords.txt"] = copy_into(dir, "stopwords.txt", stopwords_path);
  artifacts["emoji_ranges.txt"] = copy_into(dir, "emoji_ranges.txt", emoji_path);

  nlohmann::json extra;
  extra["kind"] = "model";
  extra["model"] = config_to_json(cfg);
  extra["artifacts"] = artifacts;
  save_bundle(dir, model.params(), std::move(extra));
}

ModelBundle load_model_bundle(const std::string& dir) {
  LoadedBundle lb = load_bundle(dir);
  if (manifest_kind(lb.manifest) != "model") {
    throw DataError(dir + " is not a model bundle");
  }
  verify_artifacts(dir, lb.manifest);

  EnsembleConfig cfg = config_from_json(lb.manifest.at("model"));

  // The constructor wants one table per source it uses; hand it the saved ones
  // so vocab sizes and dims line up, then overwrite everything from the blob.
  std::map<EmbeddingSource, EmbeddingMatrix> embeddings;
  constexpr EmbeddingSource kAll[] = {EmbeddingSource::kGlovePlusPlus,
                                      EmbeddingSource::kAggression, EmbeddingSource::kTrigram};
  for (EmbeddingSource src : kAll) {
    if (!cfg.uses_source(src)) {
      continue;
    }
    const std::string name = std::string("embedding.") + embedding_source_name(src);
    bool found = false;
    for (std::size_t i = 0; i < lb.records.size(); ++i) {
      if (lb.records[i].name != name) {
        continue;
      }
      EmbeddingMatrix m;
      m.source = src;
      m.table = lb.tensors[i];
      m.dim = m.table.rank() == 2 ? m.table.dim(1) : 0;
      m.trainable = cfg.train_embeddings;
      embeddings.emplace(src, std::move(m));
      found = true;
      break;
    }
    if (!found) {
      throw DataError(dir + ": blob is missing " + name);
    }
  }

  ModelBundle out;
  out.model = std::make_unique<Model>(cfg, std::move(embeddings));

  ParamStore& params = out.model->params();
  if (params.count() != lb.records.size()) {
    throw DataError(dir + ": blob holds " + std::to_string(lb.records.size()) +
                    " tensors but the architecture has " + std::to_string(params.count()));
  }
  for (std::size_t i = 0; i < lb.records.size(); ++i) {
    const TensorRecord& rec = lb.records[i];
    if (!params.contains(rec.name)) {
      throw DataError(dir + ": blob tensor " + rec.name + " is not part of the architecture");
    }
    Param& p = params.at(rec.name);
    if (!p.value.same_shape(lb.tensors[i])) {
      throw DataError(dir + ": tensor " + rec.name + " has the wrong shape");
    }
    p.value = std::move(lb.tensors[i]);
  }

  out.word_vocab = Vocab::load(dir + "/vocab.txt");
  if (lb.manifest.at("artifacts").contains("trigram_vocab.txt")) {
    out.trigram_vocab = Vocab::load(dir + "/trigram_vocab.txt");
  }
  if (cfg.uses_source(EmbeddingSource::kTrigram) && !out.trigram_vocab.has_value()) {
    throw DataError(dir + ": model uses trigram inputs but trigram_vocab.txt is missing");
  }
  out.prep = std::make_unique<Preprocessor>(
      Preprocessor::from_files(dir + "/stopwords.txt", dir + "/emoji_ranges.txt"));
  return out;
}

EncodedExample ModelBundle::encode(const LabeledExample& ex) const {
  const EnsembleConfig& cfg = model->config();
  const Vocab* tri = trigram_vocab ? &*trigram_vocab : nullptr;
  return encode_example(ex, *prep, word_vocab, tri, cfg.max_len,
                        cfg.uses_source(EmbeddingSource::kTrigram));
}

std::vector<EncodedExample> ModelBundle::encode(const Dataset& ds) const {
  std::vector<EncodedExample> out;
  out.reserve(ds.size());
  for (const LabeledExample& ex : ds.examples) {
    out.push_back(encode(ex));
  }
  return out;
}

// ---- Feature export ---------------------------------------------------------------

std::string export_features_tsv(const Model& model, const std::vector<EncodedExample>& examples,
                                FeatureTap tap, std::size_t sn_index) {
  const std::size_t sns = model.config().subnetworks.size();
  if (tap == FeatureTap::kSubnetwork && (sn_index < 1 || sn_index > sns)) {
    throw ConfigError("subnetwork index must be in 1.." + std::to_string(sns));
  }

  std::ostringstream out;
  bool wrote_header = false;
  char buf[32];
  for (const EncodedExample& ex : examples) {
    ForwardCache cache;
    model.forward(ex, nn::Mode::kInfer, nullptr, &cache);
    const Tensor& feats = tap == FeatureTap::kSubnetwork ? cache.sns[sn_index - 1].final_out
                          : tap == FeatureTap::kMerged   ? cache.merged
                                                         : cache.out.input;
    if (!wrote_header) {
      out << "id\tlabel";
      for (std::size_t i = 0; i < feats.size(); ++i) {
        out << "\tf" << i;
      }
      out << '\n';
      wrote_header = true;
    }
    out << ex.id << '\t' << (ex.label >= 0 ? label_name(ex.label) : "-");
    for (std::size_t i = 0; i < feats.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", feats[i]);
      out << '\t' << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace aggnet
