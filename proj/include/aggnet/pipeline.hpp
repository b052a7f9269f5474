#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aggnet/dataset.hpp"
#include "aggnet/embeddings.hpp"
#include "aggnet/model.hpp"
#include "aggnet/preprocess.hpp"
#include "aggnet/vocab.hpp"

namespace aggnet {

// ---- Encoding ----------------------------------------------------------------

EncodedExample encode_example(const LabeledExample& ex, const Preprocessor& prep,
                              const Vocab& words, const Vocab* trigrams, std::size_t max_len,
                              bool needs_trigrams);

std::vector<EncodedExample> encode_dataset(const Dataset& ds, const Preprocessor& prep,
                                           const Vocab& words, const Vocab* trigrams,
                                           std::size_t max_len, bool needs_trigrams);

// Deterministic per-class split; dev gets round(fraction * n) of each class,
// at least 1 when the class is non-empty and the fraction is positive.
void stratified_split(const Dataset& ds, double dev_fraction, std::uint64_t seed,
                      Dataset* train_out, Dataset* dev_out);

// ---- Embedding bundles ---------------------------------------------------------

// Directory layout: manifest.json, weights.bin (one "table" tensor), vocab.txt,
// stopwords.txt, emoji_ranges.txt. The resource files are copied in so the
// bundle is self-contained; their hashes go into the manifest.
void save_embedding_bundle(const std::string& dir, const EmbeddingMatrix& matrix,
                           const Vocab& vocab, const std::string& stopwords_path,
                           const std::string& emoji_path);

struct EmbeddingBundle {
  EmbeddingSource source;
  EmbeddingMatrix matrix;
  Vocab vocab;
  std::string stopwords_hash;
  std::string emoji_hash;
  std::string vocab_hash;
};

EmbeddingBundle load_embedding_bundle(const std::string& dir);

// Loads every source the config needs from <root>/<source-name>/ and verifies
// the bundles agree: word-level sources must share one vocab, and all bundles
// must have been built with the same stopword/emoji files.
struct LoadedEmbeddings {
  std::map<EmbeddingSource, EmbeddingMatrix> matrices;
  Vocab word_vocab;
  std::optional<Vocab> trigram_vocab;
  std::string stopwords_path;  // inside one of the bundles
  std::string emoji_path;
};

LoadedEmbeddings load_embeddings_for(const EnsembleConfig& cfg, const std::string& root);

// ---- Model bundles --------------------------------------------------------------

void save_model_bundle(const std::string& dir, const Model& model, const Vocab& word_vocab,
                       const Vocab* trigram_vocab, const std::string& stopwords_path,
                       const std::string& emoji_path);

struct ModelBundle {
  std::unique_ptr<Model> model;
  Vocab word_vocab;
  std::optional<Vocab> trigram_vocab;
  std::unique_ptr<Preprocessor> prep;

  EncodedExample encode(const LabeledExample& ex) const;
  std::vector<EncodedExample> encode(const Dataset& ds) const;
};

// Rebuilds the model and verifies the blob hash plus every artifact hash
// recorded at save time.
ModelBundle load_model_bundle(const std::string& dir);

// ---- Feature export ---------------------------------------------------------------

enum class FeatureTap { kSubnetwork, kMerged, kHead };

// TSV with header id<TAB>label<TAB>f0..fN. Unlabeled rows print "-".
std::string export_features_tsv(const Model& model, const std::vector<EncodedExample>& examples,
                                FeatureTap tap, std::size_t sn_index = 0);

}  // namespace aggnet
