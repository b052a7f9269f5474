#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aggnet/tensor.hpp"
#include "aggnet/vocab.hpp"

namespace aggnet {

enum class EmbeddingSource { kGlovePlusPlus, kAggression, kTrigram };

const char* embedding_source_name(EmbeddingSource s);
EmbeddingSource parse_embedding_source(const std::string& name);

// A full lookup table over some vocab: row id -> vector. Row 0 (PAD) is all
// zeros; every other row is nonzero by construction.
struct EmbeddingMatrix {
  EmbeddingSource source = EmbeddingSource::kGlovePlusPlus;
  Tensor table;  // [|V| x dim]
  std::size_t dim = 0;
  bool trainable = false;
};

struct SkipgramConfig {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;
  std::size_t min_count = 1;
  std::uint64_t seed = 42;
};

// Reads a GloVe-style text file ("token v1 .. vD" per line) keeping only tokens
// present in vocab. Returns vocab-id -> vector. Lines that do not parse or
// disagree on dimension raise ParseError naming the line.
std::unordered_map<int, std::vector<double>> load_pretrained(const std::string& path,
                                                             const Vocab& vocab,
                                                             int expected_dim = -1);

// Skip-gram with negative sampling, trained from scratch in-process.
// Deterministic for a fixed config (single-threaded, seeded draws, fixed
// document order). Returns token -> vector for every token meeting min_count.
// epoch_loss, when given, receives the mean pair loss of each epoch.
std::map<std::string, std::vector<double>> train_skipgram(
    const std::vector<std::vector<std::string>>& corpus, const SkipgramConfig& cfg,
    std::vector<double>* epoch_loss = nullptr);

// Pretrained vectors where available, skip-gram vectors as fallback.
// PAD row zero; OOV row is the mean of all assigned rows. A token covered by
// neither source raises DataError.
EmbeddingMatrix compose_glove_plus_plus(
    const Vocab& vocab, const std::unordered_map<int, std::vector<double>>& pretrained,
    const std::map<std::string, std::vector<double>>& trained);

// Skip-gram over the aggressive subset only (labels OAG/CAG); tokens never seen
// there get the mean vector. labels must align with docs; an empty aggressive
// subset raises DataError.
EmbeddingMatrix build_aggression_embeddings(const std::vector<std::vector<std::string>>& docs,
                                            const std::vector<int>& labels, const Vocab& vocab,
                                            const SkipgramConfig& cfg);

// Re-expresses each document as its trigram stream, builds the trigram vocab,
// and trains skip-gram over those streams.
std::pair<Vocab, EmbeddingMatrix> build_trigram_embeddings(
    const std::vector<std::vector<std::string>>& docs, const SkipgramConfig& cfg);

}  // namespace aggnet
