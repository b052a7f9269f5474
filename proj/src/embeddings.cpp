#include "aggnet/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "aggnet/errors.hpp"
#include "aggnet/preprocess.hpp"
#include "aggnet/rng.hpp"

namespace aggnet {

const char* embedding_source_name(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::kGlovePlusPlus:
      return "glove++";
    case EmbeddingSource::kAggression:
      return "aggression";
    case EmbeddingSource::kTrigram:
      return "trigram";
  }
  return "?";
}

EmbeddingSource parse_embedding_source(const std::string& name) {
  if (name == "glove++") return EmbeddingSource::kGlovePlusPlus;
  if (name == "aggression") return EmbeddingSource::kAggression;
  if (name == "trigram") return EmbeddingSource::kTrigram;
  throw ConfigError("unknown embedding source: " + name);
}

std::unordered_map<int, std::vector<double>> load_pretrained(const std::string& path,
                                                             const Vocab& vocab,
                                                             int expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pretrained vector file: " + path);

  std::unordered_map<int, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  int dim = expected_dim;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 'token v1 .. vD'");
    }
    std::string token = line.substr(0, sp);

    vals.clear();
    const char* p = line.c_str() + sp;
    char* end = nullptr;
    while (*p) {
      while (*p == ' ') ++p;
      if (!*p) break;
      double v = std::strtod(p, &end);
      if (end == p) {
        throw ParseError(path + " line " + std::to_string(line_no) + ": bad number near '" +
                         std::string(p).substr(0, 8) + "'");
      }
      vals.push_back(v);
      p = end;
    }
    if (vals.empty()) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": no vector values");
    }
    if (dim < 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " values, got " + std::to_string(vals.size()));
    }

    if (vocab.contains(token)) out.emplace(vocab.lookup(token), vals);
  }
  return out;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

struct SkipgramVocab {
  std::vector<std::string> words;            // sorted freq desc, token asc
  std::vector<std::size_t> freq;
  std::unordered_map<std::string, int> index;
};

SkipgramVocab count_words(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t min_count) {
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [tok, n] : freq) {
    if (n >= min_count) entries.emplace_back(tok, n);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  SkipgramVocab v;
  for (auto& [tok, n] : entries) {
    v.index.emplace(tok, static_cast<int>(v.words.size()));
    v.words.push_back(tok);
    v.freq.push_back(n);
  }
  return v;
}

}  // namespace

std::map<std::string, std::vector<double>> train_skipgram(
    const std::vector<std::vector<std::string>>& corpus, const SkipgramConfig& cfg,
    std::vector<double>* epoch_loss) {
  if (cfg.dim < 1) throw ConfigError("skip-gram dim must be positive");
  if (cfg.window < 1) throw ConfigError("skip-gram window must be positive");
  if (cfg.negatives < 0) throw ConfigError("skip-gram negative count must be >= 0");
  if (cfg.epochs < 1) throw ConfigError("skip-gram needs at least one epoch");

  SkipgramVocab vocab = count_words(corpus, std::max<std::size_t>(cfg.min_count, 1));
  std::size_t n_words = vocab.words.size();
  if (n_words == 0) throw DataError("skip-gram corpus has no tokens above min_count");
  std::size_t dim = static_cast<std::size_t>(cfg.dim);

  // Documents as in-vocab word ids; rare words drop out of the sequence.
  std::vector<std::vector<int>> docs;
  docs.reserve(corpus.size());
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus) {
    std::vector<int> ids;
    ids.reserve(doc.size());
    for (const auto& tok : doc) {
      auto it = vocab.index.find(tok);
      if (it != vocab.index.end()) ids.push_back(it->second);
    }
    total_tokens += ids.size();
    docs.push_back(std::move(ids));
  }
  if (total_tokens == 0) throw DataError("skip-gram corpus is empty after filtering");

  // Unigram^0.75 cumulative table for negative draws.
  std::vector<double> cumulative(n_words);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_words; ++i) {
    acc += std::pow(static_cast<double>(vocab.freq[i]), 0.75);
    cumulative[i] = acc;
  }

  Rng rng(cfg.seed);
  std::vector<double> vin(n_words * dim);
  std::vector<double> vout(n_words * dim, 0.0);
  double span = 1.0 / static_cast<double>(cfg.dim);
  for (double& x : vin) x = rng.uniform(-0.5 * span, 0.5 * span);

  auto draw_negative = [&]() {
    double r = rng.next_double() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    return static_cast<int>(std::min(idx, n_words - 1));
  };

  std::vector<double> err(dim);
  const double lr0 = cfg.lr;
  const double total_steps =
      static_cast<double>(cfg.epochs) * static_cast<double>(total_tokens) + 1.0;
  std::size_t processed = 0;

  if (epoch_loss) epoch_loss->clear();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pair_count = 0;
    for (const auto& doc : docs) {
      int len = static_cast<int>(doc.size());
      for (int ci = 0; ci < len; ++ci) {
        double alpha =
            lr0 * std::max(1e-4, 1.0 - static_cast<double>(processed) / total_steps);
        ++processed;
        int center = doc[static_cast<std::size_t>(ci)];
        double* h = vin.data() + static_cast<std::size_t>(center) * dim;

        for (int off = -cfg.window; off <= cfg.window; ++off) {
          if (off == 0) continue;
          int pos = ci + off;
          if (pos < 0 || pos >= len) continue;
          int ctx = doc[static_cast<std::size_t>(pos)];
          ++pair_count;

          std::fill(err.begin(), err.end(), 0.0);
          for (int k = 0; k <= cfg.negatives; ++k) {
            int target;
            double label;
            if (k == 0) {
              target = ctx;
              label = 1.0;
            } else {
              target = draw_negative();
              if (target == ctx) continue;
              label = 0.0;
            }
            double* u = vout.data() + static_cast<std::size_t>(target) * dim;
            double f = 0.0;
            for (std::size_t a = 0; a < dim; ++a) f += u[a] * h[a];
            double s = sigmoid(f);
            if (epoch_loss) {
              double p = label > 0.5 ? s : 1.0 - s;
              loss_sum -= std::log(std::max(p, 1e-12));
            }
            double g = (label - s) * alpha;
            for (std::size_t a = 0; a < dim; ++a) {
              err[a] += g * u[a];
              u[a] += g * h[a];
            }
          }
          for (std::size_t a = 0; a < dim; ++a) h[a] += err[a];
        }
      }
    }
    if (epoch_loss) {
      epoch_loss->push_back(pair_count ? loss_sum / static_cast<double>(pair_count) : 0.0);
    }
  }

  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < n_words; ++i) {
    const double* h = vin.data() + i * dim;
    out.emplace(vocab.words[i], std::vector<double>(h, h + dim));
  }
  return out;
}

namespace {

// Rows 2..n-1 from per-token vectors; PAD stays zero, OOV becomes the mean of
// the assigned rows.
EmbeddingMatrix assemble_matrix(EmbeddingSource source, const Vocab& vocab, std::size_t dim,
                                const std::function<const std::vector<double>*(int)>& row_for) {
  EmbeddingMatrix m;
  m.source = source;
  m.dim = dim;
  m.table = Tensor::zeros({vocab.size(), dim});

  std::vector<double> mean(dim, 0.0);
  std::size_t assigned = 0;
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    const std::vector<double>* v = row_for(static_cast<int>(id));
    if (!v) continue;
    double* row = m.table.row(id);
    for (std::size_t a = 0; a < dim; ++a) {
      row[a] = (*v)[a];
      mean[a] += (*v)[a];
    }
    ++assigned;
  }
  if (assigned > 0) {
    for (double& x : mean) x /= static_cast<double>(assigned);
  }
  double* oov = m.table.row(Vocab::kOov);
  for (std::size_t a = 0; a < dim; ++a) oov[a] = mean[a];
  return m;
}

}  // namespace

EmbeddingMatrix compose_glove_plus_plus(
    const Vocab& vocab, const std::unordered_map<int, std::vector<double>>& pretrained,
    const std::map<std::string, std::vector<double>>& trained) {
  std::size_t dim = 0;
  if (!pretrained.empty()) {
    dim = pretrained.begin()->second.size();
  } else if (!trained.empty()) {
    dim = trained.begin()->second.size();
  } else if (vocab.size() > 2) {
    throw DataError("glove++ composition has no vectors to draw from");
  } else {
    dim = 1;  // degenerate vocab of just PAD/OOV
  }

  for (const auto& [id, v] : pretrained) {
    (void)id;
    if (v.size() != dim) throw DataError("pretrained vector dimension mismatch");
  }
  for (const auto& [tok, v] : trained) {
    (void)tok;
    if (v.size() != dim) throw DataError("trained vector dimension mismatch");
  }

  EmbeddingMatrix m = assemble_matrix(
      EmbeddingSource::kGlovePlusPlus, vocab, dim, [&](int id) -> const std::vector<double>* {
        auto it = pretrained.find(id);
        if (it != pretrained.end()) return &it->second;
        auto jt = trained.find(vocab.token(id));
        if (jt != trained.end()) return &jt->second;
        throw DataError("token '" + vocab.token(id) +
                        "' missing from both pretrained and trained vectors");
      });
  return m;
}

EmbeddingMatrix build_aggression_embeddings(const std::vector<std::vector<std::string>>& docs,
                                            const std::vector<int>& labels, const Vocab& vocab,
                                            const SkipgramConfig& cfg) {
  if (docs.size() != labels.size()) {
    throw DataError("aggression embeddings: docs and labels differ in length");
  }
  std::vector<std::vector<std::string>> aggressive;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (labels[i] == 0 || labels[i] == 2) aggressive.push_back(docs[i]);  // CAG or OAG
  }
  if (aggressive.empty()) {
    throw DataError("aggression embeddings: no OAG/CAG documents in the corpus");
  }

  auto trained = train_skipgram(aggressive, cfg);
  EmbeddingMatrix m = assemble_matrix(
      EmbeddingSource::kAggression, vocab, static_cast<std::size_t>(cfg.dim),
      [&](int id) -> const std::vector<double>* {
        auto it = trained.find(vocab.token(id));
        return it == trained.end() ? nullptr : &it->second;
      });

  // Unseen tokens take the OOV mean row.
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    if (!trained.count(vocab.token(static_cast<int>(id)))) {
      double* row = m.table.row(id);
      const double* oov = m.table.row(Vocab::kOov);
      for (std::size_t a = 0; a < m.dim; ++a) row[a] = oov[a];
    }
  }
  return m;
}

std::pair<Vocab, EmbeddingMatrix> build_trigram_embeddings(
    const std::vector<std::vector<std::string>>& docs, const SkipgramConfig& cfg) {
  std::vector<std::vector<std::string>> streams;
  streams.reserve(docs.size());
  for (const auto& doc : docs) streams.push_back(to_trigram_stream(doc));

  Vocab vocab = Vocab::build(streams, cfg.min_count);
  auto trained = train_skipgram(streams, cfg);

  EmbeddingMatrix m = assemble_matrix(
      EmbeddingSource::kTrigram, vocab, static_cast<std::size_t>(cfg.dim),
      [&](int id) -> const std::vector<double>* {
        auto it = trained.find(vocab.token(id));
        return it == trained.end() ? nullptr : &it->second;
      });
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    if (!trained.count(vocab.token(static_cast<int>(id)))) {
      double* row = m.table.row(id);
      const double* oov = m.table.row(Vocab::kOov);
      for (std::size_t a = 0; a < m.dim; ++a) row[a] = oov[a];
    }
  }
  return {std::move(vocab), std::move(m)};
}

}  // namespace aggnet
