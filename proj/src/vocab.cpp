#include "aggnet/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "aggnet/errors.hpp"

namespace aggnet {

Vocab::Vocab() {
  tokens_ = {"<pad>", "<oov>"};
  index_ = {{"<pad>", kPad}, {"<oov>", kOov}};
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> freq;  // ordered map keeps ties deterministic
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) ++freq[tok];
  }

  std::vector<std::pair<std::string, std::size_t>> entries;
  entries.reserve(freq.size());
  for (auto& [tok, n] : freq) {
    if (n >= min_count) entries.emplace_back(tok, n);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  for (auto& [tok, n] : entries) {
    (void)n;
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const auto& tok : tokens) {
    if (v.index_.count(tok)) throw DataError("duplicate vocab token: " + tok);
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

int Vocab::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOov : it->second;
}

bool Vocab::contains(const std::string& token) const { return index_.count(token) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("vocab id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocab::real_tokens() const {
  return std::vector<std::string>(tokens_.begin() + 2, tokens_.end());
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file: " + path);
  for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  if (!out) throw IoError("failed writing vocab file: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocab file: " + path);
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) toks.push_back(line);
  }
  return from_tokens(toks);
}

std::vector<int> encode_sequence(const std::vector<std::string>& tokens, const Vocab& vocab,
                                 std::size_t max_len) {
  std::vector<int> ids(max_len, Vocab::kPad);
  std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.lookup(tokens[i]);
  return ids;
}

}  // namespace aggnet
