#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace aggnet {

// Token index with two reserved slots: 0 = PAD, 1 = OOV. Real tokens start at 2,
// ordered by descending frequency, ties broken by token text ascending, so the
// same corpus always yields the same ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  Vocab();

  static Vocab build(const std::vector<std::vector<std::string>>& corpus,
                     std::size_t min_count = 1);
  // Rebuild from an ordered token list (index 2 onward), e.g. a saved vocab file.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int lookup(const std::string& token) const;  // unknown -> kOov
  bool contains(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }  // includes PAD and OOV
  const std::string& token(int id) const;

  // Real tokens in id order (index 2 onward).
  std::vector<std::string> real_tokens() const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Encodes to exactly max_len ids: tokens beyond max_len are dropped (head kept),
// the tail is PAD. Unknown tokens map to OOV.
std::vector<int> encode_sequence(const std::vector<std::string>& tokens, const Vocab& vocab,
                                 std::size_t max_len);

}  // namespace aggnet
