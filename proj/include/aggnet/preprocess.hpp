#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace aggnet {

struct CleanText {
  std::vector<std::string> tokens;
};

using StopwordSet = std::unordered_set<std::string>;
using EmojiRanges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

// One token per line, UTF-8, LF line endings.
StopwordSet load_stopwords(const std::string& path);

// One inclusive hex codepoint range per line ("1F600-1F64F"); blank lines and
// trailing "# ..." comments are allowed.
EmojiRanges load_emoji_ranges(const std::string& path);

// Caps a run of the same character. squash_repeats("suuuuuuper") == "suuper".
std::string squash_repeats(std::string_view word, std::size_t max_run = 2);

// Sliding character trigrams; words shorter than 3 come back whole.
std::vector<std::string> char_trigrams(std::string_view word);

// The tweet-cleaning pipeline, applied in a fixed order: lowercase, strip URLs,
// strip emoji, strip digits and punctuation (keeping letters, apostrophes and
// whitespace), cap repeated characters at 2, tokenize on whitespace, drop
// stopwords. Removed spans act as separators. Output tokens are ASCII [a-z'].
class Preprocessor {
 public:
  Preprocessor(StopwordSet stopwords, EmojiRanges emoji);
  static Preprocessor from_files(const std::string& stopword_path,
                                 const std::string& emoji_path);

  CleanText clean(std::string_view raw) const;

  const StopwordSet& stopwords() const { return stopwords_; }
  const EmojiRanges& emoji_ranges() const { return emoji_; }

 private:
  bool is_emoji(std::uint32_t cp) const;

  StopwordSet stopwords_;
  EmojiRanges emoji_;
};

// Concatenated trigram stream over a token sequence, in token order.
std::vector<std::string> to_trigram_stream(const std::vector<std::string>& tokens);

}  // namespace aggnet
