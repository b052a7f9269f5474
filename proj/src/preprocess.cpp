#include "aggnet/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "aggnet/errors.hpp"

namespace aggnet {

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Minimal UTF-8 decode; malformed bytes decode as one replacement per byte so
// they fall through to the character filter and vanish.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
  unsigned char c0 = static_cast<unsigned char>(s[i]);
  if (c0 < 0x80) {
    i += 1;
    return c0;
  }
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if ((c0 & 0xE0) == 0xC0 && cont(1)) {
    std::uint32_t cp = (c0 & 0x1Fu) << 6 | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
    i += 2;
    return cp;
  }
  if ((c0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    std::uint32_t cp = (c0 & 0x0Fu) << 12 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
    i += 3;
    return cp;
  }
  if ((c0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    std::uint32_t cp = (c0 & 0x07u) << 18 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6 |
                       (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
    i += 4;
    return cp;
  }
  i += 1;
  return 0xFFFDu;
}

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
  return s.size() - pos >= prefix.size() && s.substr(pos, prefix.size()) == prefix;
}

}  // namespace

StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword list: " + path);
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

EmojiRanges load_emoji_ranges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open emoji range list: " + path);
  EmojiRanges out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    std::string body = line.substr(first, last - first + 1);

    auto dash = body.find('-');
    if (dash == std::string::npos) {
      throw ParseError("emoji range list " + path + " line " + std::to_string(line_no) +
                       ": expected LO-HI hex range");
    }
    try {
      std::uint32_t lo = static_cast<std::uint32_t>(std::stoul(body.substr(0, dash), nullptr, 16));
      std::uint32_t hi = static_cast<std::uint32_t>(std::stoul(body.substr(dash + 1), nullptr, 16));
      if (lo > hi) throw ParseError("");
      out.emplace_back(lo, hi);
    } catch (const ParseError&) {
      throw ParseError("emoji range list " + path + " line " + std::to_string(line_no) +
                       ": range is reversed");
    } catch (const std::exception&) {
      throw ParseError("emoji range list " + path + " line " + std::to_string(line_no) +
                       ": bad hex value");
    }
  }
  return out;
}

std::string squash_repeats(std::string_view word, std::size_t max_run) {
  if (max_run == 0) max_run = 1;
  std::string out;
  out.reserve(word.size());
  std::size_t run = 0;
  char prev = '\0';
  for (char c : word) {
    if (run > 0 && c == prev) {
      ++run;
    } else {
      run = 1;
      prev = c;
    }
    if (run <= max_run) out.push_back(c);
  }
  return out;
}

std::vector<std::string> char_trigrams(std::string_view word) {
  std::vector<std::string> out;
  if (word.empty()) return out;
  if (word.size() < 3) {
    out.emplace_back(word);
    return out;
  }
  out.reserve(word.size() - 2);
  for (std::size_t i = 0; i + 3 <= word.size(); ++i) out.emplace_back(word.substr(i, 3));
  return out;
}

Preprocessor::Preprocessor(StopwordSet stopwords, EmojiRanges emoji)
    : stopwords_(std::move(stopwords)), emoji_(std::move(emoji)) {}

Preprocessor Preprocessor::from_files(const std::string& stopword_path,
                                      const std::string& emoji_path) {
  return Preprocessor(load_stopwords(stopword_path), load_emoji_ranges(emoji_path));
}

bool Preprocessor::is_emoji(std::uint32_t cp) const {
  for (const auto& [lo, hi] : emoji_) {
    if (cp >= lo && cp <= hi) return true;
  }
  return false;
}

CleanText Preprocessor::clean(std::string_view raw) const {
  // Lowercase ASCII letters; other bytes pass through untouched for now.
  std::string text(raw);
  for (char& c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }

  // Drop URL spans: http://, https:// or www. through the next whitespace.
  std::string no_urls;
  no_urls.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (starts_with_at(text, i, "http://") || starts_with_at(text, i, "https://") ||
        starts_with_at(text, i, "www.")) {
      while (i < text.size() && !is_space_byte(text[i])) ++i;
      no_urls.push_back(' ');
      continue;
    }
    no_urls.push_back(text[i]);
    ++i;
  }

  // Decode codepoints; drop emoji, keep [a-z'] and whitespace, space out the rest.
  std::string filtered;
  filtered.reserve(no_urls.size());
  for (std::size_t i = 0; i < no_urls.size();) {
    std::uint32_t cp = decode_utf8(no_urls, i);
    if (cp == 0x2019) cp = '\'';  // typographic apostrophe
    if (!is_emoji(cp) && cp < 0x80 && ((cp >= 'a' && cp <= 'z') || cp == '\'')) {
      filtered.push_back(static_cast<char>(cp));
    } else {
      filtered.push_back(' ');  // emoji, digits, punctuation: all act as separators
    }
  }

  std::string squashed = squash_repeats(filtered, 2);

  CleanText out;
  std::istringstream ss(squashed);
  std::string tok;
  while (ss >> tok) {
    if (stopwords_.count(tok)) continue;
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

std::vector<std::string> to_trigram_stream(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const std::string& tok : tokens) {
    for (std::string& g : char_trigrams(tok)) out.push_back(std::move(g));
  }
  return out;
}

}  // namespace aggnet
