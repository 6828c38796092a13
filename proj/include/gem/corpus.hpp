#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gem {

/// Raised for malformed corpus input; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Link {
  std::string anchor;
  std::string target_title;

  bool operator==(const Link&) const = default;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  std::vector<Link> links;

  bool operator==(const Sentence&) const = default;
};

struct Article {
  std::string title;
  std::vector<Sentence> sentences;

  bool operator==(const Article&) const = default;

  /// Sentences joined with single spaces.
  std::string text() const;
};

/// Articles keyed by title. Iteration is sorted by title.
class ArticleStore {
 public:
  using Map = std::map<std::string, Article, std::less<>>;
  using const_iterator = Map::const_iterator;

  ArticleStore() = default;

  /// Throws std::invalid_argument on a duplicate title or an invalid article.
  void add(Article article);

  const Article* find(std::string_view title) const;
  const Article& at(std::string_view title) const;
  bool contains(std::string_view title) const { return find(title) != nullptr; }

  std::size_t size() const noexcept { return articles_.size(); }
  bool empty() const noexcept { return articles_.empty(); }
  const_iterator begin() const { return articles_.begin(); }
  const_iterator end() const { return articles_.end(); }

  /// Article by position in title order.
  const Article& nth(std::size_t i) const;

  bool operator==(const ArticleStore&) const = default;

 private:
  Map articles_;
};

/// Lowercased word set used by the out-of-vocabulary claim filter.
class Vocabulary {
 public:
  static constexpr std::string_view kRule = "letters+internal-apostrophe-hyphen/lower";

  Vocabulary() = default;
  explicit Vocabulary(const std::set<std::string>& words) : words_(words.begin(), words.end()) {}

  bool contains(std::string_view word) const;
  std::size_t size() const noexcept { return words_.size(); }
  const std::set<std::string, std::less<>>& words() const noexcept { return words_; }
  std::string_view rule() const noexcept { return kRule; }

  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

  bool operator==(const Vocabulary&) const = default;

 private:
  std::set<std::string, std::less<>> words_;
};

ArticleStore parse_corpus(std::istream& in);
ArticleStore ingest_corpus(const std::filesystem::path& path);

/// Writes the store in the same line-delimited record format it is read from.
void write_corpus(std::ostream& out, const ArticleStore& store);

/// Rule-based sentence splitter. Whitespace is normalized to single spaces.
std::vector<std::string> split_sentences(std::string_view text);

/// Maximal runs of letters (bytes >= 0x80 count as letters) with internal
/// apostrophes or hyphens, lowercased.
std::vector<std::string> word_tokens(std::string_view text);

Vocabulary build_vocabulary(const ArticleStore& store);

}  // namespace gem
