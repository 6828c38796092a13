#include "gem/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

namespace gem {

namespace {

using nlohmann::json;

bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

constexpr std::array kAbbreviations = {
    "Dr.",   "Mr.",   "Mrs.",  "Ms.",   "Prof.", "Sr.",   "Jr.",   "St.",  "Mt.",  "Gen.",
    "Col.",  "Lt.",   "Capt.", "Gov.",  "Sen.",  "Rep.",  "Rev.",  "Sgt.", "vs.",  "etc.",
    "e.g.",  "i.e.",  "U.S.",  "U.K.",  "U.N.",  "Inc.",  "Ltd.",  "Co.",  "Corp.", "No.",
    "Jan.",  "Feb.",  "Mar.",  "Apr.",  "Jun.",  "Jul.",  "Aug.",  "Sep.", "Sept.", "Oct.",
    "Nov.",  "Dec.",  "approx.", "ca.", "cf.",   "al.",   "Ph.D.", "a.m.", "p.m."};

bool is_abbreviation(std::string_view word) {
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end()) {
    return true;
  }
  // Single-letter initials such as "J."
  return word.size() == 2 && is_ascii_upper(word[0]) && word[1] == '.';
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

Article parse_record(const json& rec, std::size_t line) {
  if (!rec.is_object()) throw ParseError(line, "record is not a JSON object");
  for (const auto& [key, _] : rec.items()) {
    if (key != "title" && key != "sentences" && key != "links") {
      throw ParseError(line, "unknown field '" + key + "'");
    }
  }
  if (!rec.contains("title") || !rec["title"].is_string()) {
    throw ParseError(line, "missing string field 'title'");
  }
  if (!rec.contains("sentences") || !rec["sentences"].is_array()) {
    throw ParseError(line, "missing array field 'sentences'");
  }

  Article article;
  article.title = rec["title"].get<std::string>();
  if (article.title.empty()) throw ParseError(line, "empty title");

  for (const auto& s : rec["sentences"]) {
    if (!s.is_string() || s.get<std::string>().empty()) {
      throw ParseError(line, "sentences must be non-empty strings");
    }
    article.sentences.push_back({article.sentences.size(), s.get<std::string>(), {}});
  }
  if (article.sentences.empty()) throw ParseError(line, "article has no sentences");

  if (rec.contains("links")) {
    if (!rec["links"].is_array()) throw ParseError(line, "'links' must be an array");
    for (const auto& l : rec["links"]) {
      if (!l.is_object()) throw ParseError(line, "link is not an object");
      for (const auto& [key, _] : l.items()) {
        if (key != "sentence" && key != "anchor" && key != "target") {
          throw ParseError(line, "unknown link field '" + key + "'");
        }
      }
      if (!l.contains("sentence") || !l["sentence"].is_number_integer() ||
          !l.contains("anchor") || !l["anchor"].is_string() || !l.contains("target") ||
          !l["target"].is_string()) {
        throw ParseError(line, "link needs integer 'sentence', string 'anchor' and 'target'");
      }
      const auto idx = l["sentence"].get<long long>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= article.sentences.size()) {
        throw ParseError(line, "link sentence index out of range");
      }
      Link link{l["anchor"].get<std::string>(), l["target"].get<std::string>()};
      if (link.anchor.empty() || link.target_title.empty()) {
        throw ParseError(line, "link anchor and target must be non-empty");
      }
      auto& sentence = article.sentences[static_cast<std::size_t>(idx)];
      if (sentence.text.find(link.anchor) == std::string::npos) {
        throw ParseError(line, "anchor '" + link.anchor + "' not found in sentence " +
                                   std::to_string(idx));
      }
      sentence.links.push_back(std::move(link));
    }
  }
  return article;
}

}  // namespace

std::string Article::text() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out.push_back(' ');
    out += s.text;
  }
  return out;
}

void ArticleStore::add(Article article) {
  if (article.title.empty()) throw std::invalid_argument("article title is empty");
  if (article.sentences.empty()) {
    throw std::invalid_argument("article '" + article.title + "' has no sentences");
  }
  if (articles_.contains(article.title)) {
    throw std::invalid_argument("duplicate title '" + article.title + "'");
  }
  auto title = article.title;
  articles_.emplace(std::move(title), std::move(article));
}

const Article* ArticleStore::find(std::string_view title) const {
  auto it = articles_.find(title);
  return it == articles_.end() ? nullptr : &it->second;
}

const Article& ArticleStore::at(std::string_view title) const {
  if (const auto* a = find(title)) return *a;
  throw std::out_of_range("no article titled '" + std::string(title) + "'");
}

const Article& ArticleStore::nth(std::size_t i) const {
  if (i >= articles_.size()) throw std::out_of_range("article index out of range");
  return std::next(articles_.begin(), static_cast<std::ptrdiff_t>(i))->second;
}

bool Vocabulary::contains(std::string_view word) const { return words_.find(word) != words_.end(); }

void Vocabulary::write(std::ostream& out) const {
  for (const auto& w : words_) out << w << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) v.words_.insert(line);
  }
  return v;
}

ArticleStore parse_corpus(std::istream& in) {
  ArticleStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    Article article = parse_record(rec, line_no);
    if (store.contains(article.title)) {
      throw ParseError(line_no, "duplicate title '" + article.title + "'");
    }
    store.add(std::move(article));
  }
  if (store.empty()) throw ParseError(line_no, "corpus is empty");
  return store;
}

ArticleStore ingest_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void write_corpus(std::ostream& out, const ArticleStore& store) {
  for (const auto& [title, article] : store) {
    json rec;
    rec["title"] = title;
    rec["sentences"] = json::array();
    rec["links"] = json::array();
    for (const auto& s : article.sentences) {
      rec["sentences"].push_back(s.text);
      for (const auto& l : s.links) {
        rec["links"].push_back({{"sentence", s.index}, {"anchor", l.anchor}, {"target", l.target_title}});
      }
    }
    out << rec.dump() << '\n';
  }
}

std::vector<std::string> split_sentences(std::string_view text) {
  const std::string s = normalize_whitespace(text);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < s.size() && is_closer(s[j])) ++j;
    if (j + 1 >= s.size() || s[j] != ' ') continue;
    const char next = s[j + 1];
    if (!is_ascii_upper(next) && !is_ascii_digit(next)) continue;
    if (c == '.') {
      const auto word_start = s.rfind(' ', i);
      const auto from = word_start == std::string::npos ? 0 : word_start + 1;
      if (is_abbreviation(std::string_view(s).substr(from, i + 1 - from))) continue;
    }
    out.push_back(s.substr(start, j - start));
    start = j + 1;
    i = j;
  }
  if (start < s.size()) out.push_back(s.substr(start));
  return out;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(text[i])) {
      ++i;
      continue;
    }
    std::string word;
    while (i < text.size()) {
      const char c = text[i];
      if (is_word_byte(c)) {
        word.push_back(ascii_lower(c));
        ++i;
      } else if ((c == '\'' || c == '-') && i + 1 < text.size() && is_word_byte(text[i + 1])) {
        word.push_back(c);
        ++i;
      } else {
        break;
      }
    }
    out.push_back(std::move(word));
  }
  return out;
}

Vocabulary build_vocabulary(const ArticleStore& store) {
  if (store.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty store");
  std::set<std::string> words;
  for (const auto& [_, article] : store) {
    for (const auto& s : article.sentences) {
      for (auto& w : word_tokens(s.text)) words.insert(std::move(w));
    }
  }
  return Vocabulary(words);
}

}  // namespace gem
