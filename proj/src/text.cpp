#include "gem/text.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <regex>

namespace gem {

namespace {

const std::string kMonths =
    "(january|february|march|april|may|june|july|august|september|october|november|december)";

std::string strip_leading_zeros(std::string digits) {
  const auto nz = digits.find_first_not_of('0');
  if (nz == std::string::npos) return "0";
  return digits.substr(nz);
}

std::string normalize_number(std::string_view raw) {
  std::string s;
  for (char c : raw) {
    if (c != ',') s.push_back(c);
  }
  const auto dot = s.find('.');
  if (dot == std::string::npos) return strip_leading_zeros(s);
  return strip_leading_zeros(s.substr(0, dot)) + s.substr(dot);
}

bool is_edge_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && !std::isalnum(u);
}

}  // namespace

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::set<std::string> extract_numbers_dates(std::string_view text) {
  static const std::regex month_day("\\b" + kMonths + "\\s+(\\d{1,2})(?![\\d])",
                                    std::regex::icase);
  static const std::regex day_month("(?:^|[^\\d])(\\d{1,2})\\s+" + kMonths + "\\b",
                                    std::regex::icase);
  static const std::regex month_year("\\b" + kMonths + "\\s+(\\d{4})(?![\\d])", std::regex::icase);
  static const std::regex number("\\d{1,3}(?:,\\d{3})+(?:\\.\\d+)?(?![\\d])|\\d+(?:\\.\\d+)?");

  const std::string s(text);
  std::set<std::string> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), month_day); it != std::sregex_iterator();
       ++it) {
    out.insert(to_lower_ascii((*it)[1].str()) + " " + strip_leading_zeros((*it)[2].str()));
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), day_month); it != std::sregex_iterator();
       ++it) {
    out.insert(to_lower_ascii((*it)[2].str()) + " " + strip_leading_zeros((*it)[1].str()));
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), month_year); it != std::sregex_iterator();
       ++it) {
    out.insert(to_lower_ascii((*it)[1].str()) + " " + (*it)[2].str());
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator();
       ++it) {
    out.insert(normalize_number((*it)[0].str()));
  }
  return out;
}

std::vector<std::string> sentence_words(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_edge_punct(sentence[b])) ++b;
    while (e > b && is_edge_punct(sentence[e - 1])) --e;
    if (e > b) out.emplace_back(sentence.substr(b, e - b));
    i = j;
  }
  return out;
}

}  // namespace gem
