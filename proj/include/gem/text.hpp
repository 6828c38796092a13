#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gem {

/// Unit-cost edit distance over bytes.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Digit runs (comma groups joined, leading zeros stripped), decimals, and
/// month-name dates ("march 13", "march 1967"), all lowercase.
std::set<std::string> extract_numbers_dates(std::string_view text);

/// Whitespace-separated words with surrounding punctuation stripped. This is
/// the unit counted when selecting target words from a sentence.
std::vector<std::string> sentence_words(std::string_view sentence);

std::string to_lower_ascii(std::string_view s);

}  // namespace gem
