#include "gem/tokenizer.hpp"

#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace gem {

namespace {

bool is_letter(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (char c : bytes) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back(kDigits[u >> 4]);
    out.push_back(kDigits[u & 0xf]);
  }
  return out;
}

std::string from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::runtime_error("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::runtime_error("invalid hex digit");
  };
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
  }
  return out;
}

std::vector<TokenId> byte_ids(std::string_view chunk) {
  std::vector<TokenId> ids;
  ids.reserve(chunk.size());
  for (char c : chunk) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

void apply_merge(std::vector<TokenId>& ids, std::pair<TokenId, TokenId> pair, TokenId merged) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < ids.size(); ++w) {
    if (r + 1 < ids.size() && ids[r] == pair.first && ids[r + 1] == pair.second) {
      ids[w] = merged;
      r += 2;
    } else {
      ids[w] = ids[r];
      ++r;
    }
  }
  ids.resize(w);
}

struct PairHash {
  std::size_t operator()(const std::pair<TokenId, TokenId>& p) const noexcept {
    return std::hash<std::uint64_t>{}(static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32 |
                                      static_cast<std::uint32_t>(p.second));
  }
};

}  // namespace

BpeVocab::BpeVocab() {
  tokens_.reserve(257);
  for (int b = 0; b < 256; ++b) tokens_.emplace_back(1, static_cast<char>(b));
  tokens_.emplace_back(kEndOfTextMarker);
}

const std::string& BpeVocab::token_bytes(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("unknown token id " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::ptrdiff_t BpeVocab::merge_rank(TokenId left, TokenId right) const {
  auto it = merge_rank_.find({left, right});
  return it == merge_rank_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

TokenId BpeVocab::add_merge(TokenId left, TokenId right) {
  const auto id = static_cast<TokenId>(tokens_.size());
  merge_rank_.emplace(std::pair{left, right}, merges_.size());
  merges_.emplace_back(left, right);
  tokens_.push_back(tokens_[left] + tokens_[right]);
  return id;
}

void BpeVocab::write(std::ostream& out) const {
  out << "GEMBPE v1\n";
  out << "end_of_text " << kEndOfText << '\n';
  out << "merges " << merges_.size() << '\n';
  for (const auto& [l, r] : merges_) out << to_hex(tokens_[l]) << '\t' << to_hex(tokens_[r]) << '\n';
  out << "tokens " << tokens_.size() << '\n';
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << i << '\t' << to_hex(tokens_[i]) << '\n';
}

BpeVocab BpeVocab::read(std::istream& in) {
  auto fail = [](const std::string& what) -> void {
    throw std::runtime_error("bad vocab file: " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "GEMBPE v1") fail("missing 'GEMBPE v1' header");

  std::string key;
  std::size_t value = 0;
  if (!std::getline(in, line)) fail("truncated");
  std::istringstream(line) >> key >> value;
  if (key != "end_of_text" || value != static_cast<std::size_t>(kEndOfText)) {
    fail("unsupported end_of_text id");
  }
  if (!std::getline(in, line)) fail("truncated");
  std::istringstream(line) >> key >> value;
  if (key != "merges") fail("expected merges section");

  BpeVocab vocab;
  std::unordered_map<std::string, TokenId> by_bytes;
  for (std::size_t i = 0; i < 256; ++i) by_bytes.emplace(vocab.tokens_[i], static_cast<TokenId>(i));
  for (std::size_t i = 0; i < value; ++i) {
    if (!std::getline(in, line)) fail("truncated merge list");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("merge line without tab");
    const auto left = by_bytes.find(from_hex(line.substr(0, tab)));
    const auto right = by_bytes.find(from_hex(line.substr(tab + 1)));
    if (left == by_bytes.end() || right == by_bytes.end()) fail("merge refers to unknown token");
    const TokenId id = vocab.add_merge(left->second, right->second);
    by_bytes.emplace(vocab.tokens_[id], id);
  }

  if (!std::getline(in, line)) fail("truncated");
  std::istringstream(line) >> key >> value;
  if (key != "tokens" || value != vocab.tokens_.size()) fail("token table size mismatch");
  for (std::size_t i = 0; i < value; ++i) {
    if (!std::getline(in, line)) fail("truncated token table");
    const auto tab = line.find('\t');
    if (tab == std::string::npos || std::stoul(line.substr(0, tab)) != i ||
        from_hex(line.substr(tab + 1)) != vocab.tokens_[i]) {
      fail("token table disagrees with merges at id " + std::to_string(i));
    }
  }
  return vocab;
}

void BpeVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
}

BpeVocab BpeVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocab file " + path.string());
  return read(in);
}

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    if (text[i] == ' ' && i + 1 < text.size() && text[i + 1] != ' ') ++i;
    if (is_letter(text[i])) {
      while (i < text.size() && is_letter(text[i])) ++i;
    } else if (is_digit(text[i])) {
      while (i < text.size() && is_digit(text[i])) ++i;
    } else {
      ++i;
    }
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

BpeVocab train_bpe(const ArticleStore& store, std::size_t vocab_size) {
  BpeVocab vocab;
  if (vocab_size <= vocab.size()) {
    throw std::invalid_argument("vocab_size must exceed " + std::to_string(vocab.size()));
  }

  std::map<std::string, std::size_t> chunk_counts;
  for (const auto& [_, article] : store) {
    const std::string text = article.text();
    for (auto chunk : pretokenize(text)) ++chunk_counts[std::string(chunk)];
  }
  std::vector<std::vector<TokenId>> words;
  std::vector<std::size_t> counts;
  for (const auto& [chunk, n] : chunk_counts) {
    words.push_back(byte_ids(chunk));
    counts.push_back(n);
  }

  std::unordered_set<std::string> existing(vocab.tokens_.begin(), vocab.tokens_.end());
  while (vocab.size() < vocab_size) {
    std::unordered_map<std::pair<TokenId, TokenId>, std::size_t, PairHash> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& ids = words[w];
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) pair_counts[{ids[i], ids[i + 1]}] += counts[w];
    }
    const std::pair<TokenId, TokenId>* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, n] : pair_counts) {
      if (existing.contains(vocab.tokens_[pair.first] + vocab.tokens_[pair.second])) continue;
      const bool better =
          n > best_count ||
          (n == best_count && best != nullptr &&
           std::pair(std::string_view(vocab.tokens_[pair.first]), std::string_view(vocab.tokens_[pair.second])) <
               std::pair(std::string_view(vocab.tokens_[best->first]),
                         std::string_view(vocab.tokens_[best->second])));
      if (better) {
        best = &pair;
        best_count = n;
      }
    }
    if (best == nullptr) {
      vocab.truncated_ = true;
      break;
    }
    const auto pair = *best;
    const TokenId id = vocab.add_merge(pair.first, pair.second);
    existing.insert(vocab.tokens_[id]);
    for (auto& ids : words) apply_merge(ids, pair, id);
  }
  return vocab;
}

TokenSeq encode(std::string_view text, const BpeVocab& vocab, SourceKind kind) {
  TokenSeq out;
  out.kind = kind;
  const auto& merges = vocab.merges();

  for (auto chunk : pretokenize(text)) {
    auto ids = byte_ids(chunk);
    while (ids.size() > 1) {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        const auto r = vocab.merge_rank(ids[i], ids[i + 1]);
        if (r >= 0 && static_cast<std::size_t>(r) < best) best = static_cast<std::size_t>(r);
      }
      if (best == std::numeric_limits<std::size_t>::max()) break;
      apply_merge(ids, merges[best], static_cast<TokenId>(BpeVocab::kEndOfText + 1 + best));
    }
    out.ids.insert(out.ids.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string decode(const std::vector<TokenId>& ids, const BpeVocab& vocab) {
  std::string out;
  for (TokenId id : ids) out += vocab.token_bytes(id);
  return out;
}

std::string decode(const TokenSeq& tokens, const BpeVocab& vocab) { return decode(tokens.ids, vocab); }

}  // namespace gem
