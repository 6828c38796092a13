#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gem/corpus.hpp"

namespace gem {

using TokenId = std::int32_t;

enum class SourceKind { context, target, present };

struct TokenSeq {
  std::vector<TokenId> ids;
  SourceKind kind = SourceKind::present;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  bool operator==(const TokenSeq&) const = default;
};

/// Byte-level BPE vocabulary. Ids 0..255 are raw bytes, 256 is end-of-text,
/// and merge i produces id 257 + i.
class BpeVocab {
 public:
  static constexpr TokenId kEndOfText = 256;
  static constexpr std::string_view kEndOfTextMarker = "<|endoftext|>";

  BpeVocab();

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId end_of_text() const noexcept { return kEndOfText; }
  const std::string& token_bytes(TokenId id) const;
  const std::vector<std::pair<TokenId, TokenId>>& merges() const noexcept { return merges_; }
  /// Rank of a merge, or -1 when the pair is not a merge.
  std::ptrdiff_t merge_rank(TokenId left, TokenId right) const;

  /// Set when training stopped before reaching the requested size.
  bool truncated() const noexcept { return truncated_; }

  void write(std::ostream& out) const;
  static BpeVocab read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static BpeVocab load(const std::filesystem::path& path);

  bool operator==(const BpeVocab& o) const { return merges_ == o.merges_ && tokens_ == o.tokens_; }

 private:
  friend BpeVocab train_bpe(const ArticleStore&, std::size_t);
  TokenId add_merge(TokenId left, TokenId right);

  std::vector<std::pair<TokenId, TokenId>> merges_;
  std::vector<std::string> tokens_;
  std::map<std::pair<TokenId, TokenId>, std::size_t> merge_rank_;
  bool truncated_ = false;
};

/// Splits text into pre-tokenization chunks: an optional leading space
/// followed by a run of letters, a run of digits, or one other byte.
std::vector<std::string_view> pretokenize(std::string_view text);

/// Learns merges over all sentence text. Merges are chosen by descending
/// pair frequency with ties broken by the lexicographic order of the
/// (left bytes, right bytes) pair.
BpeVocab train_bpe(const ArticleStore& store, std::size_t vocab_size);

TokenSeq encode(std::string_view text, const BpeVocab& vocab,
                SourceKind kind = SourceKind::present);

/// Throws std::out_of_range on an unknown id.
std::string decode(const TokenSeq& tokens, const BpeVocab& vocab);
std::string decode(const std::vector<TokenId>& ids, const BpeVocab& vocab);

}  // namespace gem
