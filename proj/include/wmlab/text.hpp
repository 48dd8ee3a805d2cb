#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace wmlab {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_punct(char c) {
  static constexpr std::string_view puncts = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return puncts.find(c) != std::string_view::npos;
}

// Splits a whitespace-delimited chunk into leading punctuation, core, and
// trailing punctuation, emitting each punctuation character as its own word.
// Apostrophes are not peeled from the interior, so contractions stay whole.
// Sentinel surfaces pass through intact so detokenized text re-tokenizes to
// the same ids.
inline void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  if (chunk == "<unk>" || chunk == "<bos>") {
    out.emplace_back(chunk);
    return;
  }
  std::size_t lo = 0;
  std::size_t hi = chunk.size();
  std::size_t lead_end = lo;
  while (lead_end < hi && is_punct(chunk[lead_end])) ++lead_end;
  std::size_t trail_begin = hi;
  while (trail_begin > lead_end && is_punct(chunk[trail_begin - 1])) --trail_begin;
  for (std::size_t i = lo; i < lead_end; ++i) out.emplace_back(1, chunk[i]);
  if (trail_begin > lead_end) out.emplace_back(chunk.substr(lead_end, trail_begin - lead_end));
  for (std::size_t i = trail_begin; i < hi; ++i) out.emplace_back(1, chunk[i]);
}

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) split_chunk(text.substr(start, i - start), words);
  }
  return words;
}

}  // namespace detail

// Closed word-level vocabulary with <unk> and <bos> sentinels at the two
// highest ids. Surfaces are case-sensitive; ids are assigned in order of
// first appearance in the corpus.
class Vocabulary {
 public:
  static constexpr std::string_view unk_surface = "<unk>";
  static constexpr std::string_view bos_surface = "<bos>";

  static Vocabulary build(std::string_view corpus_text) {
    std::vector<std::string> words = detail::split_words(corpus_text);
    if (words.empty()) raise(Errc::empty_corpus, "corpus has no tokens");
    Vocabulary v;
    for (auto& w : words) {
      if (!v.id_.contains(w)) {
        v.id_.emplace(w, static_cast<TokenId>(v.surface_.size()));
        v.surface_.push_back(w);
      }
    }
    v.unk_ = static_cast<TokenId>(v.surface_.size());
    v.surface_.emplace_back(unk_surface);
    v.id_.try_emplace(std::string(unk_surface), v.unk_);
    v.bos_ = static_cast<TokenId>(v.surface_.size());
    v.surface_.emplace_back(bos_surface);
    v.id_.try_emplace(std::string(bos_surface), v.bos_);
    return v;
  }

  std::size_t size() const { return surface_.size(); }
  TokenId unk_id() const { return unk_; }
  TokenId bos_id() const { return bos_; }

  TokenId id_of(std::string_view surface) const {
    auto it = id_.find(std::string(surface));
    return it == id_.end() ? unk_ : it->second;
  }

  const std::string& surface_of(TokenId id) const {
    if (id >= surface_.size()) raise(Errc::invalid_token_id, "id " + std::to_string(id));
    return surface_[id];
  }

  TokenSeq tokenize(std::string_view text) const {
    TokenSeq seq;
    for (auto& w : detail::split_words(text)) seq.push_back(id_of(w));
    return seq;
  }

  std::string detokenize(const TokenSeq& seq) const {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out += ' ';
      out += surface_of(seq[i]);
    }
    return out;
  }

 private:
  std::vector<std::string> surface_;
  std::unordered_map<std::string, TokenId> id_;
  TokenId unk_ = 0;
  TokenId bos_ = 0;
};

}  // namespace wmlab
