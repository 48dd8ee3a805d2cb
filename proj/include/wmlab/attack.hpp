#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "prf.hpp"
#include "text.hpp"

namespace wmlab {

struct AttackSpec {
  enum class Kind {
    lowercase,
    contract,
    expand,
    misspell,
    typo,
    synonymize,
    swap,
    copy_paste,
    external_paraphrase,
  };

  Kind kind = Kind::lowercase;
  double rate = 0.3;            // fraction of eligible words (misspell/typo/synonymize)
  std::uint32_t count = 1;      // word pairs exchanged by swap
  std::uint32_t segments = 1;   // copy-paste n
  double percent = 50.0;        // copy-paste m, percent of words kept per segment
  std::uint64_t rng_seed = 0;
  std::string endpoint;         // external paraphraser URL

  static AttackSpec lowercase() { return {}; }
  static AttackSpec contract() { return {Kind::contract}; }
  static AttackSpec expand() { return {Kind::expand}; }
  static AttackSpec misspell(double rate = 0.3, std::uint64_t seed = 0) {
    AttackSpec a{Kind::misspell};
    a.rate = rate;
    a.rng_seed = seed;
    return a;
  }
  static AttackSpec typo(double rate = 0.3, std::uint64_t seed = 0) {
    AttackSpec a{Kind::typo};
    a.rate = rate;
    a.rng_seed = seed;
    return a;
  }
  static AttackSpec synonymize(double rate = 0.3, std::uint64_t seed = 0) {
    AttackSpec a{Kind::synonymize};
    a.rate = rate;
    a.rng_seed = seed;
    return a;
  }
  static AttackSpec swap(std::uint32_t count = 1, std::uint64_t seed = 0) {
    AttackSpec a{Kind::swap};
    a.count = count;
    a.rng_seed = seed;
    return a;
  }
  static AttackSpec copy_paste(std::uint32_t n = 1, double m_percent = 50.0) {
    AttackSpec a{Kind::copy_paste};
    a.segments = n;
    a.percent = m_percent;
    return a;
  }
  static AttackSpec external_paraphrase(std::string endpoint) {
    AttackSpec a{Kind::external_paraphrase};
    a.endpoint = std::move(endpoint);
    return a;
  }
};

inline const char* to_string(AttackSpec::Kind k) {
  switch (k) {
    case AttackSpec::Kind::lowercase: return "lowercase";
    case AttackSpec::Kind::contract: return "contract";
    case AttackSpec::Kind::expand: return "expand";
    case AttackSpec::Kind::misspell: return "misspell";
    case AttackSpec::Kind::typo: return "typo";
    case AttackSpec::Kind::synonymize: return "synonymize";
    case AttackSpec::Kind::swap: return "swap";
    case AttackSpec::Kind::copy_paste: return "copy_paste";
    case AttackSpec::Kind::external_paraphrase: return "external_paraphrase";
  }
  return "unknown";
}

// Word-substitution resources, loaded from tab-separated files. Phrases and
// lookup keys are stored lowercase; application preserves capitalization of
// the first letter.
struct ResourceTables {
  std::vector<std::pair<std::string, std::string>> contractions;  // expanded -> contracted
  std::unordered_map<std::string, std::string> misspellings;
  std::unordered_map<std::string, std::vector<std::string>> synonyms;

  static ResourceTables load(const std::string& dir) {
    ResourceTables t;
    for (auto& [expanded, contracted] : read_pairs(dir + "/contractions.tsv"))
      t.contractions.emplace_back(expanded, contracted);
    for (auto& [word, misspelled] : read_pairs(dir + "/misspellings.tsv"))
      t.misspellings.emplace(word, misspelled);
    for (auto& [word, synonym] : read_pairs(dir + "/synonyms.tsv"))
      t.synonyms[word].push_back(synonym);
    return t;
  }

 private:
  static std::vector<std::pair<std::string, std::string>> read_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::file_not_found, path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) raise(Errc::io_error, "missing tab in " + path);
      out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
  }
};

namespace detail {

inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
inline char upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }

inline std::string lowercased(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = lower(c);
  return out;
}

// Word split for attacks: plain whitespace chunks, punctuation left attached.
inline std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

// Splits a word into leading punctuation, alphanumeric-ish core, and
// trailing punctuation so table lookups see the bare word.
struct WordParts {
  std::string prefix, core, suffix;
};

inline WordParts split_word(std::string_view w) {
  std::size_t lo = 0, hi = w.size();
  while (lo < hi && !is_alpha(w[lo]) && !(w[lo] >= '0' && w[lo] <= '9')) ++lo;
  while (hi > lo && !is_alpha(w[hi - 1]) && !(w[hi - 1] >= '0' && w[hi - 1] <= '9')) --hi;
  return {std::string(w.substr(0, lo)), std::string(w.substr(lo, hi - lo)),
          std::string(w.substr(hi))};
}

inline std::string match_case(std::string replacement, std::string_view original) {
  if (!original.empty() && !replacement.empty() && original[0] >= 'A' && original[0] <= 'Z')
    replacement[0] = upper(replacement[0]);
  return replacement;
}

// Indices of eligible words chosen for perturbation: a seeded shuffle of the
// eligible set, keeping ceil(rate * |eligible|).
inline std::vector<std::size_t> pick_targets(const std::vector<std::size_t>& eligible,
                                             double rate, SeededStream& rng) {
  if (!(rate > 0.0 && rate <= 1.0)) raise(Errc::invalid_argument, "rate must be in (0, 1]");
  std::vector<std::size_t> picked = eligible;
  rng.shuffle(picked);
  std::size_t keep = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(eligible.size())));
  picked.resize(std::min(keep, picked.size()));
  std::sort(picked.begin(), picked.end());
  return picked;
}

// Phrase rewriting shared by contract and expand: longest match first,
// scanning left to right. The final word of a matched phrase may carry
// trailing punctuation, which is preserved.
inline std::string rewrite_phrases(
    const std::string& text, const std::vector<std::pair<std::string, std::string>>& mapping) {
  std::vector<std::string> words = words_of(text);
  std::vector<std::vector<std::string>> sources;
  sources.reserve(mapping.size());
  for (auto& [from, to] : mapping) sources.push_back(words_of(from));
  std::vector<std::size_t> by_length(mapping.size());
  for (std::size_t i = 0; i < mapping.size(); ++i) by_length[i] = i;
  std::stable_sort(by_length.begin(), by_length.end(), [&](std::size_t a, std::size_t b) {
    return sources[a].size() > sources[b].size();
  });

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < words.size()) {
    bool matched = false;
    for (std::size_t mi : by_length) {
      const auto& src = sources[mi];
      if (src.empty() || i + src.size() > words.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; ok && k + 1 < src.size(); ++k)
        ok = lowercased(words[i + k]) == src[k];
      WordParts last = split_word(words[i + src.size() - 1]);
      ok = ok && last.prefix.empty() && lowercased(last.core) == src.back();
      if (!ok) continue;
      std::string replacement = match_case(mapping[mi].second, words[i]);
      std::vector<std::string> rep_words = words_of(replacement);
      rep_words.back() += last.suffix;
      for (auto& w : rep_words) out.push_back(w);
      i += src.size();
      matched = true;
      break;
    }
    if (!matched) out.push_back(words[i++]);
  }
  return join_words(out);
}

}  // namespace detail

inline std::string attack_lowercase(const std::string& text) {
  std::string out = text;
  for (char& c : out) c = detail::lower(c);
  return out;
}

inline std::string attack_contract(const std::string& text, const ResourceTables& tables) {
  return detail::rewrite_phrases(text, tables.contractions);
}

inline std::string attack_expand(const std::string& text, const ResourceTables& tables) {
  std::vector<std::pair<std::string, std::string>> reversed;
  reversed.reserve(tables.contractions.size());
  for (auto& [expanded, contracted] : tables.contractions)
    reversed.emplace_back(contracted, expanded);
  return detail::rewrite_phrases(text, reversed);
}

inline std::string attack_misspell(const std::string& text, const ResourceTables& tables,
                                   double rate, std::uint64_t rng_seed) {
  std::vector<std::string> words = detail::words_of(text);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < words.size(); ++i)
    if (tables.misspellings.contains(detail::lowercased(detail::split_word(words[i]).core)))
      eligible.push_back(i);
  if (eligible.empty()) return detail::join_words(words);
  SeededStream rng(rng_seed);
  for (std::size_t i : detail::pick_targets(eligible, rate, rng)) {
    detail::WordParts parts = detail::split_word(words[i]);
    const std::string& rep = tables.misspellings.at(detail::lowercased(parts.core));
    words[i] = parts.prefix + detail::match_case(rep, parts.core) + parts.suffix;
  }
  return detail::join_words(words);
}

// Replaces one letter per targeted word with a different random letter,
// keeping the word's length and the letter's case.
inline std::string attack_typo(const std::string& text, double rate, std::uint64_t rng_seed) {
  std::vector<std::string> words = detail::words_of(text);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < words.size(); ++i)
    for (char c : words[i])
      if (detail::is_alpha(c)) {
        eligible.push_back(i);
        break;
      }
  if (eligible.empty()) return detail::join_words(words);
  SeededStream rng(rng_seed);
  for (std::size_t i : detail::pick_targets(eligible, rate, rng)) {
    std::vector<std::size_t> letter_pos;
    for (std::size_t k = 0; k < words[i].size(); ++k)
      if (detail::is_alpha(words[i][k])) letter_pos.push_back(k);
    std::size_t pos = letter_pos[rng.next_below(letter_pos.size())];
    char orig = words[i][pos];
    char base = detail::lower(orig);
    char pick = static_cast<char>('a' + rng.next_below(25));
    if (pick >= base) ++pick;
    words[i][pos] = (orig >= 'A' && orig <= 'Z') ? detail::upper(pick) : pick;
  }
  return detail::join_words(words);
}

inline std::string attack_synonymize(const std::string& text, const ResourceTables& tables,
                                     double rate, std::uint64_t rng_seed) {
  std::vector<std::string> words = detail::words_of(text);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto it = tables.synonyms.find(detail::lowercased(detail::split_word(words[i]).core));
    if (it != tables.synonyms.end() && !it->second.empty()) eligible.push_back(i);
  }
  if (eligible.empty()) return detail::join_words(words);
  SeededStream rng(rng_seed);
  for (std::size_t i : detail::pick_targets(eligible, rate, rng)) {
    detail::WordParts parts = detail::split_word(words[i]);
    const auto& options = tables.synonyms.at(detail::lowercased(parts.core));
    const std::string& rep = options[rng.next_below(options.size())];
    words[i] = parts.prefix + detail::match_case(rep, parts.core) + parts.suffix;
  }
  return detail::join_words(words);
}

// Exchanges `count` seeded pairs of distinct word positions.
inline std::string attack_swap(const std::string& text, std::uint32_t count,
                               std::uint64_t rng_seed) {
  if (count == 0) raise(Errc::invalid_argument, "swap count must be positive");
  std::vector<std::string> words = detail::words_of(text);
  if (words.size() < 2) return detail::join_words(words);
  SeededStream rng(rng_seed);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::size_t i = rng.next_below(words.size());
    std::size_t j = rng.next_below(words.size() - 1);
    if (j >= i) ++j;
    std::swap(words[i], words[j]);
  }
  return detail::join_words(words);
}

struct CopyPasteResult {
  std::string text;
  // [begin, end) word index ranges of the watermarked segments in the output.
  std::vector<std::pair<std::size_t, std::size_t>> segments;
};

// CP-n-m: keeps n evenly spaced segments of floor(m% * L) watermarked words
// and fills the n+1 gaps with cover words, preserving total word count.
inline CopyPasteResult attack_copy_paste(const std::string& watermarked,
                                         const std::string& cover, std::uint32_t n,
                                         double m_percent) {
  if (n == 0) raise(Errc::invalid_argument, "need at least one segment");
  if (!(m_percent > 0.0 && m_percent < 100.0))
    raise(Errc::invalid_argument, "segment percent must be in (0, 100)");
  if (static_cast<double>(n) * m_percent > 100.0)
    raise(Errc::invalid_argument, "n * m must not exceed 100");
  std::vector<std::string> wm = detail::words_of(watermarked);
  const std::size_t len = wm.size();
  if (len == 0) raise(Errc::empty_text, "watermarked text has no words");
  const std::size_t seg_len =
      static_cast<std::size_t>(m_percent / 100.0 * static_cast<double>(len));
  if (seg_len == 0) raise(Errc::invalid_argument, "segment rounds to zero words");

  std::vector<std::string> cov = detail::words_of(cover);
  const std::size_t filler = len - static_cast<std::size_t>(n) * seg_len;
  if (cov.size() < filler)
    raise(Errc::cover_too_short, "cover has " + std::to_string(cov.size()) +
                                     " words, need " + std::to_string(filler));

  CopyPasteResult out;
  std::size_t cov_i = 0;
  auto emit_cover = [&](std::size_t count, std::vector<std::string>& dst) {
    for (std::size_t k = 0; k < count; ++k) dst.push_back(cov[cov_i++]);
  };
  std::vector<std::string> result;
  result.reserve(len);
  const std::size_t gaps = static_cast<std::size_t>(n) + 1;
  const std::size_t base = filler / gaps;
  const std::size_t rem = filler % gaps;
  for (std::uint32_t i = 0; i < n; ++i) {
    emit_cover(base + (i < rem ? 1 : 0), result);
    std::size_t src = n == 1 ? (len - seg_len) / 2
                             : static_cast<std::size_t>(
                                   static_cast<double>(i) *
                                   static_cast<double>(len - seg_len) /
                                   static_cast<double>(n - 1));
    out.segments.emplace_back(result.size(), result.size() + seg_len);
    for (std::size_t k = 0; k < seg_len; ++k) result.push_back(wm[src + k]);
  }
  emit_cover(base + (n < rem ? 1 : 0), result);
  out.text = detail::join_words(result);
  return out;
}

using ParaphraseFn = std::function<std::string(const std::string&)>;

// Dispatch for a single attack. copy_paste consumes the paired cover text;
// external_paraphrase calls through the wired paraphraser.
inline std::string apply_attack(const AttackSpec& spec, const std::string& text,
                                const ResourceTables& tables,
                                const std::string* cover = nullptr,
                                const ParaphraseFn& paraphrase = {}) {
  switch (spec.kind) {
    case AttackSpec::Kind::lowercase: return attack_lowercase(text);
    case AttackSpec::Kind::contract: return attack_contract(text, tables);
    case AttackSpec::Kind::expand: return attack_expand(text, tables);
    case AttackSpec::Kind::misspell:
      return attack_misspell(text, tables, spec.rate, spec.rng_seed);
    case AttackSpec::Kind::typo: return attack_typo(text, spec.rate, spec.rng_seed);
    case AttackSpec::Kind::synonymize:
      return attack_synonymize(text, tables, spec.rate, spec.rng_seed);
    case AttackSpec::Kind::swap: return attack_swap(text, spec.count, spec.rng_seed);
    case AttackSpec::Kind::copy_paste: {
      if (!cover) raise(Errc::invalid_argument, "copy_paste needs a cover text");
      return attack_copy_paste(text, *cover, spec.segments, spec.percent).text;
    }
    case AttackSpec::Kind::external_paraphrase: {
      if (!paraphrase) raise(Errc::invalid_argument, "no paraphraser wired");
      return paraphrase(text);
    }
  }
  raise(Errc::invalid_argument, "bad attack kind");
}

inline std::string attack_chain(std::span<const AttackSpec> specs, std::string text,
                                const ResourceTables& tables,
                                const std::string* cover = nullptr,
                                const ParaphraseFn& paraphrase = {}) {
  for (const auto& spec : specs) text = apply_attack(spec, text, tables, cover, paraphrase);
  return text;
}

}  // namespace wmlab
