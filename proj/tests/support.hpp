#pragma once

// Deterministic synthetic corpus and a trained toy model, shared across the
// test suite. Sentences are drawn from fixed word pools with a transition
// structure that mixes high-entropy slots (after determiners and adjectives)
// with forced low-entropy slots (after verbs and prepositions).

#include <cstdint>
#include <string>
#include <vector>

#include <wmlab/wmlab.hpp>

namespace support {

inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v = {
      "quick",   "quiet",  "bright", "dark",    "happy",  "sad",    "big",    "small",
      "old",     "new",    "cold",   "warm",    "strange", "gentle", "silent", "golden",
      "silver",  "heavy",  "light",  "narrow",  "wide",   "ancient", "modern", "distant",
      "nearby",  "hollow", "solid",  "smooth",  "rough",  "pale",   "vivid",  "calm"};
  return v;
}

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {
      "cat",     "dog",    "fox",     "bird",   "fish",   "horse",   "river",  "mountain",
      "forest",  "valley", "village", "city",   "road",   "bridge",  "house",  "garden",
      "window",  "door",   "stone",   "tree",   "flower", "field",   "meadow", "lake",
      "ocean",   "island", "harbor",  "tower",  "castle", "market",  "street", "lantern",
      "candle",  "book",   "letter",  "story",  "song",   "bell",    "clock",  "mirror",
      "basket",  "wagon",  "sailor",  "farmer", "teacher", "child",  "friend", "traveler"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {
      "watched",  "followed",  "crossed",    "reached",  "entered",   "left",
      "found",    "lost",      "carried",    "dropped",  "opened",    "closed",
      "climbed",  "descended", "painted",    "repaired", "visited",   "remembered",
      "forgot",   "admired",   "studied",    "ignored",  "approached", "avoided",
      "greeted",  "warned",    "guarded",    "sketched", "measured",  "cleaned",
      "borrowed", "returned"};
  return v;
}

inline const std::vector<std::string>& preps() {
  static const std::vector<std::string> v = {"near",  "beside", "behind", "beyond",
                                             "under", "above",  "across", "along"};
  return v;
}

inline const std::vector<std::string>& dets() {
  static const std::vector<std::string> v = {"the",  "one",  "each",    "every",
                                             "some", "this", "another", "their"};
  return v;
}

inline const std::vector<std::string>& starters() {
  static const std::vector<std::string> v = {"The",  "One",  "Each",    "Every",
                                             "Some", "This", "Another", "Their"};
  return v;
}

inline std::string make_sentence(wmlab::SeededStream& rng) {
  auto pick = [&](const std::vector<std::string>& pool) -> const std::string& {
    return pool[rng.next_below(pool.size())];
  };
  std::uint64_t roll = rng.next_below(100);
  std::string s = pick(starters()) + " " + pick(adjectives()) + " " + pick(nouns()) + " " +
                  pick(verbs());
  if (roll < 25) {
    s += " " + pick(dets()) + " " + pick(adjectives()) + " " + pick(nouns());
  } else if (roll < 70) {
    s += " " + pick(dets()) + " " + pick(adjectives()) + " " + pick(nouns()) + " " +
         pick(preps()) + " the " + pick(adjectives()) + " " + pick(nouns());
  } else if (roll < 85) {
    s += " " + pick(dets()) + " " + pick(nouns()) + " that is " + pick(adjectives());
  } else {
    s += " " + pick(dets()) + " " + pick(nouns()) + " " + pick(preps()) + " the " +
         pick(nouns());
  }
  s += rng.next_below(100) < 25 ? " !" : " .";
  return s;
}

inline std::string make_corpus(std::size_t lines = 400, std::uint64_t seed = 7) {
  wmlab::SeededStream rng(seed);
  std::string out;
  for (std::size_t i = 0; i < lines; ++i) {
    out += make_sentence(rng);
    if (rng.next_unit() < 0.15) {
      out += ' ';
      out += make_sentence(rng);
    }
    out += '\n';
  }
  return out;
}

struct Lab {
  wmlab::Vocabulary vocab;
  wmlab::NgramModel model;
  std::vector<wmlab::TokenSeq> prompts;
};

inline Lab make_lab(std::size_t lines = 400, std::uint64_t seed = 7, std::size_t order = 2,
                    double alpha = 0.1) {
  std::string corpus = make_corpus(lines, seed);
  wmlab::Vocabulary vocab = wmlab::Vocabulary::build(corpus);
  std::vector<wmlab::TokenSeq> docs;
  std::size_t start = 0;
  while (start < corpus.size()) {
    std::size_t nl = corpus.find('\n', start);
    docs.push_back(vocab.tokenize(corpus.substr(start, nl - start)));
    start = nl + 1;
  }
  wmlab::NgramModel model = wmlab::NgramModel::train(docs, order, alpha, vocab);
  std::vector<wmlab::TokenSeq> prompts;
  for (const auto& doc : docs)
    prompts.emplace_back(doc.begin(), doc.begin() + 3);
  return {std::move(vocab), std::move(model), std::move(prompts)};
}

inline std::string data_dir() { return WMLAB_DATA_DIR; }

}  // namespace support
