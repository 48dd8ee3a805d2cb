#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace wmlab {

struct RocPoint {
  double fpr;
  double tpr;
};

// ROC curve swept over all distinct score thresholds, higher meaning
// positive. Runs from (0,0) to (1,1); ties in score move both coordinates at
// once, so the trapezoid area gives tied pairs half credit.
inline std::vector<RocPoint> roc_curve(std::span<const double> positives,
                                       std::span<const double> negatives) {
  if (positives.empty() || negatives.empty())
    raise(Errc::empty_side, "roc needs scores on both sides");
  std::map<double, std::pair<std::size_t, std::size_t>, std::greater<>> by_score;
  for (double s : positives) ++by_score[s].first;
  for (double s : negatives) ++by_score[s].second;
  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (const auto& [score, counts] : by_score) {
    tp += counts.first;
    fp += counts.second;
    curve.push_back({static_cast<double>(fp) / static_cast<double>(negatives.size()),
                     static_cast<double>(tp) / static_cast<double>(positives.size())});
  }
  return curve;
}

inline double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
  std::vector<RocPoint> curve = roc_curve(positives, negatives);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  return area;
}

// Fraction of positives flagged when the threshold is set to admit at most
// target_fpr of the negatives. Needs at least ceil(1 / target_fpr) negatives
// for the quantile to be meaningful.
inline double tpr_at_fpr(std::span<const double> positives, std::span<const double> negatives,
                         double target_fpr) {
  if (positives.empty() || negatives.empty())
    raise(Errc::empty_side, "tpr_at_fpr needs scores on both sides");
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    raise(Errc::invalid_argument, "target_fpr must be in (0, 1)");
  double needed = std::ceil(1.0 / target_fpr);
  if (static_cast<double>(negatives.size()) < needed)
    raise(Errc::insufficient_negatives,
          "need at least " + std::to_string(static_cast<std::size_t>(needed)) + " negatives");
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  std::size_t k = static_cast<std::size_t>(target_fpr * static_cast<double>(neg.size()));
  double threshold = std::nextafter(neg[k], std::numeric_limits<double>::infinity());
  std::size_t flagged = 0;
  for (double s : positives)
    if (s >= threshold) ++flagged;
  return static_cast<double>(flagged) / static_cast<double>(positives.size());
}

// Word error rate: token-level Levenshtein distance over the reference length.
inline double wer(const TokenSeq& reference, const TokenSeq& hypothesis) {
  if (reference.empty()) raise(Errc::empty_reference, "wer needs a nonempty reference");
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, cur[j - 1] + 1, prev[j] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

namespace detail {

inline std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++counts[TokenSeq(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace detail

// Sentence BLEU with uniform n-gram weights up to max_n, clipped counts, and
// the standard brevity penalty. Zero precision at any order gives zero.
inline double bleu(const TokenSeq& reference, const TokenSeq& hypothesis, std::size_t max_n = 4) {
  if (reference.empty() || hypothesis.empty() || max_n < 1)
    raise(Errc::empty_input, "bleu needs nonempty sequences and max_n >= 1");
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    auto ref_counts = detail::ngram_counts(reference, n);
    auto hyp_counts = detail::ngram_counts(hypothesis, n);
    std::size_t total = 0, clipped = 0;
    for (const auto& [gram, count] : hyp_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    if (total == 0 || clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  double bp = 1.0;
  if (hypothesis.size() < reference.size())
    bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                            static_cast<double>(hypothesis.size()));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

}  // namespace wmlab
