#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "generate.hpp"
#include "lm.hpp"
#include "prf.hpp"
#include "text.hpp"

namespace wmlab {

struct DetectionResult {
  double score = 0.0;       // normalized so larger means more watermark evidence
  double threshold = 0.0;   // significance level instead when a p-value decides
  bool is_watermarked = false;
  std::optional<double> p_value;
};

// Per-token statistics. Each is centered so that larger means more
// watermark-consistent; null moments are listed with the z-score helpers.

inline double stat_green(TokenId x, std::span<const TokenId> green) {
  return std::binary_search(green.begin(), green.end(), x) ? 1.0 : 0.0;
}

inline double stat_exp(TokenId x, std::span<const double> r) {
  if (x >= r.size()) raise(Errc::invalid_token_id, "token outside r vector");
  return -std::log(1.0 - r[x]);
}

// Distance between the step's uniform draw and the token's normalized rank in
// the key-fixed order, negated. Null mean -1/3, variance 1/18 for uniform rank.
inline double stat_its(TokenId x, double u, std::span<const std::size_t> rank_of) {
  if (x >= rank_of.size()) raise(Errc::invalid_token_id, "token outside order");
  double denom = rank_of.size() > 1 ? static_cast<double>(rank_of.size() - 1) : 1.0;
  double eta = static_cast<double>(rank_of[x]) / denom;
  return -std::abs(u - eta);
}

inline double sum_score(std::span<const double> stats) {
  double s = 0.0;
  for (double v : stats) s += v;
  return s;
}

inline double z_score(double sum, std::size_t n, double null_mean, double null_var) {
  return (sum - static_cast<double>(n) * null_mean) /
         std::sqrt(static_cast<double>(n) * null_var);
}

inline double z_green(double sum, std::size_t n, double gamma) {
  return z_score(sum, n, gamma, gamma * (1.0 - gamma));
}

// Soft-alignment minimum cost over the full cost matrix: each text position
// may match a reference position (cost[i][j]), or either side is skipped at
// cost psi. Costs are negated per-token statistics, so smaller is stronger.
inline double edit_score(const std::vector<std::vector<double>>& cost, double psi) {
  const std::size_t n = cost.size();
  const std::size_t m = n ? cost[0].size() : 0;
  if (n == 0 || m == 0) raise(Errc::empty_text, "edit score needs both sequences");
  std::vector<double> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = psi * static_cast<double>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = psi * static_cast<double>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      double best = prev[j - 1] + cost[i - 1][j - 1];
      best = std::min(best, cur[j - 1] + psi);
      best = std::min(best, prev[j] + psi);
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Watermark seeds the detector recomputes at every position of the text.
inline std::vector<Seed> seeds_for(const TokenSeq& tokens, const ContextScheme& scheme,
                                   const SecretKey& key, TokenId bos_id) {
  std::vector<Seed> seeds(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    seeds[i] = derive_seed(scheme, key, tokens, i, bos_id);
  return seeds;
}

namespace detail {

struct NullMoments {
  double mean;
  double var;
};

inline NullMoments null_moments(TokenStat stat, double gamma) {
  switch (stat) {
    case TokenStat::green: return {gamma, gamma * (1.0 - gamma)};
    case TokenStat::exp: return {1.0, 1.0};
    case TokenStat::its: return {-1.0 / 3.0, 1.0 / 18.0};
  }
  raise(Errc::invalid_argument, "bad stat");
}

// Everything needed to evaluate one per-token statistic under any seed.
class StatTable {
 public:
  StatTable(TokenStat stat, const SchemeConfig& cfg, const SecretKey& key,
            const std::vector<Seed>& seeds, std::size_t d)
      : stat_(stat), gamma_(cfg.gamma), d_(d), seeds_(seeds) {
    if (stat == TokenStat::green) {
      greens_.reserve(seeds.size());
      for (Seed s : seeds) greens_.push_back(green_set(s, gamma_, d));
    } else if (stat == TokenStat::its) {
      std::vector<TokenId> order = key_permutation(key, d);
      rank_of_.assign(d, 0);
      for (std::size_t r = 0; r < order.size(); ++r) rank_of_[order[r]] = r;
      us_.reserve(seeds.size());
      for (Seed s : seeds) us_.push_back(rand_unit(s, 0));
    }
  }

  // Statistic of token x evaluated against the seed at reference index j.
  double value(TokenId x, std::size_t j) const {
    switch (stat_) {
      case TokenStat::green: return stat_green(x, greens_[j]);
      case TokenStat::exp: {
        if (x >= d_) raise(Errc::invalid_token_id, "token id out of range");
        return -std::log(1.0 - rand_unit(seeds_[j], x));
      }
      case TokenStat::its: return stat_its(x, us_[j], rank_of_);
    }
    raise(Errc::invalid_argument, "bad stat");
  }

 private:
  TokenStat stat_;
  double gamma_;
  std::size_t d_;
  const std::vector<Seed>& seeds_;
  std::vector<std::vector<TokenId>> greens_;
  std::vector<std::size_t> rank_of_;
  std::vector<double> us_;
};

}  // namespace detail

// Raw detection score for a token sequence under a scheme. All kinds return
// a value where larger means more watermark evidence; sum kinds return the
// z-normalized sum, edit_score a z-normalized alignment score, llr the raw
// log-likelihood-ratio sum and entropy_weighted_green the weighted z.
inline double detection_score(const TokenSeq& tokens, const SchemeConfig& cfg,
                              const SecretKey& key, const Vocabulary& vocab,
                              const NgramModel* model = nullptr) {
  if (tokens.empty()) raise(Errc::empty_text, "detection needs at least one token");
  const std::size_t n = tokens.size();
  const std::size_t d = vocab.size();
  for (TokenId x : tokens)
    if (x >= d) raise(Errc::invalid_token_id, "token id out of range");
  std::vector<Seed> seeds = seeds_for(tokens, cfg.context, key, vocab.bos_id());

  switch (cfg.detector) {
    case DetectorKind::sum_green: {
      detail::StatTable table(TokenStat::green, cfg, key, seeds, d);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += table.value(tokens[i], i);
      return z_green(s, n, cfg.gamma);
    }
    case DetectorKind::sum_exp: {
      detail::StatTable table(TokenStat::exp, cfg, key, seeds, d);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += table.value(tokens[i], i);
      return z_score(s, n, 1.0, 1.0);
    }
    case DetectorKind::sum_its: {
      detail::StatTable table(TokenStat::its, cfg, key, seeds, d);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += table.value(tokens[i], i);
      return z_score(s, n, -1.0 / 3.0, 1.0 / 18.0);
    }
    case DetectorKind::edit_score: {
      TokenStat stat = default_stat_for(cfg.strategy);
      detail::StatTable table(stat, cfg, key, seeds, d);
      std::vector<std::vector<double>> cost(n, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i][j] = -table.value(tokens[i], j);
      double e = edit_score(cost, cfg.psi);
      auto mom = detail::null_moments(stat, cfg.gamma);
      return z_score(-e, n, mom.mean, mom.var);
    }
    case DetectorKind::llr: {
      if (!model) raise(Errc::model_required, "llr needs the language model");
      double s = 0.0;
      TokenSeq context;
      for (std::size_t i = 0; i < n; ++i) {
        Distribution p = model->next_dist(context, cfg.tau);
        Distribution q = perturbed_dist(p, cfg, seeds[i]);
        double num = q.probs[tokens[i]];
        double den = p.probs[tokens[i]];
        double term = (num > 0.0 && den > 0.0) ? std::log(num / den) : -30.0;
        s += std::max(term, -30.0);
        context.push_back(tokens[i]);
      }
      return s;
    }
    case DetectorKind::entropy_weighted_green: {
      if (!model) raise(Errc::model_required, "entropy weighting needs the language model");
      detail::StatTable table(TokenStat::green, cfg, key, seeds, d);
      double hw = 0.0, hw2 = 0.0, s = 0.0;
      TokenSeq context;
      for (std::size_t i = 0; i < n; ++i) {
        double h = entropy(model->next_dist(context, cfg.tau));
        hw += h;
        hw2 += h * h;
        s += h * table.value(tokens[i], i);
        context.push_back(tokens[i]);
      }
      if (hw <= 0.0) raise(Errc::zero_entropy_text, "all positions have zero entropy");
      double weighted_mean = s / hw;
      double n_eff = hw * hw / hw2;
      return (weighted_mean - cfg.gamma) * std::sqrt(n_eff / (cfg.gamma * (1.0 - cfg.gamma)));
    }
  }
  raise(Errc::invalid_argument, "bad detector kind");
}

// Permutation-test p-value: the observed score's rank among scores of the
// same text under n_rand fresh reference keys, with add-one smoothing.
inline double permutation_test_pvalue(double observed, const TokenSeq& tokens,
                                      const SchemeConfig& cfg, const SecretKey& key,
                                      const Vocabulary& vocab,
                                      const NgramModel* model = nullptr) {
  if (cfg.n_rand == 0) raise(Errc::invalid_argument, "n_rand must be positive");
  std::uint32_t at_least = 0;
  std::vector<std::uint8_t> msg;
  for (std::uint32_t i = 0; i < cfg.n_rand; ++i) {
    msg.clear();
    msg.push_back(0x54);  // 'T'
    detail::append_le32(msg, i);
    msg.push_back(0);
    std::uint64_t lo = prf64(key, msg).value;
    msg.back() = 1;
    std::uint64_t hi = prf64(key, msg).value;
    SecretKey ref = SecretKey::from_u64(lo, hi);
    if (detection_score(tokens, cfg, ref, vocab, model) >= observed) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + static_cast<double>(cfg.n_rand));
}

// Threshold that flags at most target_fpr of the given null scores, placed
// just above the relevant order statistic so ties fall on the null side.
inline double calibrate_threshold(std::vector<double> null_scores, double target_fpr,
                                  bool higher_is_watermarked = true) {
  if (null_scores.size() < 100)
    raise(Errc::insufficient_nulls, "need at least 100 null scores, got " +
                                        std::to_string(null_scores.size()));
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    raise(Errc::invalid_argument, "target_fpr must be in (0, 1)");
  std::size_t k = static_cast<std::size_t>(target_fpr * static_cast<double>(null_scores.size()));
  if (higher_is_watermarked) {
    std::sort(null_scores.begin(), null_scores.end(), std::greater<>());
    return std::nextafter(null_scores[k], std::numeric_limits<double>::infinity());
  }
  std::sort(null_scores.begin(), null_scores.end());
  return std::nextafter(null_scores[k], -std::numeric_limits<double>::infinity());
}

// Full detection decision. When cfg.permutation_test is set, `threshold` is
// read as the significance level and the p-value decides; otherwise the
// score is compared against it directly.
inline DetectionResult detect(const TokenSeq& tokens, const SchemeConfig& cfg,
                              const SecretKey& key, double threshold, const Vocabulary& vocab,
                              const NgramModel* model = nullptr) {
  DetectionResult r;
  r.score = detection_score(tokens, cfg, key, vocab, model);
  r.threshold = threshold;
  if (cfg.permutation_test) {
    r.p_value = permutation_test_pvalue(r.score, tokens, cfg, key, vocab, model);
    r.is_watermarked = *r.p_value <= threshold;
  } else {
    r.is_watermarked = r.score >= threshold;
  }
  return r;
}

}  // namespace wmlab
