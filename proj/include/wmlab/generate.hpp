#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "lm.hpp"
#include "prf.hpp"
#include "text.hpp"

namespace wmlab {

// How the sampling distribution is perturbed at each step.
enum class Strategy {
  shift,           // green-list logit boost
  reweight_delta,  // delta-reweight: collapse mass onto one seeded token
  reweight_gamma,  // gamma-reweight: g(x) = max(0, 2x - 1) over a seeded order
  transform_exp,   // exponential-minimum sampling via a seeded uniform vector
  transform_its,   // inverse transform sampling over a key-fixed order
};

// Which detection statistic a scheme is scored with.
enum class DetectorKind {
  sum_green,
  sum_exp,
  sum_its,
  edit_score,
  llr,
  entropy_weighted_green,
};

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::shift: return "shift";
    case Strategy::reweight_delta: return "reweight_delta";
    case Strategy::reweight_gamma: return "reweight_gamma";
    case Strategy::transform_exp: return "transform_exp";
    case Strategy::transform_its: return "transform_its";
  }
  return "unknown";
}

inline const char* to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::sum_green: return "sum_green";
    case DetectorKind::sum_exp: return "sum_exp";
    case DetectorKind::sum_its: return "sum_its";
    case DetectorKind::edit_score: return "edit_score";
    case DetectorKind::llr: return "llr";
    case DetectorKind::entropy_weighted_green: return "entropy_weighted_green";
  }
  return "unknown";
}

// Full description of one watermarking scheme: context derivation, sampling
// perturbation, and the detector it is scored with.
struct SchemeConfig {
  ContextScheme context = ContextScheme::min_hash(1);
  Strategy strategy = Strategy::shift;
  DetectorKind detector = DetectorKind::sum_green;
  double gamma = 0.25;            // green-list fraction (shift family)
  double delta = 2.0;             // logit boost (shift family)
  double psi = 1.0;               // insertion/deletion cost for edit_score
  std::uint32_t n_rand = 50;      // reference keys for the permutation test
  bool permutation_test = false;  // detect() decides via p-value when set
  Temperature tau{1.0};

  // Soft shift with a small one-token window, scored by green-token count.
  static SchemeConfig tgrl() { return {}; }

  // Context-free global green list.
  static SchemeConfig ug() {
    SchemeConfig c;
    c.context = ContextScheme::context_free();
    c.gamma = 0.5;
    return c;
  }

  // Exponential-minimum transform over a three-token window.
  static SchemeConfig go() {
    SchemeConfig c;
    c.context = ContextScheme::window_hash(3);
    c.strategy = Strategy::transform_exp;
    c.detector = DetectorKind::sum_exp;
    return c;
  }

  // Index-keyed exponential transform, detected by edit score with a
  // permutation-test p-value.
  static SchemeConfig rdf_exp() {
    SchemeConfig c;
    c.context = ContextScheme::index_dependent();
    c.strategy = Strategy::transform_exp;
    c.detector = DetectorKind::edit_score;
    c.permutation_test = true;
    return c;
  }

  // Index-keyed inverse transform sampling, same detector family.
  static SchemeConfig rdf_its() {
    SchemeConfig c;
    c.context = ContextScheme::index_dependent();
    c.strategy = Strategy::transform_its;
    c.detector = DetectorKind::edit_score;
    c.permutation_test = true;
    return c;
  }

  // Unbiased delta-reweighting with log-likelihood-ratio detection.
  static SchemeConfig ub_delta() {
    SchemeConfig c;
    c.context = ContextScheme::window_hash(1);
    c.strategy = Strategy::reweight_delta;
    c.detector = DetectorKind::llr;
    return c;
  }

  static SchemeConfig ub_gamma() {
    SchemeConfig c = ub_delta();
    c.strategy = Strategy::reweight_gamma;
    return c;
  }

  // Shift generation scored with entropy-weighted green counts.
  static SchemeConfig tgrl_ewd() {
    SchemeConfig c;
    c.detector = DetectorKind::entropy_weighted_green;
    return c;
  }
};

// Per-token statistic each strategy naturally pairs with; used by edit_score
// to pick its cell statistic.
enum class TokenStat { green, exp, its };

inline TokenStat default_stat_for(Strategy s) {
  switch (s) {
    case Strategy::transform_exp: return TokenStat::exp;
    case Strategy::transform_its: return TokenStat::its;
    default: return TokenStat::green;
  }
}

// First floor(gamma * d) entries of the seeded permutation, sorted ascending.
inline std::vector<TokenId> green_set(Seed seed, double gamma, std::size_t d) {
  std::size_t k = static_cast<std::size_t>(gamma * static_cast<double>(d));
  if (k == 0 || k >= d)
    raise(Errc::degenerate_green_list, "green size " + std::to_string(k) + " of " + std::to_string(d));
  std::vector<TokenId> p = permutation(seed, d);
  p.resize(k);
  std::sort(p.begin(), p.end());
  return p;
}

inline std::vector<double> apply_shift(std::vector<double> logits,
                                       std::span<const TokenId> green, double delta) {
  for (TokenId id : green) {
    if (id >= logits.size()) raise(Errc::invalid_token_id, "green id out of range");
    logits[id] += delta;
  }
  return logits;
}

inline Distribution softmax(std::span<const double> logits) {
  Distribution out;
  out.probs.resize(logits.size());
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp(logits[i] - mx);
    sum += out.probs[i];
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

namespace detail {

// Inverse-CDF selection over ascending token id; the final positive-mass
// token absorbs any floating-point shortfall in the accumulated sum.
inline TokenId sample_inverse_cdf(std::span<const double> probs, double u) {
  double cum = 0.0;
  TokenId pick = 0;
  bool seen = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    pick = static_cast<TokenId>(i);
    seen = true;
    if (cum >= u) return pick;
  }
  if (!seen) raise(Errc::empty_support, "no positive-mass token");
  return pick;
}

}  // namespace detail

// Collapses all mass onto the token the seeded uniform selects through the
// inverse CDF. Expectation over the seed equals the input distribution.
inline Distribution reweight_delta(const Distribution& p, Seed seed) {
  double u = rand_unit(seed, 0);
  TokenId pick = detail::sample_inverse_cdf(p.probs, u);
  Distribution out;
  out.probs.assign(p.probs.size(), 0.0);
  out.probs[pick] = 1.0;
  return out;
}

// Gamma-reweighting along an explicit token order: with F_j the cumulative
// mass after the j-th ordered token and g(x) = max(0, 2x - 1), the ordered
// token j receives g(F_j) - g(F_{j-1}).
inline Distribution reweight_gamma(const Distribution& p, std::span<const TokenId> order) {
  if (order.size() != p.probs.size()) raise(Errc::invalid_argument, "order size mismatch");
  Distribution out;
  out.probs.assign(p.probs.size(), 0.0);
  double f = 0.0;
  double g_prev = 0.0;
  for (TokenId id : order) {
    if (id >= p.probs.size()) raise(Errc::invalid_token_id, "order id out of range");
    f += p.probs[id];
    double g = std::max(0.0, 2.0 * f - 1.0);
    out.probs[id] = std::max(0.0, g - g_prev);
    g_prev = g;
  }
  return out;
}

inline Distribution reweight_gamma(const Distribution& p, Seed seed) {
  std::vector<TokenId> order = permutation(seed, p.probs.size());
  return reweight_gamma(p, order);
}

// Exponential-minimum trick: argmax over the support of r_i^(1/p_i), with
// ties broken toward the smallest token id.
inline TokenId sample_exp_transform(const Distribution& p, std::span<const double> r) {
  if (r.size() != p.probs.size()) raise(Errc::invalid_argument, "r size mismatch");
  bool seen = false;
  TokenId best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    if (p.probs[i] <= 0.0) continue;
    double score = std::log(r[i]) / p.probs[i];
    if (!seen || score > best_score) {
      seen = true;
      best = static_cast<TokenId>(i);
      best_score = score;
    }
  }
  if (!seen) raise(Errc::empty_support, "no positive-mass token");
  return best;
}

// Inverse transform sampling along a fixed order: first ordered token whose
// cumulative mass reaches u.
inline TokenId sample_inverse_transform(const Distribution& p, double u,
                                        std::span<const TokenId> order) {
  if (order.size() != p.probs.size()) raise(Errc::invalid_argument, "order size mismatch");
  double cum = 0.0;
  TokenId pick = 0;
  bool seen = false;
  for (TokenId id : order) {
    if (id >= p.probs.size()) raise(Errc::invalid_token_id, "order id out of range");
    if (p.probs[id] <= 0.0) continue;
    cum += p.probs[id];
    pick = id;
    seen = true;
    if (cum >= u) return pick;
  }
  if (!seen) raise(Errc::empty_support, "no positive-mass token");
  return pick;
}

// Token order used by transform_its, fixed by the key alone so the detector
// can reconstruct it without the text.
inline std::vector<TokenId> key_permutation(const SecretKey& key, std::size_t d) {
  static constexpr std::uint8_t tag[5] = {0x69, 0x74, 0x73, 0x2d, 0x6b};  // "its-k"
  Seed s = prf64(key, tag);
  return permutation(s, d);
}

// Watermarked generation. Watermark seeds are derived from the generated
// tokens only (never the prompt), so detection can recompute them from the
// text alone; the prompt conditions just the language model. The shift and
// reweight strategies sample from a perturbed distribution, so their draw
// counter includes the step index: the watermark seed can repeat across
// steps (context_free, short windows) and must not freeze the sampler.
// Transform draws stay purely seed-derived because detection recomputes
// them.
inline TokenSeq generate_text(const NgramModel& m, const TokenSeq& prompt,
                              const SchemeConfig& cfg, const SecretKey& key,
                              std::size_t max_len) {
  const std::size_t d = m.vocab().size();
  const TokenId bos = m.vocab().bos_id();
  std::vector<TokenId> its_order;
  if (cfg.strategy == Strategy::transform_its) its_order = key_permutation(key, d);

  TokenSeq out;
  out.reserve(max_len);
  TokenSeq context = prompt;
  for (std::size_t t = 0; t < max_len; ++t) {
    Distribution p = m.next_dist(context, cfg.tau);
    Seed seed = derive_seed(cfg.context, key, out, t, bos);
    TokenId x = 0;
    switch (cfg.strategy) {
      case Strategy::shift: {
        std::vector<TokenId> green = green_set(seed, cfg.gamma, d);
        std::vector<double> logits(d);
        for (std::size_t i = 0; i < d; ++i)
          logits[i] = p.probs[i] > 0.0 ? std::log(p.probs[i]) : -1e30;
        Distribution q = softmax(apply_shift(std::move(logits), green, cfg.delta));
        x = detail::sample_inverse_cdf(q.probs, rand_unit(seed, 1 + t));
        break;
      }
      case Strategy::reweight_delta: {
        Distribution q = reweight_delta(p, seed);
        x = detail::sample_inverse_cdf(q.probs, rand_unit(seed, 1 + t));
        break;
      }
      case Strategy::reweight_gamma: {
        Distribution q = reweight_gamma(p, seed);
        x = detail::sample_inverse_cdf(q.probs, rand_unit(seed, 1 + t));
        break;
      }
      case Strategy::transform_exp: {
        std::vector<double> r = rand_vector(seed, d);
        x = sample_exp_transform(p, r);
        break;
      }
      case Strategy::transform_its: {
        x = sample_inverse_transform(p, rand_unit(seed, 0), its_order);
        break;
      }
    }
    out.push_back(x);
    context.push_back(x);
  }
  return out;
}

// The perturbed distribution a scheme induces at one step, for strategies
// where it exists in closed form. Used by likelihood-ratio detection.
inline Distribution perturbed_dist(const Distribution& p, const SchemeConfig& cfg, Seed seed) {
  switch (cfg.strategy) {
    case Strategy::shift: {
      std::vector<TokenId> green = green_set(seed, cfg.gamma, p.probs.size());
      std::vector<double> logits(p.probs.size());
      for (std::size_t i = 0; i < p.probs.size(); ++i)
        logits[i] = p.probs[i] > 0.0 ? std::log(p.probs[i]) : -1e30;
      return softmax(apply_shift(std::move(logits), green, cfg.delta));
    }
    case Strategy::reweight_delta:
      return reweight_delta(p, seed);
    case Strategy::reweight_gamma:
      return reweight_gamma(p, seed);
    default:
      raise(Errc::invalid_argument, "no closed-form perturbed distribution for transform strategies");
  }
}

}  // namespace wmlab
