#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "prf.hpp"
#include "text.hpp"

namespace wmlab {

struct Temperature {
  double value = 1.0;
};

// Probability vector over the full vocabulary, indexed by token id.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }

  bool valid(double tol = 1e-9) const {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }
};

// Shannon entropy in nats, skipping zero-mass entries.
inline double entropy(const Distribution& p) {
  double h = 0.0;
  for (double q : p.probs)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

// Order-n count model with additive smoothing over a closed vocabulary.
// Contexts shorter than n-1 tokens are left-padded with <bos>.
class NgramModel {
 public:
  static NgramModel train(const std::vector<TokenSeq>& corpus, std::size_t order, double alpha,
                          Vocabulary vocab) {
    if (order < 1) raise(Errc::invalid_argument, "order must be >= 1");
    if (!(alpha > 0.0)) raise(Errc::invalid_argument, "alpha must be positive");
    bool any = false;
    for (const auto& doc : corpus)
      if (!doc.empty()) any = true;
    if (!any) raise(Errc::empty_corpus, "no training tokens");

    NgramModel m;
    m.order_ = order;
    m.alpha_ = alpha;
    m.vocab_ = std::move(vocab);
    const std::size_t ctx_len = order - 1;
    for (const auto& doc : corpus) {
      for (std::size_t t = 0; t < doc.size(); ++t) {
        TokenSeq ctx = m.context_at(doc, t, ctx_len);
        auto& counts = m.counts_[ctx];
        if (counts.empty()) counts.resize(m.vocab_.size(), 0);
        ++counts[doc[t]];
      }
    }
    return m;
  }

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Smoothed next-token distribution for the context, tempered by tau:
  // probabilities proportional to exp(log p / tau).
  Distribution next_dist(std::span<const TokenId> context, Temperature tau = {}) const {
    if (!(tau.value > 0.0)) raise(Errc::invalid_argument, "temperature must be positive");
    const std::size_t d = vocab_.size();
    TokenSeq ctx = context_tail(context, order_ - 1);
    Distribution out;
    out.probs.assign(d, 0.0);
    auto it = counts_.find(ctx);
    double denom = alpha_ * static_cast<double>(d);
    const std::vector<std::uint32_t>* counts = nullptr;
    if (it != counts_.end()) {
      counts = &it->second;
      for (std::uint32_t c : *counts) denom += c;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double c = counts ? static_cast<double>((*counts)[i]) : 0.0;
      out.probs[i] = (c + alpha_) / denom;
    }
    if (tau.value != 1.0) temper(out, tau.value);
    return out;
  }

  void save(std::ostream& os) const {
    os << "wmlab-ngram v1\n";
    os << "order " << order_ << "\n";
    os << "alpha " << format_double(alpha_) << "\n";
    os << "vocab " << vocab_.size() << "\n";
    for (std::size_t i = 0; i < vocab_.size(); ++i)
      os << vocab_.surface_of(static_cast<TokenId>(i)) << "\n";
    os << "contexts " << counts_.size() << "\n";
    for (const auto& [ctx, counts] : counts_) {
      for (std::size_t i = 0; i < ctx.size(); ++i) os << (i ? " " : "") << ctx[i];
      os << " :";
      for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i]) os << " " << i << "=" << counts[i];
      os << "\n";
    }
    if (!os) raise(Errc::io_error, "model write failed");
  }

  static NgramModel load(std::istream& is) {
    auto fail = [](const std::string& what) { raise(Errc::io_error, "model load: " + what); };
    std::string line;
    if (!std::getline(is, line) || line != "wmlab-ngram v1") fail("bad header");
    NgramModel m;
    std::size_t d = 0, nctx = 0;
    std::string word;
    if (!(is >> word >> m.order_) || word != "order") fail("bad order");
    if (!(is >> word >> m.alpha_) || word != "alpha") fail("bad alpha");
    if (!(is >> word >> d) || word != "vocab") fail("bad vocab size");
    is.ignore();
    std::string corpus_text;
    std::vector<std::string> surfaces(d);
    for (auto& s : surfaces)
      if (!std::getline(is, s)) fail("truncated vocab");
    // Rebuild the vocabulary from its surface list; the two sentinels are the
    // final entries by construction.
    if (d < 2) fail("vocab too small");
    for (std::size_t i = 0; i + 2 < d; ++i) corpus_text += surfaces[i] + " ";
    if (corpus_text.empty()) fail("vocab too small");
    m.vocab_ = Vocabulary::build(corpus_text);
    if (m.vocab_.size() != d) fail("vocab mismatch");
    if (!(is >> word >> nctx) || word != "contexts") fail("bad context count");
    is.ignore();
    for (std::size_t k = 0; k < nctx; ++k) {
      if (!std::getline(is, line)) fail("truncated contexts");
      std::istringstream ls(line);
      TokenSeq ctx;
      std::string tok;
      while (ls >> tok && tok != ":") ctx.push_back(static_cast<TokenId>(std::stoul(tok)));
      auto& counts = m.counts_[ctx];
      counts.assign(d, 0);
      while (ls >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) fail("bad count entry");
        std::size_t id = std::stoul(tok.substr(0, eq));
        if (id >= d) fail("count id out of range");
        counts[id] = static_cast<std::uint32_t>(std::stoul(tok.substr(eq + 1)));
      }
    }
    return m;
  }

 private:
  TokenSeq context_at(const TokenSeq& doc, std::size_t t, std::size_t ctx_len) const {
    TokenSeq ctx;
    ctx.reserve(ctx_len);
    for (std::int64_t idx = static_cast<std::int64_t>(t) - static_cast<std::int64_t>(ctx_len);
         idx < static_cast<std::int64_t>(t); ++idx)
      ctx.push_back(idx < 0 ? vocab_.bos_id() : doc[static_cast<std::size_t>(idx)]);
    return ctx;
  }

  TokenSeq context_tail(std::span<const TokenId> context, std::size_t ctx_len) const {
    TokenSeq ctx;
    ctx.reserve(ctx_len);
    for (std::int64_t idx = static_cast<std::int64_t>(context.size()) -
                            static_cast<std::int64_t>(ctx_len);
         idx < static_cast<std::int64_t>(context.size()); ++idx)
      ctx.push_back(idx < 0 ? vocab_.bos_id() : context[static_cast<std::size_t>(idx)]);
    return ctx;
  }

  static void temper(Distribution& p, double tau) {
    double sum = 0.0;
    for (double& q : p.probs) {
      q = q > 0.0 ? std::exp(std::log(q) / tau) : 0.0;
      sum += q;
    }
    for (double& q : p.probs) q /= sum;
  }

  static std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  std::size_t order_ = 1;
  double alpha_ = 1.0;
  Vocabulary vocab_;
  std::map<TokenSeq, std::vector<std::uint32_t>> counts_;
};

// Samples an unwatermarked continuation by inverse-CDF over ascending ids.
inline TokenSeq sample_plain(const NgramModel& m, const TokenSeq& prompt, std::size_t max_len,
                             Temperature tau, SeededStream& rng) {
  TokenSeq out;
  out.reserve(max_len);
  TokenSeq context = prompt;
  for (std::size_t t = 0; t < max_len; ++t) {
    Distribution p = m.next_dist(context, tau);
    double u = rng.next_unit();
    double cum = 0.0;
    TokenId pick = 0;
    bool found = false;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
      if (p.probs[i] <= 0.0) continue;
      cum += p.probs[i];
      pick = static_cast<TokenId>(i);
      if (cum >= u) {
        found = true;
        break;
      }
    }
    (void)found;
    out.push_back(pick);
    context.push_back(pick);
  }
  return out;
}

}  // namespace wmlab
