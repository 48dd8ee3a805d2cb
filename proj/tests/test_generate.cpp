#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "support.hpp"
#include "wmlab/generate.hpp"

using namespace wmlab;

TEST_CASE("green_set has floor(gamma d) sorted distinct members") {
  Seed s{12345};
  auto g = green_set(s, 0.25, 50);
  REQUIRE(g.size() == 12);
  REQUIRE(std::is_sorted(g.begin(), g.end()));
  std::set<TokenId> uniq(g.begin(), g.end());
  REQUIRE(uniq.size() == g.size());
  for (TokenId id : g) REQUIRE(id < 50);

  auto p = permutation(s, 50);
  std::vector<TokenId> expect(p.begin(), p.begin() + 12);
  std::sort(expect.begin(), expect.end());
  REQUIRE(g == expect);
}

TEST_CASE("green_set rejects degenerate sizes") {
  CHECK_THROWS_AS(green_set(Seed{1}, 0.05, 10), Error);  // k = 0
  CHECK_THROWS_AS(green_set(Seed{1}, 1.0, 10), Error);   // k = d
  CHECK_NOTHROW(green_set(Seed{1}, 0.1, 10));
}

TEST_CASE("apply_shift plus softmax matches the closed form") {
  std::vector<double> logits(4, 0.0);
  std::vector<TokenId> green = {1, 3};
  Distribution q = softmax(apply_shift(logits, green, 2.0));
  double e2 = std::exp(2.0);
  double denom = 2.0 * e2 + 2.0;
  CHECK(q.probs[0] == Catch::Approx(1.0 / denom));
  CHECK(q.probs[1] == Catch::Approx(e2 / denom));
  CHECK(q.probs[2] == Catch::Approx(1.0 / denom));
  CHECK(q.probs[3] == Catch::Approx(e2 / denom));
}

TEST_CASE("softmax is translation invariant and valid") {
  std::vector<double> a = {1.0, 2.0, 3.0};
  std::vector<double> b = {101.0, 102.0, 103.0};
  Distribution pa = softmax(a), pb = softmax(b);
  REQUIRE(pa.valid());
  for (std::size_t i = 0; i < 3; ++i) CHECK(pa.probs[i] == Catch::Approx(pb.probs[i]));
  std::vector<double> huge = {-1e30, 0.0, -1e30};
  Distribution ph = softmax(huge);
  CHECK(ph.probs[1] == Catch::Approx(1.0));
}

TEST_CASE("reweight_delta yields a one-hot matching the inverse CDF") {
  Distribution p{{0.2, 0.5, 0.3}};
  Seed s{99};
  Distribution q = reweight_delta(p, s);
  REQUIRE(q.valid());
  int ones = 0;
  TokenId hot = 0;
  for (std::size_t i = 0; i < q.probs.size(); ++i) {
    if (q.probs[i] == 1.0) {
      ++ones;
      hot = static_cast<TokenId>(i);
    } else {
      REQUIRE(q.probs[i] == 0.0);
    }
  }
  REQUIRE(ones == 1);
  double u = rand_unit(s, 0);
  double cum = 0.0;
  TokenId expect = 0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    cum += p.probs[i];
    expect = static_cast<TokenId>(i);
    if (cum >= u) break;
  }
  REQUIRE(hot == expect);
}

TEST_CASE("reweight_delta is unbiased over seeds") {
  Distribution p{{0.5, 0.3, 0.2}};
  std::vector<double> mean(3, 0.0);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    Distribution q = reweight_delta(p, Seed{static_cast<std::uint64_t>(k) * 2654435761u + 17});
    for (std::size_t i = 0; i < 3; ++i) mean[i] += q.probs[i];
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(mean[i] / n == Catch::Approx(p.probs[i]).margin(0.02));
}

TEST_CASE("reweight_gamma matches hand computation on two tokens") {
  Distribution p{{0.6, 0.4}};
  std::vector<TokenId> fwd = {0, 1};
  Distribution q = reweight_gamma(p, fwd);
  CHECK(q.probs[0] == Catch::Approx(0.2));
  CHECK(q.probs[1] == Catch::Approx(0.8));

  std::vector<TokenId> rev = {1, 0};
  Distribution r = reweight_gamma(p, rev);
  CHECK(r.probs[1] == Catch::Approx(0.0));
  CHECK(r.probs[0] == Catch::Approx(1.0));
}

TEST_CASE("reweight_gamma averaged over all orders recovers the input") {
  Distribution p{{0.5, 0.3, 0.2}};
  std::vector<TokenId> order = {0, 1, 2};
  std::vector<double> mean(3, 0.0);
  int count = 0;
  do {
    Distribution q = reweight_gamma(p, order);
    REQUIRE(q.valid());
    for (std::size_t i = 0; i < 3; ++i) mean[i] += q.probs[i];
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  REQUIRE(count == 6);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(mean[i] / 6 - p.probs[i]) < 1e-12);
}

TEST_CASE("reweight_gamma over random seeds stays near the input") {
  Distribution p{{0.4, 0.1, 0.25, 0.25}};
  std::vector<double> mean(4, 0.0);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    Distribution q = reweight_gamma(p, Seed{static_cast<std::uint64_t>(k) + 7});
    REQUIRE(q.valid());
    for (std::size_t i = 0; i < 4; ++i) mean[i] += q.probs[i];
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(mean[i] / n == Catch::Approx(p.probs[i]).margin(0.02));
}

TEST_CASE("reweight_gamma validates its order argument") {
  Distribution p{{0.5, 0.5}};
  std::vector<TokenId> bad_size = {0};
  CHECK_THROWS_AS(reweight_gamma(p, bad_size), Error);
  std::vector<TokenId> bad_id = {0, 9};
  CHECK_THROWS_AS(reweight_gamma(p, bad_id), Error);
}

TEST_CASE("exp transform picks the argmax of log(r)/p") {
  Distribution p{{0.5, 0.5}};
  std::vector<double> r = {0.25, 0.5};
  // log(0.25)/0.5 = -2.77 < log(0.5)/0.5 = -1.39
  CHECK(sample_exp_transform(p, r) == 1);
  std::vector<double> tie = {0.5, 0.5};
  CHECK(sample_exp_transform(p, tie) == 0);  // ties break to the smaller id
}

TEST_CASE("exp transform skips zero-mass tokens") {
  Distribution p{{0.0, 1.0, 0.0}};
  std::vector<double> r = {0.999, 0.001, 0.998};
  CHECK(sample_exp_transform(p, r) == 1);
}

TEST_CASE("exp transform selection frequencies follow the distribution") {
  Distribution p{{0.5, 0.3, 0.2}};
  std::vector<int> hits(3, 0);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    std::vector<double> r = rand_vector(Seed{static_cast<std::uint64_t>(k) + 1000}, 3);
    ++hits[sample_exp_transform(p, r)];
  }
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(static_cast<double>(hits[i]) / n == Catch::Approx(p.probs[i]).margin(0.02));
}

TEST_CASE("inverse transform walks the given order") {
  Distribution p{{0.2, 0.3, 0.5}};
  std::vector<TokenId> order = {2, 0, 1};
  CHECK(sample_inverse_transform(p, 0.4, order) == 2);   // cum 0.5 covers it
  CHECK(sample_inverse_transform(p, 0.6, order) == 0);   // 0.5 then 0.7
  CHECK(sample_inverse_transform(p, 0.99, order) == 1);  // tail
}

TEST_CASE("inverse transform skips zero-mass tokens and is unbiased") {
  Distribution p{{0.0, 0.4, 0.6}};
  std::vector<TokenId> order = {0, 2, 1};
  CHECK(sample_inverse_transform(p, 1e-12, order) == 2);

  std::vector<int> hits(3, 0);
  const int n = 20000;
  for (int k = 0; k < n; ++k)
    ++hits[sample_inverse_transform(p, rand_unit(Seed{static_cast<std::uint64_t>(k)}, 5), order)];
  CHECK(hits[0] == 0);
  CHECK(static_cast<double>(hits[1]) / n == Catch::Approx(0.4).margin(0.02));
  CHECK(static_cast<double>(hits[2]) / n == Catch::Approx(0.6).margin(0.02));
}

TEST_CASE("key_permutation is a key-fixed bijection") {
  SecretKey k1 = SecretKey::from_u64(1, 2);
  SecretKey k2 = SecretKey::from_u64(1, 3);
  auto p1 = key_permutation(k1, 40);
  auto p1b = key_permutation(k1, 40);
  auto p2 = key_permutation(k2, 40);
  REQUIRE(p1 == p1b);
  CHECK(p1 != p2);
  std::vector<TokenId> sorted = p1;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 40; ++i) REQUIRE(sorted[i] == i);
}

TEST_CASE("generate_text is deterministic and key sensitive") {
  support::Lab lab = support::make_lab(120);
  SecretKey key = SecretKey::from_u64(11, 22);
  SecretKey other = SecretKey::from_u64(11, 23);
  for (Strategy st : {Strategy::shift, Strategy::reweight_delta, Strategy::reweight_gamma,
                      Strategy::transform_exp, Strategy::transform_its}) {
    SchemeConfig cfg;
    cfg.strategy = st;
    cfg.gamma = 0.25;
    TokenSeq a = generate_text(lab.model, lab.prompts[0], cfg, key, 60);
    TokenSeq b = generate_text(lab.model, lab.prompts[0], cfg, key, 60);
    TokenSeq c = generate_text(lab.model, lab.prompts[0], cfg, other, 60);
    REQUIRE(a.size() == 60);
    REQUIRE(a == b);
    CHECK(a != c);
    for (TokenId t : a) REQUIRE(t < lab.vocab.size());
  }
}

TEST_CASE("shift generation lands in the green set far above gamma") {
  support::Lab lab = support::make_lab(120);
  SecretKey key = SecretKey::from_u64(5, 6);
  SchemeConfig cfg = SchemeConfig::tgrl();
  TokenSeq text = generate_text(lab.model, lab.prompts[1], cfg, key, 300);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < text.size(); ++t) {
    Seed s = derive_seed(cfg.context, key, std::span(text.data(), t), t, lab.vocab.bos_id());
    auto green = green_set(s, cfg.gamma, lab.vocab.size());
    if (std::binary_search(green.begin(), green.end(), text[t])) ++hits;
  }
  CHECK(static_cast<double>(hits) / text.size() > 0.40);
}

TEST_CASE("delta-reweight generation equals direct seeded inverse CDF") {
  support::Lab lab = support::make_lab(100);
  SecretKey key = SecretKey::from_u64(3, 9);
  SchemeConfig cfg = SchemeConfig::ub_delta();
  TokenSeq text = generate_text(lab.model, lab.prompts[2], cfg, key, 50);
  TokenSeq context = lab.prompts[2];
  for (std::size_t t = 0; t < text.size(); ++t) {
    Distribution p = lab.model.next_dist(context, cfg.tau);
    Seed s = derive_seed(cfg.context, key, std::span(text.data(), t), t, lab.vocab.bos_id());
    Distribution q = reweight_delta(p, s);
    REQUIRE(q.probs[text[t]] == 1.0);
    context.push_back(text[t]);
  }
}

TEST_CASE("perturbed_dist covers the reweight family and rejects transforms") {
  Distribution p{{0.5, 0.3, 0.2}};
  SchemeConfig cfg;
  cfg.strategy = Strategy::reweight_delta;
  Distribution qa = perturbed_dist(p, cfg, Seed{4});
  REQUIRE(qa.probs == reweight_delta(p, Seed{4}).probs);
  cfg.strategy = Strategy::reweight_gamma;
  Distribution qb = perturbed_dist(p, cfg, Seed{4});
  REQUIRE(qb.probs == reweight_gamma(p, Seed{4}).probs);
  cfg.strategy = Strategy::transform_exp;
  CHECK_THROWS_AS(perturbed_dist(p, cfg, Seed{4}), Error);
  cfg.strategy = Strategy::transform_its;
  CHECK_THROWS_AS(perturbed_dist(p, cfg, Seed{4}), Error);
}

TEST_CASE("perturbed_dist for shift boosts exactly the green tokens") {
  Distribution p{{0.25, 0.25, 0.25, 0.25}};
  SchemeConfig cfg;
  cfg.strategy = Strategy::shift;
  cfg.gamma = 0.5;
  cfg.delta = 2.0;
  Seed s{77};
  Distribution q = perturbed_dist(p, cfg, s);
  auto green = green_set(s, 0.5, 4);
  double e2 = std::exp(2.0);
  double denom = 2.0 * e2 + 2.0;
  for (TokenId i = 0; i < 4; ++i) {
    bool g = std::binary_search(green.begin(), green.end(), i);
    CHECK(q.probs[i] == Catch::Approx(g ? e2 / denom : 1.0 / denom));
  }
}

TEST_CASE("samplers reject empty support") {
  Distribution dead{{0.0, 0.0}};
  std::vector<double> r = {0.5, 0.5};
  CHECK_THROWS_AS(sample_exp_transform(dead, r), Error);
  std::vector<TokenId> order = {0, 1};
  CHECK_THROWS_AS(sample_inverse_transform(dead, 0.5, order), Error);
  CHECK_THROWS_AS(reweight_delta(dead, Seed{1}), Error);
}
