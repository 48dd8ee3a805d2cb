// Command-line front end: generate / detect / attack / bench.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <wmlab/paraphrase.hpp>
#include <wmlab/wmlab.hpp>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) wmlab::raise(wmlab::Errc::file_not_found, path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct ModelBundle {
  wmlab::Vocabulary vocab;
  wmlab::NgramModel model;
};

ModelBundle build_model(const std::string& corpus_path, std::size_t order, double alpha) {
  std::string text = read_file(corpus_path);
  wmlab::Vocabulary vocab = wmlab::Vocabulary::build(text);
  std::vector<wmlab::TokenSeq> docs;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) docs.push_back(vocab.tokenize(line));
  wmlab::NgramModel model = wmlab::NgramModel::train(docs, order, alpha, vocab);
  return {std::move(vocab), std::move(model)};
}

wmlab::SchemeConfig scheme_from_flags(const std::string& preset, double gamma, double delta,
                                      double tau, double psi) {
  wmlab::SchemeConfig cfg = wmlab::scheme_preset(preset);
  if (gamma > 0.0) cfg.gamma = gamma;
  if (delta >= 0.0) cfg.delta = delta;
  if (tau > 0.0) cfg.tau = wmlab::Temperature{tau};
  if (psi > 0.0) cfg.psi = psi;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"text watermarking laboratory"};
  app.require_subcommand(1);

  std::string corpus, preset = "tgrl", key_hex(32, '0'), prompt, in_path, text_arg, out_path;
  std::string kind, cover_path, data_dir = "data", endpoint, config_path, format = "csv";
  std::size_t order = 2, gen_len = 100;
  double alpha = 0.1, gamma = -1.0, delta = -1.0, tau = -1.0, psi = -1.0, threshold = 4.0;
  double rate = 0.3, percent = 50.0;
  std::uint32_t count = 1, segments = 1;
  std::uint64_t attack_seed = 0, master_seed = 0;
  std::size_t workers = 0;
  bool use_pvalue = false;
  bool has_master_seed = false, has_workers = false;

  auto* gen = app.add_subcommand("generate", "sample a watermarked continuation");
  gen->add_option("--corpus", corpus, "training corpus file")->required();
  gen->add_option("--scheme", preset, "scheme preset name");
  gen->add_option("--key", key_hex, "32-hex-char watermark key");
  gen->add_option("--prompt", prompt, "prompt text");
  gen->add_option("--len", gen_len, "tokens to generate");
  gen->add_option("--order", order, "n-gram order");
  gen->add_option("--alpha", alpha, "additive smoothing");
  gen->add_option("--gamma", gamma, "green-list fraction override");
  gen->add_option("--delta", delta, "logit boost override");
  gen->add_option("--tau", tau, "sampling temperature override");
  gen->add_option("--out", out_path, "write text here instead of stdout");

  auto* det = app.add_subcommand("detect", "score a text for the watermark");
  det->add_option("--corpus", corpus, "training corpus file")->required();
  det->add_option("--scheme", preset, "scheme preset name");
  det->add_option("--key", key_hex, "32-hex-char watermark key");
  det->add_option("--in", in_path, "text file to score");
  det->add_option("--text", text_arg, "literal text to score");
  det->add_option("--threshold", threshold, "decision threshold (or p-value level)");
  det->add_flag("--pvalue", use_pvalue, "decide via permutation-test p-value");
  det->add_option("--order", order, "n-gram order");
  det->add_option("--alpha", alpha, "additive smoothing");
  det->add_option("--gamma", gamma, "green-list fraction override");
  det->add_option("--delta", delta, "logit boost override");
  det->add_option("--tau", tau, "temperature override");
  det->add_option("--psi", psi, "edit-score gap cost override");

  auto* att = app.add_subcommand("attack", "perturb a text");
  att->add_option("--kind", kind, "attack kind")->required();
  att->add_option("--in", in_path, "text file to attack");
  att->add_option("--text", text_arg, "literal text to attack");
  att->add_option("--rate", rate, "fraction of eligible words");
  att->add_option("--count", count, "swap pairs");
  att->add_option("--segments", segments, "copy-paste segments");
  att->add_option("--percent", percent, "copy-paste segment percent");
  att->add_option("--seed", attack_seed, "attack randomness seed");
  att->add_option("--cover", cover_path, "cover text file for copy_paste");
  att->add_option("--data", data_dir, "resource table directory");
  att->add_option("--endpoint", endpoint, "external paraphraser URL");
  att->add_option("--out", out_path, "write text here instead of stdout");

  auto* bench = app.add_subcommand("bench", "run the scheme x attack grid");
  bench->add_option("--config", config_path, "experiment config json")->required();
  bench->add_option("--out", out_path, "report output path")->required();
  bench->add_option("--format", format, "csv or json");
  bench->add_option("--workers", workers, "worker threads")->each([&](const std::string&) {
    has_workers = true;
  });
  bench->add_option("--seed", master_seed, "master seed override")->each([&](const std::string&) {
    has_master_seed = true;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      ModelBundle mb = build_model(corpus, order, alpha);
      wmlab::SchemeConfig cfg = scheme_from_flags(preset, gamma, delta, tau, psi);
      wmlab::SecretKey key = wmlab::SecretKey::from_hex(key_hex);
      wmlab::TokenSeq prompt_ids = mb.vocab.tokenize(prompt);
      wmlab::TokenSeq out = wmlab::generate_text(mb.model, prompt_ids, cfg, key, gen_len);
      std::string text = mb.vocab.detokenize(out);
      if (out_path.empty()) {
        std::cout << text << "\n";
      } else {
        std::ofstream of(out_path);
        if (!of) wmlab::raise(wmlab::Errc::io_error, "cannot open " + out_path);
        of << text << "\n";
      }
      return 0;
    }

    if (det->parsed()) {
      if (in_path.empty() == text_arg.empty())
        wmlab::raise(wmlab::Errc::config_error, "pass exactly one of --in / --text");
      ModelBundle mb = build_model(corpus, order, alpha);
      wmlab::SchemeConfig cfg = scheme_from_flags(preset, gamma, delta, tau, psi);
      cfg.permutation_test = use_pvalue;
      wmlab::SecretKey key = wmlab::SecretKey::from_hex(key_hex);
      std::string text = in_path.empty() ? text_arg : read_file(in_path);
      wmlab::TokenSeq tokens = mb.vocab.tokenize(text);
      wmlab::DetectionResult r =
          wmlab::detect(tokens, cfg, key, threshold, mb.vocab, &mb.model);
      std::printf("score %.6f\n", r.score);
      std::printf("threshold %.6f\n", r.threshold);
      if (r.p_value) std::printf("p_value %.6f\n", *r.p_value);
      std::printf("watermarked %s\n", r.is_watermarked ? "true" : "false");
      return 0;
    }

    if (att->parsed()) {
      if (in_path.empty() == text_arg.empty())
        wmlab::raise(wmlab::Errc::config_error, "pass exactly one of --in / --text");
      std::string text = in_path.empty() ? text_arg : read_file(in_path);
      wmlab::AttackSpec spec;
      spec.kind = wmlab::attack_kind_from_string(kind);
      spec.rate = rate;
      spec.count = count;
      spec.segments = segments;
      spec.percent = percent;
      spec.rng_seed = attack_seed;
      spec.endpoint = endpoint;
      wmlab::ResourceTables tables;
      if (wmlab::attack_needs_tables(spec.kind)) tables = wmlab::ResourceTables::load(data_dir);
      std::string cover;
      const std::string* cover_ptr = nullptr;
      if (!cover_path.empty()) {
        cover = read_file(cover_path);
        cover_ptr = &cover;
      }
      wmlab::ParaphraseFn para;
      if (spec.kind == wmlab::AttackSpec::Kind::external_paraphrase) {
        if (endpoint.empty())
          wmlab::raise(wmlab::Errc::config_error, "external_paraphrase needs --endpoint");
        para = [&](const std::string& t) { return wmlab::paraphrase_external(endpoint, t); };
      }
      std::string attacked = wmlab::apply_attack(spec, text, tables, cover_ptr, para);
      if (out_path.empty()) {
        std::cout << attacked << "\n";
      } else {
        std::ofstream of(out_path);
        if (!of) wmlab::raise(wmlab::Errc::io_error, "cannot open " + out_path);
        of << attacked << "\n";
      }
      return 0;
    }

    if (bench->parsed()) {
      wmlab::ExperimentConfig ec = wmlab::load_config(config_path);
      if (has_workers) ec.workers = workers;
      if (has_master_seed) ec.master_seed = master_seed;
      wmlab::ParaphraseFn para;
      bool any_external = false;
      for (const auto& a : ec.attacks)
        if (a.spec.kind == wmlab::AttackSpec::Kind::external_paraphrase) any_external = true;
      if (any_external) {
        auto endpoints = ec.attacks;
        para = [endpoints](const std::string& t) -> std::string {
          for (const auto& a : endpoints)
            if (a.spec.kind == wmlab::AttackSpec::Kind::external_paraphrase &&
                !a.spec.endpoint.empty())
              return wmlab::paraphrase_external(a.spec.endpoint, t);
          wmlab::raise(wmlab::Errc::config_error, "external_paraphrase needs an endpoint");
        };
      }
      wmlab::ExperimentReport report = wmlab::run_experiment(ec, para);
      wmlab::emit_report(report, format, out_path);
      for (const auto& s : report.schemes) {
        if (!s.error.empty()) {
          std::printf("%-12s ERROR %s\n", s.scheme.c_str(), s.error.c_str());
          continue;
        }
        for (const auto& c : s.cells) {
          if (!c.error.empty())
            std::printf("%-12s %-12s ERROR %s\n", s.scheme.c_str(), c.attack.c_str(),
                        c.error.c_str());
          else
            std::printf("%-12s %-12s tpr %.3f auc %.3f wer %.3f\n", s.scheme.c_str(),
                        c.attack.c_str(), c.tpr, c.auc, c.mean_wer);
        }
      }
      return report.has_errors() ? 3 : 0;
    }
  } catch (const wmlab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
