#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "attack.hpp"
#include "detect.hpp"
#include "error.hpp"
#include "generate.hpp"
#include "lm.hpp"
#include "metrics.hpp"
#include "prf.hpp"
#include "text.hpp"

namespace wmlab {

inline std::vector<std::string> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::file_not_found, path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) raise(Errc::empty_dataset, path + " has no nonempty lines");
  return lines;
}

struct SchemeEntry {
  std::string name;
  SchemeConfig cfg;
};

struct AttackEntry {
  std::string name;
  AttackSpec spec;
};

struct ExperimentConfig {
  std::string corpus_path;
  std::string prompts_path;    // optional; corpus line prefixes when empty
  std::string resources_path;  // optional; needed by table-driven attacks
  std::size_t lm_order = 2;
  double lm_alpha = 0.1;
  std::size_t n_samples = 200;
  std::size_t text_len = 100;
  std::size_t prompt_words = 3;
  double target_fpr = 0.01;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  std::vector<SchemeEntry> schemes;
  std::vector<AttackEntry> attacks;
};

struct CellResult {
  std::string attack;  // "CLEAN" or the configured attack name
  std::size_t n = 0;
  double tpr = 0.0;
  double auc = 0.0;
  double mean_score = 0.0;
  double mean_wer = 0.0;
  double mean_bleu = 0.0;
  std::string error;

  bool operator==(const CellResult&) const = default;
};

struct SchemeReport {
  std::string scheme;
  double threshold = 0.0;
  std::size_t null_count = 0;
  std::string error;
  std::vector<CellResult> cells;

  bool operator==(const SchemeReport&) const = default;
};

struct ExperimentReport {
  std::vector<SchemeReport> schemes;

  bool has_errors() const {
    for (const auto& s : schemes) {
      if (!s.error.empty()) return true;
      for (const auto& c : s.cells)
        if (!c.error.empty()) return true;
    }
    return false;
  }

  bool operator==(const ExperimentReport&) const = default;
};

namespace detail {

inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::vector<std::thread> pool;
  std::size_t k = std::min(workers, n);
  pool.reserve(k);
  for (std::size_t t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool needs_model(DetectorKind k) {
  return k == DetectorKind::llr || k == DetectorKind::entropy_weighted_green;
}

}  // namespace detail

// Whether an attack kind reads the word-substitution resource tables.
inline bool attack_needs_tables(AttackSpec::Kind k) {
  return k == AttackSpec::Kind::contract || k == AttackSpec::Kind::expand ||
         k == AttackSpec::Kind::misspell || k == AttackSpec::Kind::synonymize;
}

// Runs the full scheme x attack grid: per scheme, generates paired
// watermarked/unwatermarked samples, calibrates a score threshold on the
// null side at target_fpr, then scores every attacked variant against it.
// All randomness fans out of master_seed by (role, scheme, attack, sample)
// coordinates, so results are byte-identical at any worker count and adding
// an attack never changes generation.
inline ExperimentReport run_experiment(const ExperimentConfig& ec,
                                       const ParaphraseFn& paraphrase = {}) {
  std::ifstream corpus_in(ec.corpus_path);
  if (!corpus_in) raise(Errc::file_not_found, ec.corpus_path);
  std::stringstream corpus_buf;
  corpus_buf << corpus_in.rdbuf();
  const std::string corpus_text = corpus_buf.str();

  Vocabulary vocab = Vocabulary::build(corpus_text);
  std::vector<std::string> corpus_lines = load_dataset(ec.corpus_path);
  std::vector<TokenSeq> docs;
  docs.reserve(corpus_lines.size());
  for (const auto& line : corpus_lines) docs.push_back(vocab.tokenize(line));
  NgramModel model = NgramModel::train(docs, ec.lm_order, ec.lm_alpha, vocab);

  std::vector<TokenSeq> prompts;
  if (!ec.prompts_path.empty()) {
    for (const auto& line : load_dataset(ec.prompts_path)) prompts.push_back(vocab.tokenize(line));
  } else {
    for (const auto& doc : docs) {
      TokenSeq p(doc.begin(), doc.begin() + std::min(ec.prompt_words, doc.size()));
      if (!p.empty()) prompts.push_back(p);
    }
  }
  if (prompts.empty()) raise(Errc::empty_dataset, "no usable prompts");

  ResourceTables tables;
  bool any_tables = false;
  for (const auto& a : ec.attacks)
    if (attack_needs_tables(a.spec.kind)) any_tables = true;
  if (any_tables) {
    if (ec.resources_path.empty())
      raise(Errc::config_error, "table-driven attacks need a resources path");
    tables = ResourceTables::load(ec.resources_path);
  }

  ExperimentReport report;
  report.schemes.resize(ec.schemes.size());

  for (std::size_t s = 0; s < ec.schemes.size(); ++s) {
    const SchemeEntry& entry = ec.schemes[s];
    SchemeReport& row = report.schemes[s];
    row.scheme = entry.name;
    const SchemeConfig& cfg = entry.cfg;
    const NgramModel* model_ptr = detail::needs_model(cfg.detector) ? &model : nullptr;

    std::vector<TokenSeq> wm(ec.n_samples), neg(ec.n_samples);
    std::vector<SecretKey> keys(ec.n_samples);
    std::vector<double> null_scores(ec.n_samples);
    std::vector<std::string> errors(ec.n_samples);

    detail::parallel_for(ec.n_samples, ec.workers, [&](std::size_t i) {
      try {
        keys[i] = derive_child_key(ec.master_seed, {0, s, i});
        const TokenSeq& prompt = prompts[i % prompts.size()];
        wm[i] = generate_text(model, prompt, cfg, keys[i], ec.text_len);
        SeededStream rng(derive_child_seed(ec.master_seed, {1, s, i}));
        neg[i] = sample_plain(model, prompt, ec.text_len, cfg.tau, rng);
        null_scores[i] = detection_score(neg[i], cfg, keys[i], vocab, model_ptr);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (const auto& e : errors)
      if (!e.empty() && row.error.empty()) row.error = e;
    if (!row.error.empty()) continue;

    try {
      row.threshold = calibrate_threshold(null_scores, ec.target_fpr);
    } catch (const std::exception& e) {
      row.error = e.what();
      continue;
    }
    row.null_count = ec.n_samples;

    // Cell 0 is the unattacked grid column; configured attacks follow.
    for (std::size_t a = 0; a <= ec.attacks.size(); ++a) {
      CellResult cell;
      cell.attack = a == 0 ? "CLEAN" : ec.attacks[a - 1].name;
      cell.n = ec.n_samples;
      std::vector<double> scores(ec.n_samples), wers(ec.n_samples), bleus(ec.n_samples);
      std::vector<std::string> cell_errors(ec.n_samples);

      detail::parallel_for(ec.n_samples, ec.workers, [&](std::size_t i) {
        try {
          TokenSeq attacked_tokens;
          if (a == 0) {
            attacked_tokens = wm[i];
          } else {
            AttackSpec spec = ec.attacks[a - 1].spec;
            spec.rng_seed = derive_child_seed(ec.master_seed, {2, s, a, i}).value;
            std::string cover = vocab.detokenize(neg[i]);
            std::string attacked =
                apply_attack(spec, vocab.detokenize(wm[i]), tables, &cover, paraphrase);
            attacked_tokens = vocab.tokenize(attacked);
          }
          scores[i] = detection_score(attacked_tokens, cfg, keys[i], vocab, model_ptr);
          wers[i] = wer(wm[i], attacked_tokens);
          bleus[i] = bleu(wm[i], attacked_tokens);
        } catch (const std::exception& e) {
          cell_errors[i] = e.what();
        }
      });

      for (const auto& e : cell_errors)
        if (!e.empty() && cell.error.empty()) cell.error = e;
      if (cell.error.empty()) {
        std::size_t flagged = 0;
        double sum_score = 0, sum_wer = 0, sum_bleu = 0;
        for (std::size_t i = 0; i < ec.n_samples; ++i) {
          if (scores[i] >= row.threshold) ++flagged;
          sum_score += scores[i];
          sum_wer += wers[i];
          sum_bleu += bleus[i];
        }
        cell.tpr = static_cast<double>(flagged) / static_cast<double>(ec.n_samples);
        cell.auc = roc_auc(scores, null_scores);
        cell.mean_score = sum_score / static_cast<double>(ec.n_samples);
        cell.mean_wer = sum_wer / static_cast<double>(ec.n_samples);
        cell.mean_bleu = sum_bleu / static_cast<double>(ec.n_samples);
      }
      row.cells.push_back(std::move(cell));
    }
  }
  return report;
}

// --- report serialization ---

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline constexpr const char* csv_header =
    "scheme,attack,n,tpr,auc,mean_score,mean_wer,mean_bleu,threshold,null_count,error";

}  // namespace detail

inline std::string to_csv(const ExperimentReport& report) {
  std::string out = detail::csv_header;
  out += '\n';
  auto row = [&](const SchemeReport& s, const CellResult* c) {
    out += detail::csv_escape(s.scheme);
    out += ',';
    out += detail::csv_escape(c ? c->attack : "");
    out += ',';
    out += c ? std::to_string(c->n) : "0";
    out += ',';
    out += c ? detail::format_g17(c->tpr) : "0";
    out += ',';
    out += c ? detail::format_g17(c->auc) : "0";
    out += ',';
    out += c ? detail::format_g17(c->mean_score) : "0";
    out += ',';
    out += c ? detail::format_g17(c->mean_wer) : "0";
    out += ',';
    out += c ? detail::format_g17(c->mean_bleu) : "0";
    out += ',';
    out += detail::format_g17(s.threshold);
    out += ',';
    out += std::to_string(s.null_count);
    out += ',';
    out += detail::csv_escape(c ? c->error : s.error);
    out += '\n';
  };
  for (const auto& s : report.schemes) {
    if (s.cells.empty())
      row(s, nullptr);
    else
      for (const auto& c : s.cells) row(s, &c);
  }
  return out;
}

inline ExperimentReport report_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != detail::csv_header)
    raise(Errc::io_error, "bad csv header");
  ExperimentReport report;
  std::string record;
  while (std::getline(in, line)) {
    if (!record.empty()) record += '\n';
    record += line;
    // an odd quote count means a quoted field continues on the next line
    if (std::count(record.begin(), record.end(), '"') % 2 != 0) continue;
    if (record.empty()) continue;
    auto f = detail::csv_split(record);
    record.clear();
    if (f.size() != 11) raise(Errc::io_error, "bad csv row");
    if (report.schemes.empty() || report.schemes.back().scheme != f[0]) {
      SchemeReport s;
      s.scheme = f[0];
      s.threshold = std::stod(f[8]);
      s.null_count = std::stoul(f[9]);
      report.schemes.push_back(std::move(s));
    }
    SchemeReport& s = report.schemes.back();
    if (f[1].empty()) {
      s.error = f[10];
      continue;
    }
    CellResult c;
    c.attack = f[1];
    c.n = std::stoul(f[2]);
    c.tpr = std::stod(f[3]);
    c.auc = std::stod(f[4]);
    c.mean_score = std::stod(f[5]);
    c.mean_wer = std::stod(f[6]);
    c.mean_bleu = std::stod(f[7]);
    c.error = f[10];
    s.cells.push_back(std::move(c));
  }
  return report;
}

inline std::string to_json(const ExperimentReport& report) {
  nlohmann::ordered_json root;
  root["schemes"] = nlohmann::ordered_json::array();
  for (const auto& s : report.schemes) {
    nlohmann::ordered_json js;
    js["scheme"] = s.scheme;
    js["threshold"] = s.threshold;
    js["null_count"] = s.null_count;
    js["error"] = s.error;
    js["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : s.cells) {
      nlohmann::ordered_json jc;
      jc["attack"] = c.attack;
      jc["n"] = c.n;
      jc["tpr"] = c.tpr;
      jc["auc"] = c.auc;
      jc["mean_score"] = c.mean_score;
      jc["mean_wer"] = c.mean_wer;
      jc["mean_bleu"] = c.mean_bleu;
      jc["error"] = c.error;
      js["cells"].push_back(std::move(jc));
    }
    root["schemes"].push_back(std::move(js));
  }
  return root.dump(2) + "\n";
}

inline ExperimentReport report_from_json(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.contains("schemes"))
    raise(Errc::io_error, "bad report json");
  ExperimentReport report;
  for (const auto& js : root["schemes"]) {
    SchemeReport s;
    s.scheme = js.at("scheme").get<std::string>();
    s.threshold = js.at("threshold").get<double>();
    s.null_count = js.at("null_count").get<std::size_t>();
    s.error = js.at("error").get<std::string>();
    for (const auto& jc : js.at("cells")) {
      CellResult c;
      c.attack = jc.at("attack").get<std::string>();
      c.n = jc.at("n").get<std::size_t>();
      c.tpr = jc.at("tpr").get<double>();
      c.auc = jc.at("auc").get<double>();
      c.mean_score = jc.at("mean_score").get<double>();
      c.mean_wer = jc.at("mean_wer").get<double>();
      c.mean_bleu = jc.at("mean_bleu").get<double>();
      c.error = jc.at("error").get<std::string>();
      s.cells.push_back(std::move(c));
    }
    report.schemes.push_back(std::move(s));
  }
  return report;
}

inline void emit_report(const ExperimentReport& report, const std::string& format,
                        const std::string& path) {
  std::string content;
  if (format == "csv")
    content = to_csv(report);
  else if (format == "json")
    content = to_json(report);
  else
    raise(Errc::invalid_argument, "format must be csv or json");
  std::ofstream out(path);
  if (!out) raise(Errc::io_error, "cannot open " + path);
  out << content;
  if (!out) raise(Errc::io_error, "write failed for " + path);
}

// --- experiment config parsing ---

namespace detail {

inline ContextScheme context_from_json(const nlohmann::json& j) {
  std::string kind = j.value("context", "minhash");
  std::uint32_t w = j.value("window", 1u);
  if (kind == "index") return ContextScheme::index_dependent();
  if (kind == "window") return ContextScheme::window_hash(w);
  if (kind == "minhash") return ContextScheme::min_hash(w);
  if (kind == "free") return ContextScheme::context_free();
  raise(Errc::config_error, "unknown context kind: " + kind);
}

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "shift") return Strategy::shift;
  if (s == "reweight_delta") return Strategy::reweight_delta;
  if (s == "reweight_gamma") return Strategy::reweight_gamma;
  if (s == "transform_exp") return Strategy::transform_exp;
  if (s == "transform_its") return Strategy::transform_its;
  raise(Errc::config_error, "unknown strategy: " + s);
}

inline DetectorKind detector_from_string(const std::string& s) {
  if (s == "sum_green") return DetectorKind::sum_green;
  if (s == "sum_exp") return DetectorKind::sum_exp;
  if (s == "sum_its") return DetectorKind::sum_its;
  if (s == "edit_score") return DetectorKind::edit_score;
  if (s == "llr") return DetectorKind::llr;
  if (s == "entropy_weighted_green") return DetectorKind::entropy_weighted_green;
  raise(Errc::config_error, "unknown detector: " + s);
}

}  // namespace detail

inline AttackSpec::Kind attack_kind_from_string(const std::string& s) {
  if (s == "lowercase") return AttackSpec::Kind::lowercase;
  if (s == "contract") return AttackSpec::Kind::contract;
  if (s == "expand") return AttackSpec::Kind::expand;
  if (s == "misspell") return AttackSpec::Kind::misspell;
  if (s == "typo") return AttackSpec::Kind::typo;
  if (s == "synonymize") return AttackSpec::Kind::synonymize;
  if (s == "swap") return AttackSpec::Kind::swap;
  if (s == "copy_paste") return AttackSpec::Kind::copy_paste;
  if (s == "external_paraphrase") return AttackSpec::Kind::external_paraphrase;
  raise(Errc::config_error, "unknown attack kind: " + s);
}

inline SchemeConfig scheme_preset(const std::string& name) {
  if (name == "tgrl") return SchemeConfig::tgrl();
  if (name == "ug") return SchemeConfig::ug();
  if (name == "go") return SchemeConfig::go();
  if (name == "rdf-exp") return SchemeConfig::rdf_exp();
  if (name == "rdf-its") return SchemeConfig::rdf_its();
  if (name == "ub-delta") return SchemeConfig::ub_delta();
  if (name == "ub-gamma") return SchemeConfig::ub_gamma();
  if (name == "tgrl-ewd") return SchemeConfig::tgrl_ewd();
  raise(Errc::config_error, "unknown preset: " + name);
}

inline ExperimentConfig parse_config(const std::string& json_text) {
  nlohmann::json root = nlohmann::json::parse(json_text, nullptr, false);
  if (root.is_discarded()) raise(Errc::config_error, "config is not valid json");
  try {
    ExperimentConfig ec;
    ec.corpus_path = root.at("corpus").get<std::string>();
    ec.prompts_path = root.value("prompts", "");
    ec.resources_path = root.value("resources", "");
    if (root.contains("lm")) {
      ec.lm_order = root["lm"].value("order", ec.lm_order);
      ec.lm_alpha = root["lm"].value("alpha", ec.lm_alpha);
    }
    ec.n_samples = root.value("n_samples", ec.n_samples);
    ec.text_len = root.value("text_len", ec.text_len);
    ec.prompt_words = root.value("prompt_words", ec.prompt_words);
    ec.target_fpr = root.value("target_fpr", ec.target_fpr);
    ec.master_seed = root.value("master_seed", ec.master_seed);
    ec.workers = root.value("workers", ec.workers);

    if (!root.contains("schemes") || root["schemes"].empty())
      raise(Errc::config_error, "config needs at least one scheme");
    for (const auto& js : root["schemes"]) {
      SchemeEntry e;
      e.name = js.at("name").get<std::string>();
      if (js.contains("preset")) e.cfg = scheme_preset(js["preset"].get<std::string>());
      if (js.contains("context") || js.contains("window"))
        e.cfg.context = detail::context_from_json(js);
      if (js.contains("strategy"))
        e.cfg.strategy = detail::strategy_from_string(js["strategy"].get<std::string>());
      if (js.contains("detector"))
        e.cfg.detector = detail::detector_from_string(js["detector"].get<std::string>());
      e.cfg.gamma = js.value("gamma", e.cfg.gamma);
      e.cfg.delta = js.value("delta", e.cfg.delta);
      e.cfg.psi = js.value("psi", e.cfg.psi);
      e.cfg.n_rand = js.value("n_rand", e.cfg.n_rand);
      e.cfg.permutation_test = js.value("permutation_test", e.cfg.permutation_test);
      e.cfg.tau = Temperature{js.value("tau", e.cfg.tau.value)};
      for (const auto& prev : ec.schemes)
        if (prev.name == e.name) raise(Errc::config_error, "duplicate scheme name: " + e.name);
      if (e.name.empty()) raise(Errc::config_error, "scheme name must be nonempty");
      ec.schemes.push_back(std::move(e));
    }
    if (root.contains("attacks")) {
      for (const auto& ja : root["attacks"]) {
        AttackEntry e;
        e.name = ja.at("name").get<std::string>();
        e.spec.kind = attack_kind_from_string(ja.at("kind").get<std::string>());
        e.spec.rate = ja.value("rate", e.spec.rate);
        e.spec.count = ja.value("count", e.spec.count);
        e.spec.segments = ja.value("segments", e.spec.segments);
        e.spec.percent = ja.value("percent", e.spec.percent);
        e.spec.endpoint = ja.value("endpoint", "");
        if (e.name.empty() || e.name == "CLEAN")
          raise(Errc::config_error, "attack name must be nonempty and not CLEAN");
        for (const auto& prev : ec.attacks)
          if (prev.name == e.name) raise(Errc::config_error, "duplicate attack name: " + e.name);
        ec.attacks.push_back(std::move(e));
      }
    }
    return ec;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::config_error, e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::file_not_found, path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace wmlab
