#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"
#include "wmlab/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "wmlab-cli-test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string write_file(const std::string& name, const std::string& content) {
  fs::path p = scratch() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

const std::string& bin() {
  static const std::string path = [] {
    const char* p = std::getenv("WMLAB_BIN");
    REQUIRE(p != nullptr);
    return std::string(p);
  }();
  return path;
}

RunResult run(const std::string& args) {
  static int counter = 0;
  fs::path out = scratch() / ("stdout" + std::to_string(counter));
  fs::path err = scratch() / ("stderr" + std::to_string(counter));
  ++counter;
  std::string cmd = bin() + " " + args + " >" + out.string() + " 2>" + err.string();
  int rc = std::system(cmd.c_str());
  int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return {code, slurp(out), slurp(err)};
}

const std::string& corpus_path() {
  static const std::string path = write_file("corpus.txt", support::make_corpus(150, 7));
  return path;
}

const std::string key_a = "000102030405060708090a0b0c0d0e0f";
const std::string key_b = "ffeeddccbbaa99887766554433221100";

}  // namespace

TEST_CASE("help exits zero and bad usage exits two") {
  CHECK(run("--help").code == 0);
  CHECK(run("generate --help").code == 0);
  CHECK(run("nonsense").code == 2);
  CHECK(run("generate").code == 2);  // --corpus required
  CHECK(run("").code == 2);          // a subcommand is required
}

TEST_CASE("generate then detect round trips through files") {
  std::string text_path = (scratch() / "wm.txt").string();
  RunResult gen = run("generate --corpus " + corpus_path() + " --scheme tgrl --key " + key_a +
                      " --prompt \"The quick fox\" --len 150 --out " + text_path);
  REQUIRE(gen.code == 0);
  REQUIRE(fs::exists(text_path));

  RunResult hit = run("detect --corpus " + corpus_path() + " --scheme tgrl --key " + key_a +
                      " --in " + text_path);
  REQUIRE(hit.code == 0);
  CHECK(hit.out.find("score ") != std::string::npos);
  CHECK(hit.out.find("threshold 4.0") != std::string::npos);
  CHECK(hit.out.find("watermarked true") != std::string::npos);

  RunResult miss = run("detect --corpus " + corpus_path() + " --scheme tgrl --key " + key_b +
                       " --in " + text_path);
  REQUIRE(miss.code == 0);
  CHECK(miss.out.find("watermarked false") != std::string::npos);
}

TEST_CASE("generate prints to stdout when no output path is given") {
  RunResult gen = run("generate --corpus " + corpus_path() + " --key " + key_a + " --len 20");
  REQUIRE(gen.code == 0);
  CHECK(gen.out.size() > 20);
  RunResult again = run("generate --corpus " + corpus_path() + " --key " + key_a + " --len 20");
  CHECK(gen.out == again.out);
}

TEST_CASE("detect with a permutation test reports the p-value") {
  std::string text_path = (scratch() / "wm_pt.txt").string();
  REQUIRE(run("generate --corpus " + corpus_path() + " --scheme rdf-exp --key " + key_a +
              " --len 120 --out " + text_path)
              .code == 0);
  RunResult r = run("detect --corpus " + corpus_path() + " --scheme rdf-exp --key " + key_a +
                    " --pvalue --threshold 0.05 --in " + text_path);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("p_value 0.019") != std::string::npos);  // 1/51
  CHECK(r.out.find("watermarked true") != std::string::npos);
}

TEST_CASE("detect rejects ambiguous input selection") {
  CHECK(run("detect --corpus " + corpus_path() + " --text \"a b\" --in somefile").code == 2);
  CHECK(run("detect --corpus " + corpus_path()).code == 2);
}

TEST_CASE("attack subcommand transforms text") {
  RunResult lower = run("attack --kind lowercase --text \"The Quick FOX\"");
  REQUIRE(lower.code == 0);
  CHECK(lower.out == "the quick fox\n");

  std::string data = support::data_dir();
  RunResult mis =
      run("attack --kind misspell --rate 1.0 --seed 3 --data " + data +
          " --text \"the bright mountain\"");
  REQUIRE(mis.code == 0);
  CHECK(mis.out != "the bright mountain\n");

  RunResult swap = run("attack --kind swap --count 1 --seed 1 --text \"a b\"");
  REQUIRE(swap.code == 0);
  CHECK(swap.out == "b a\n");
}

TEST_CASE("copy paste attack needs a cover file") {
  std::string wm = write_file("cp_wm.txt", "w0 w1 w2 w3 w4 w5 w6 w7 w8 w9");
  std::string cover = write_file("cp_cover.txt", "c0 c1 c2 c3 c4 c5 c6 c7 c8 c9");
  RunResult r = run("attack --kind copy_paste --segments 1 --percent 50 --in " + wm +
                    " --cover " + cover);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("w") != std::string::npos);
  CHECK(r.out.find("c0") != std::string::npos);

  CHECK(run("attack --kind copy_paste --in " + wm).code == 2);
  CHECK(run("attack --kind nonsense --text \"a\"").code == 2);
}

TEST_CASE("bench writes the report and a summary table") {
  std::string report_path = (scratch() / "report.csv").string();
  std::string config = write_file("bench.json", R"({
    "corpus": ")" + corpus_path() + R"(",
    "resources": ")" + support::data_dir() + R"(",
    "n_samples": 100,
    "text_len": 30,
    "master_seed": 11,
    "schemes": [{"name": "tgrl", "preset": "tgrl"}],
    "attacks": [{"name": "lower", "kind": "lowercase"}]
  })");
  RunResult r = run("bench --config " + config + " --out " + report_path);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tgrl") != std::string::npos);
  CHECK(r.out.find("CLEAN") != std::string::npos);
  CHECK(r.out.find("lower") != std::string::npos);

  wmlab::ExperimentReport report = wmlab::report_from_csv(slurp(report_path));
  REQUIRE(report.schemes.size() == 1);
  REQUIRE(report.schemes[0].cells.size() == 2);
  CHECK_FALSE(report.has_errors());
}

TEST_CASE("bench json format and seed override") {
  std::string config = write_file("bench2.json", R"({
    "corpus": ")" + corpus_path() + R"(",
    "n_samples": 100,
    "text_len": 30,
    "schemes": [{"name": "ug", "preset": "ug"}]
  })");
  std::string p1 = (scratch() / "r1.json").string();
  std::string p2 = (scratch() / "r2.json").string();
  std::string p3 = (scratch() / "r3.json").string();
  REQUIRE(run("bench --config " + config + " --format json --seed 5 --out " + p1).code == 0);
  REQUIRE(run("bench --config " + config + " --format json --seed 5 --out " + p2).code == 0);
  REQUIRE(run("bench --config " + config + " --format json --seed 6 --out " + p3).code == 0);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(p1) != slurp(p3));
  wmlab::ExperimentReport report = wmlab::report_from_json(slurp(p1));
  REQUIRE(report.schemes.size() == 1);
  CHECK(report.schemes[0].scheme == "ug");
}

TEST_CASE("bench exits three when any cell errors") {
  std::string report_path = (scratch() / "broken.csv").string();
  std::string config = write_file("bench3.json", R"({
    "corpus": ")" + corpus_path() + R"(",
    "n_samples": 100,
    "text_len": 30,
    "schemes": [{"name": "tgrl", "preset": "tgrl"}],
    "attacks": [{"name": "para", "kind": "external_paraphrase", "endpoint": "http://127.0.0.1:1/x"}]
  })");
  RunResult r = run("bench --config " + config + " --out " + report_path);
  CHECK(r.code == 3);
  CHECK(r.out.find("ERROR") != std::string::npos);
  wmlab::ExperimentReport report = wmlab::report_from_csv(slurp(report_path));
  CHECK(report.has_errors());
}

TEST_CASE("missing files exit two with a diagnostic") {
  RunResult r = run("generate --corpus /definitely/missing.txt");
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
}
