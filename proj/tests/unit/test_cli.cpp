#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "../support/fixture_corpus.hpp"
#include "muie/serialization.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result muie_cli(const fs::path& scratch, const std::string& args) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string(MUIE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> table_values(const std::string& table) {
  std::vector<std::string> values;
  std::istringstream in(table);
  std::string line;
  for (int i = 0; i < 3; ++i) std::getline(in, line);  // header rows
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string split, v;
    row >> split;
    while (row >> v) values.push_back(v);
  }
  return values;
}

struct Fixture {
  fs::path dir = muie::testing::scratch_dir("cli");
  fs::path manifest = muie::testing::write_fixture_corpus(dir / "corpus", 2);
  ~Fixture() { fs::remove_all(dir); }
  std::string oracle_backends() const {
    std::string b;
    for (const char* k : {"uie", "image_segmenter", "video_tracker", "audio_segmenter"}) {
      b += std::string(" --backend '") + k + "=stdio:" + MUIE_STUB_PATH + " oracle --manifest " +
           manifest.string() + "'";
    }
    return b;
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate: clean fixture exits 0 with empty stderr") {
    Fixture f;
    const auto r = muie_cli(f.dir, "validate " + f.manifest.string());
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(muie::Json::parse(r.out).at("instances") == 30);
  }

  TEST_CASE("validate: violations go to stderr as json lines, exit 2") {
    Fixture f;
    std::ofstream(f.dir / "corpus/gold/i0.json") << "{\"format_version\":1}";
    const auto r = muie_cli(f.dir, "validate " + f.manifest.string());
    CHECK(r.code == 2);
    const auto first = r.err.substr(0, r.err.find('\n'));
    CHECK(muie::Json::parse(first).at("code") == "SCHEMA_ERROR");
  }

  TEST_CASE("parse: worked box") {
    Fixture f;
    std::ofstream(f.dir / "box.txt")
        << "<UIE>\n(Trump, person)\n(Merkel, person)\n\xE2\x8B\xAF\n<Module>\nImage Segmenter\n"
           "<Instruction>\nSegmentation: `A person'\n";
    const auto r = muie_cli(f.dir, "parse " + (f.dir / "box.txt").string() + " --task NER");
    CHECK(r.code == 0);
    const auto j = muie::Json::parse(r.out);
    CHECK(j.at("entities").size() == 2);
    CHECK(j.at("module_calls").size() == 1);
    std::ofstream(f.dir / "junk.txt") << "no tags";
    CHECK(muie_cli(f.dir, "parse " + (f.dir / "junk.txt").string() + " --task NER").code == 2);
  }

  TEST_CASE("run + score with the oracle stub: every cell 100.0; report re-renders") {
    Fixture f;
    const auto run = muie_cli(f.dir, "run --manifest " + f.manifest.string() + f.oracle_backends() +
                                         " --out " + (f.dir / "store").string() + " --jobs 3");
    REQUIRE(run.code == 0);
    const auto score = muie_cli(f.dir, "score --manifest " + f.manifest.string() + " --store " +
                                           (f.dir / "store").string() +
                                           " --split shared,specific,entity-buckets --format table --save-json " +
                                           (f.dir / "report.json").string());
    CHECK(score.code == 0);
    CHECK(score.err.empty());
    const auto values = table_values(score.out);
    CHECK(!values.empty());
    for (const auto& v : values) CHECK((v == "100.0" || v == "-"));
    const auto again = muie_cli(f.dir, "report --in " + (f.dir / "report.json").string() + " --format table");
    CHECK(again.code == 0);
    CHECK(again.out == score.out);
  }

  TEST_CASE("score --pred on gold files reproduces the perfect report") {
    Fixture f;
    const auto r = muie_cli(f.dir, "score --manifest " + f.manifest.string() + " --pred " +
                                       (f.dir / "corpus/gold").string() + " --format csv");
    CHECK(r.code == 0);
    CHECK(r.out.find("\r\n") != std::string::npos);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      CHECK(line.find(",1,100.0,") != std::string::npos);
    }
    CHECK(rows > 0);
  }

  TEST_CASE("config file supplies flags, command line wins") {
    Fixture f;
    std::ofstream(f.dir / "muie.toml") << "[score]\nformat = \"json\"\nsplit = \"shared\"\n";
    const std::string base = "--config " + (f.dir / "muie.toml").string() + " score --manifest " +
                             f.manifest.string() + " --pred " + (f.dir / "corpus/gold").string();
    const auto from_file = muie_cli(f.dir, base);
    CHECK(from_file.code == 0);
    CHECK(muie::Json::parse(from_file.out).at("format_version") == 1);
    CHECK(from_file.out.find("\"shared\"") != std::string::npos);
    const auto overridden = muie_cli(f.dir, base + " --format csv");
    CHECK(overridden.out.rfind("split,", 0) == 0);
  }

  TEST_CASE("exit codes") {
    Fixture f;
    // fatal configuration
    CHECK(muie_cli(f.dir, "run --manifest " + f.manifest.string() + " --backend 'uie=stdio:/no/such/exe' --out " +
                              (f.dir / "s").string()).code == 1);
    CHECK(muie_cli(f.dir, "score --manifest " + f.manifest.string() + " --pred " +
                              (f.dir / "corpus/gold").string() + " --split nonsense").code == 1);
    CHECK(muie_cli(f.dir, "frobnicate").code == 1);
    // input format
    std::ofstream(f.dir / "bad.jsonl") << "{not json\n";
    CHECK(muie_cli(f.dir, "validate " + (f.dir / "bad.jsonl").string()).code == 2);
    // partial: every instance fails to parse, store still written
    std::ofstream(f.dir / "junk.txt") << "nothing useful";
    const auto partial = muie_cli(f.dir, "run --manifest " + f.manifest.string() + " --backend 'uie=stdio:" +
                                             MUIE_STUB_PATH + " echo --text " + (f.dir / "junk.txt").string() +
                                             "' --out " + (f.dir / "s2").string());
    CHECK(partial.code == 3);
    CHECK(fs::exists(f.dir / "s2/index.json"));
    const auto scored = muie_cli(f.dir, "score --manifest " + f.manifest.string() + " --store " +
                                            (f.dir / "s2").string());
    CHECK(scored.code == 3);
    CHECK(!scored.out.empty());
  }
}
