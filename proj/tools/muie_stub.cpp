// muie-stub: deterministic backend speaking the ndjson protocol on stdio.
//   muie-stub echo --text FILE [--payload FILE]
//   muie-stub oracle --manifest M
//   muie-stub corrupt --manifest M --percent K
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "muie/corpus.hpp"
#include "muie/stubs.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw muie::FormatError("cannot open " + path, "MISSING_FILE");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic stub backend (ndjson over stdin/stdout)"};
  app.require_subcommand(1);
  std::string text_file, payload_file, manifest;
  int percent = 0;

  auto* echo = app.add_subcommand("echo", "Reply a fixed text / grounding payload");
  echo->add_option("--text", text_file, "File whose content answers every uie request");
  echo->add_option("--payload", payload_file,
                   "Json object with masks, segments or tracklets for grounding requests");
  auto* oracle = app.add_subcommand("oracle", "Reply the gold records and groundings");
  oracle->add_option("--manifest", manifest)->required();
  auto* corrupt = app.add_subcommand("corrupt", "Oracle with K percent of items corrupted");
  corrupt->add_option("--manifest", manifest)->required();
  corrupt->add_option("--percent", percent)->required()->check(CLI::Range(0, 100));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    std::optional<muie::Stub> stub;
    if (*echo) {
      std::optional<muie::Json> payload;
      if (!payload_file.empty()) payload = muie::Json::parse(slurp(payload_file));
      stub = muie::Stub::echo(text_file.empty() ? std::string() : slurp(text_file), payload);
    } else if (*oracle) {
      stub = muie::Stub::oracle(muie::load_manifest(manifest));
    } else {
      stub = muie::Stub::corrupt(muie::load_manifest(manifest), percent);
    }
    std::ios::sync_with_stdio(false);
    return muie::serve(*stub, std::cin, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "muie-stub: " << e.what() << "\n";
    return 1;
  }
}
