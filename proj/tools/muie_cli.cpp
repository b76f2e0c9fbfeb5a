// muie: validate corpora, parse meta-responses, run the pipeline, score and
// render reports. Exit codes: 0 ok, 1 fatal config, 2 input format, 3 partial.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

#include "muie/backend.hpp"
#include "muie/corpus.hpp"
#include "muie/harness.hpp"
#include "muie/metaresponse.hpp"
#include "muie/scoring.hpp"
#include "muie/serialization.hpp"

namespace {

using namespace muie;

constexpr int kOk = 0;
constexpr int kFatal = 1;
constexpr int kInput = 2;
constexpr int kPartial = 3;

std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

void report_violation(const Violation& v) {
  Json j{{"instance_id", v.instance_id}, {"code", v.code}, {"message", v.message}};
  if (!v.path.empty()) j["path"] = v.path;
  std::cerr << dump_line(j) << "\n";
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), {});
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path, "MISSING_FILE");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

struct Options {
  std::string manifest;
  std::string input;
  std::string task = "NER";
  std::vector<std::string> backends;
  std::vector<std::string> modules;
  std::string out;
  std::string store;
  std::string pred;
  std::string split;
  std::string format = "table";
  std::string save_json;
  int jobs = default_jobs();
  bool case_insensitive = false;
  bool strict_re = false;
  bool exclude_vacuous = false;
  double timeout = 0.0;
};

int cmd_validate(const Options& o) {
  const Manifest m = load_manifest(o.manifest);
  for (const auto& w : m.warnings) std::cerr << "muie: warning: " << w << "\n";
  const CorpusValidation v = validate_corpus(m);
  for (const auto& x : v.violations) report_violation(x);
  Json summary{{"instances", m.entries.size()},
               {"violations", v.violations.size()},
               {"partition", v.partition}};
  std::cout << dump_line(summary) << "\n";
  return v.violations.empty() ? kOk : kInput;
}

int cmd_parse(const Options& o) {
  const std::string text = read_input(o.input);
  const MetaResponse meta = parse_meta_response(text, parse_task(o.task));
  for (const auto& w : meta.warnings) {
    std::cerr << "muie: warning at byte " << w.offset << ": " << w.message << "\n";
  }
  std::cout << to_json(meta).dump(2, ' ', false, Json::error_handler_t::replace) << "\n";
  return kOk;
}

int cmd_run(const Options& o) {
  const Manifest m = load_manifest(o.manifest);
  for (const auto& w : m.warnings) std::cerr << "muie: warning: " << w << "\n";
  std::vector<BackendSpec> specs;
  for (const auto& b : o.backends) {
    BackendSpec s = parse_backend_spec(b);
    if (o.timeout > 0) s.timeout_seconds = o.timeout;
    specs.push_back(std::move(s));
  }
  HarnessConfig config;
  config.jobs = o.jobs;
  for (const auto& entry : o.modules) {
    const auto eq = entry.rfind('=');
    if (eq == std::string::npos) throw InvalidArgument("--module expects NAME=KIND", "BAD_MODULE_MAP");
    config.module_kinds[entry.substr(0, eq)] = parse_backend_kind(entry.substr(eq + 1));
  }
  PredictionStore store = PredictionStore::create(o.out);
  const RunSummary s = run_pipeline(m, specs, config, store);
  for (const auto& [id, err] : s.errors) {
    std::cerr << dump_line({{"instance_id", id}, {"code", err.code}, {"message", err.message}}) << "\n";
  }
  std::cout << dump_line({{"instances", s.instances}, {"failed", s.failed}, {"store", o.out}}) << "\n";
  return s.failed == 0 ? kOk : kPartial;
}

int cmd_score(const Options& o) {
  if (o.store.empty() == o.pred.empty()) {
    throw InvalidArgument("score needs exactly one of --store or --pred", "BAD_ARGUMENTS");
  }
  const Manifest m = load_manifest(o.manifest);
  for (const auto& w : m.warnings) std::cerr << "muie: warning: " << w << "\n";
  const std::vector<std::string> splits = split_list(o.split);
  ScoringOptions opts;
  opts.case_sensitive = !o.case_insensitive;
  opts.strict_re = o.strict_re;
  opts.exclude_vacuous = o.exclude_vacuous;
  const ReportFormat format = parse_report_format(o.format);

  ScoreOutcome outcome;
  bool run_failures = false;
  if (!o.store.empty()) {
    const PredictionStore store = PredictionStore::open(o.store);
    std::map<std::string, PredictionSet> preds;
    for (const auto& id : store.instance_ids()) {
      RunRecord r = store.get(id);
      if (r.error) {
        run_failures = true;
        std::cerr << dump_line({{"instance_id", id}, {"code", r.error->code}, {"message", r.error->message}})
                  << "\n";
      }
      preds.emplace(id, std::move(r.prediction));
    }
    outcome = score_predictions(m, preds, splits, opts, o.jobs);
  } else {
    std::vector<Violation> load_violations;
    const auto preds = load_prediction_dir(o.pred, load_violations);
    outcome = score_predictions(m, preds, splits, opts, o.jobs);
    outcome.violations.insert(outcome.violations.end(), load_violations.begin(), load_violations.end());
    std::sort(outcome.violations.begin(), outcome.violations.end());
  }
  for (const auto& v : outcome.violations) report_violation(v);
  if (!o.save_json.empty()) {
    std::ofstream out(o.save_json, std::ios::binary);
    if (!out) throw FormatError("cannot write " + o.save_json, "IO_ERROR");
    out << render_report(outcome.report, ReportFormat::json);
  }
  std::cout << render_report(outcome.report, format);
  return outcome.violations.empty() && !run_failures ? kOk : kPartial;
}

int cmd_report(const Options& o) {
  const ScoreReport r = report_from_json(read_input(o.input));
  std::cout << render_report(r, parse_report_format(o.format));
  return kOk;
}

int exit_code_for(const muie::Error& e) {
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const CorpusError*>(&e)) {
    return kInput;
  }
  return kFatal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded multimodal information extraction: corpus checks, pipeline runs, scoring"};
  app.set_config("--config", "", "TOML-style file supplying any flag; command-line flags win");
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check a corpus manifest and every gold file");
  validate->add_option("manifest", o.manifest, "Manifest (json lines)")->required();

  auto* parse = app.add_subcommand("parse", "Parse a meta-response and print canonical json");
  parse->add_option("input", o.input, "File, or - for stdin")->required();
  parse->add_option("--task", o.task, "NER, RE or EE")->required();

  auto* run = app.add_subcommand("run", "Run the pipeline over a manifest into a prediction store");
  run->add_option("--manifest", o.manifest)->required();
  run->add_option("--backend", o.backends, "KIND[,opt=v...]=[name@]stdio:CMD | KIND=http://URL")
      ->required();
  run->add_option("--module", o.modules, "Extra module mapping NAME=KIND");
  run->add_option("--out", o.out, "Prediction store directory")->required();
  run->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--timeout", o.timeout, "Per-request timeout in seconds for every backend");

  auto* score = app.add_subcommand("score", "Score stored or external predictions against gold");
  score->add_option("--manifest", o.manifest)->required();
  score->add_option("--store", o.store, "Prediction store written by run");
  score->add_option("--pred", o.pred, "Directory of prediction annotation files");
  score->add_option("--split", o.split, "Comma list of shared, specific, entity-buckets");
  score->add_option("--format", o.format, "table, csv or json");
  score->add_option("--save-json", o.save_json, "Also write the json report to this file");
  score->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  score->add_flag("--case-insensitive", o.case_insensitive, "Case-fold mentions and labels");
  score->add_flag("--strict-re", o.strict_re, "Relations also match entity labels");
  score->add_flag("--exclude-vacuous", o.exclude_vacuous,
                  "Leave instances with neither gold nor predicted groundings out of grounding means");

  auto* report = app.add_subcommand("report", "Re-render a saved json report");
  report->add_option("--in", o.input, "Report json, or - for stdin")->required();
  report->add_option("--format", o.format, "table, csv or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kFatal;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*parse) return cmd_parse(o);
    if (*run) return cmd_run(o);
    if (*score) return cmd_score(o);
    if (*report) return cmd_report(o);
  } catch (const CorpusError& e) {
    for (const auto& v : e.violations()) report_violation(v);
    return kInput;
  } catch (const muie::Error& e) {
    std::cerr << "muie: " << e.code() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "muie: " << e.what() << "\n";
    return kFatal;
  }
  return kFatal;
}
