#include <doctest.h>

#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include "../support/fixture_corpus.hpp"
#include "muie/harness.hpp"
#include "muie/stubs.hpp"

using namespace muie;
namespace fs = std::filesystem;

namespace {

const char* kBox =
    "<UIE>\n(Trump, person)\n(Merkel, person)\n\xE2\x8B\xAF\n<Module>\nImage Segmenter\n"
    "<Instruction>\nSegmentation: `A person'\n";

BackendSpec spec_of(BackendKind k) {
  BackendSpec s;
  s.kind = k;
  s.name = std::string(to_string(k));
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  fs::path dir = testing::scratch_dir("harness");
  Manifest manifest = load_manifest(testing::write_fixture_corpus(dir / "corpus", 2));
  ~Fixture() { fs::remove_all(dir); }
};

std::map<BackendKind, Backend*> all_kinds(std::vector<std::unique_ptr<Backend>>& owned,
                                          const Stub& stub) {
  std::map<BackendKind, Backend*> out;
  for (auto k : {BackendKind::uie, BackendKind::image_segmenter, BackendKind::video_tracker,
                 BackendKind::audio_segmenter}) {
    owned.push_back(make_function_backend(spec_of(k), [&stub](const Json& r) { return stub.respond(r); }));
    out[k] = owned.back().get();
  }
  return out;
}

const std::vector<std::string> kSplits{"shared", "specific", "entity-buckets"};

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("echo stub with the worked box plus a fixed mask") {
    Fixture f;
    const ManifestEntry* entry = nullptr;
    for (const auto& e : f.manifest.entries) {
      if (e.combo == ModalityCombo::t_i && e.task == Task::ner) entry = &e;
    }
    REQUIRE(entry);
    const Json payload{{"masks", Json::array({{{"width", 16}, {"height", 12}, {"rle", {10, 4, 178}}}})}};
    const Stub stub = Stub::echo(kBox, payload);
    auto uie = make_function_backend(spec_of(BackendKind::uie), [&](const Json& r) { return stub.respond(r); });
    auto seg = make_function_backend(spec_of(BackendKind::image_segmenter), [&](const Json& r) { return stub.respond(r); });
    const RunRecord rec = run_instance(*entry, {{BackendKind::uie, uie.get()}, {BackendKind::image_segmenter, seg.get()}}, {});
    CHECK_FALSE(rec.error);
    CHECK(rec.prediction.entities.size() == 2);
    CHECK(collect_groundings(rec.prediction, Modality::image).size() == 1);
    REQUIRE(rec.calls.size() == 1);
    CHECK(rec.calls[0].kind == BackendKind::image_segmenter);
    CHECK(rec.prompt.find("Please recognize all entity words") != std::string::npos);
  }

  TEST_CASE("unparseable output is an instance error; the run continues") {
    Fixture f;
    const Stub garbage = Stub::echo("I could not find anything.");
    auto uie = make_function_backend(spec_of(BackendKind::uie), [&](const Json& r) { return garbage.respond(r); });
    PredictionStore store = PredictionStore::create(f.dir / "store");
    const auto s = run_pipeline(f.manifest, {{BackendKind::uie, uie.get()}}, {}, store);
    CHECK(s.instances == 30);
    CHECK(s.failed == 30);
    for (const auto& [id, err] : s.errors) CHECK(err.code == "PARSE_ERROR");
    const RunRecord r = PredictionStore::open(f.dir / "store").get(f.manifest.entries[0].instance_id());
    CHECK(r.prediction.entities.empty());
    CHECK(r.error->code == "PARSE_ERROR");
  }

  TEST_CASE("no module calls means no grounding requests") {
    Fixture f;
    std::atomic<int> grounding_requests{0};
    const Stub stub = Stub::echo("<UIE>\n(Trump, person)\n");
    auto uie = make_function_backend(spec_of(BackendKind::uie), [&](const Json& r) { return stub.respond(r); });
    auto seg = make_function_backend(spec_of(BackendKind::image_segmenter), [&](const Json& r) {
      ++grounding_requests;
      return stub.respond(r);
    });
    PredictionStore store = PredictionStore::create(f.dir / "store");
    const auto s = run_pipeline(f.manifest, {{BackendKind::uie, uie.get()}, {BackendKind::image_segmenter, seg.get()}}, {}, store);
    CHECK(s.failed == 0);
    CHECK(grounding_requests == 0);
  }

  TEST_CASE("unknown module keeps tuples, records UNKNOWN_MODULE") {
    Fixture f;
    const Stub stub = Stub::echo("<UIE>\n(Trump, person)\n<Module>\nPixel Wizard\n<Instruction>\nx\n");
    auto uie = make_function_backend(spec_of(BackendKind::uie), [&](const Json& r) { return stub.respond(r); });
    const RunRecord rec = run_instance(f.manifest.entries[0], {{BackendKind::uie, uie.get()}}, {});
    REQUIRE(rec.error);
    CHECK(rec.error->code == "UNKNOWN_MODULE");
    CHECK(rec.prediction.entities.size() == 1);
    CHECK(collect_groundings(rec.prediction, Modality::image).empty());
  }

  TEST_CASE("fault isolation: f failing instances give f coded errors") {
    Fixture f;
    const Stub oracle = Stub::oracle(f.manifest);
    std::set<std::string> failing;
    for (std::size_t i = 0; i < f.manifest.entries.size(); i += 7) failing.insert(f.manifest.entries[i].instance_id() + ":uie");
    std::vector<std::unique_ptr<Backend>> owned;
    auto backends = all_kinds(owned, oracle);
    owned.push_back(make_function_backend(spec_of(BackendKind::uie), [&](const Json& r) {
      if (failing.count(r.at("id").get<std::string>())) {
        return Json{{"id", r.at("id")}, {"error", {{"code", "OOM"}, {"message", "boom"}}}};
      }
      return oracle.respond(r);
    }));
    backends[BackendKind::uie] = owned.back().get();
    PredictionStore store = PredictionStore::create(f.dir / "store");
    HarnessConfig cfg;
    cfg.jobs = 3;
    const auto s = run_pipeline(f.manifest, backends, cfg, store);
    CHECK(s.failed == static_cast<int>(failing.size()));
    for (const auto& [id, err] : s.errors) CHECK(err.code == "BACKEND_ERROR");
    CHECK(store.instance_ids().size() == f.manifest.entries.size());
  }

  TEST_CASE("perfect oracle: every cell 1.0, replay equals live scores, grid census") {
    Fixture f;
    const Stub oracle = Stub::oracle(f.manifest);
    std::vector<std::unique_ptr<Backend>> owned;
    const auto backends = all_kinds(owned, oracle);
    HarnessConfig cfg;
    cfg.jobs = 4;
    PredictionStore store = PredictionStore::create(f.dir / "store");
    const auto s = run_pipeline(f.manifest, backends, cfg, store);
    CHECK(s.failed == 0);

    std::map<std::string, PredictionSet> live;
    for (const auto& e : f.manifest.entries) live[e.instance_id()] = run_instance(e, backends, cfg).prediction;
    const auto live_score = score_predictions(f.manifest, live, kSplits);
    const auto replay = score_store(PredictionStore::open(f.dir / "store"), f.manifest, kSplits, {}, 2);
    CHECK(render_report(live_score.report, ReportFormat::json) == render_report(replay.report, ReportFormat::json));
    CHECK(replay.violations.empty());
    for (const auto& c : replay.report.cells) {
      INFO(c.key.split << " " << to_string(c.key.combo) << " " << c.key.dataset << " " << to_string(c.key.metric));
      CHECK(c.value == 1.0);
    }
    std::set<std::tuple<ModalityCombo, Task, std::string>> cells;
    for (const auto& c : replay.report.cells) {
      if (c.key.split == "all") cells.emplace(c.key.combo, c.key.task, c.key.dataset);
    }
    std::set<std::tuple<ModalityCombo, Task, std::string>> grid;
    for (const auto& g : testing::benchmark_grid()) grid.emplace(g.combo, g.task, g.dataset);
    CHECK(cells == grid);
  }

  TEST_CASE("record bytes do not depend on worker count") {
    Fixture f;
    const Stub stub = Stub::corrupt(f.manifest, 40);
    std::vector<std::unique_ptr<Backend>> owned;
    const auto backends = all_kinds(owned, stub);
    for (int jobs : {1, 5}) {
      HarnessConfig cfg;
      cfg.jobs = jobs;
      PredictionStore store = PredictionStore::create(f.dir / ("store" + std::to_string(jobs)));
      run_pipeline(f.manifest, backends, cfg, store);
    }
    CHECK(slurp(f.dir / "store1/index.json") == slurp(f.dir / "store5/index.json"));
    for (const auto& e : fs::directory_iterator(f.dir / "store1/records")) {
      CHECK(slurp(e.path()) == slurp(f.dir / "store5/records" / e.path().filename()));
    }
  }

  TEST_CASE("empty store: zero tp everywhere") {
    Fixture f;
    const auto out = score_predictions(f.manifest, {}, kSplits);
    for (const auto& c : out.report.cells) {
      if (c.counts) {
        CHECK(c.counts->tp == 0);
        CHECK(c.counts->recall == 0.0);
      }
    }
  }

  TEST_CASE("predictions without gold and invalid groundings become violations") {
    Fixture f;
    std::map<std::string, PredictionSet> preds;
    PredictionSet stray;
    stray.instance_id = "nowhere";
    preds["nowhere"] = stray;
    const ManifestEntry* img = nullptr;
    for (const auto& e : f.manifest.entries) {
      if (e.combo == ModalityCombo::i) img = &e;
    }
    PredictionSet p;
    p.instance_id = img->instance_id();
    p.task = img->task;
    p.groundings.push_back(GroundingRef(ImageMask(3, 3, {9})));
    preds[p.instance_id] = p;
    const auto out = score_predictions(f.manifest, preds, {});
    std::set<std::string> codes;
    for (const auto& v : out.violations) codes.insert(v.code);
    CHECK(codes == std::set<std::string>{"MISSING_GOLD", "PRED_DIMENSION_MISMATCH"});
    CHECK(out.instances.size() == f.manifest.entries.size());
  }

  TEST_CASE("store directory safety and id encoding") {
    Fixture f;
    fs::create_directories(f.dir / "busy");
    std::ofstream(f.dir / "busy" / "keep.txt") << "x";
    CHECK_THROWS_AS(PredictionStore::create(f.dir / "busy"), FormatError);
    CHECK(fs::exists(f.dir / "busy" / "keep.txt"));
    CHECK(encode_instance_id("Twt17/T_I/0") == "Twt17%2FT_I%2F0");
    CHECK(encode_instance_id("..") == "%2E%2E");
  }

  TEST_CASE("corruption selection is nested in k") {
    for (int i = 0; i < 200; ++i) {
      const std::string item = "g" + std::to_string(i);
      bool prev = false;
      for (int k : {0, 25, 50, 100}) {
        const bool now = corrupt_item("inst", item, k);
        CHECK((!prev || now));
        prev = now;
      }
      CHECK_FALSE(corrupt_item("inst", item, 0));
      CHECK(corrupt_item("inst", item, 100));
    }
  }
}
