#include "muie/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace muie {

namespace {

constexpr int kStoreFormatVersion = 1;

std::string dump(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string(), "IO_ERROR");
  out << text;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), "MISSING_FILE");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": invalid json: " + e.what(), "SCHEMA_ERROR");
  }
}

Json error_json(const std::optional<RunError>& e) {
  if (!e) return nullptr;
  return {{"code", e->code}, {"message", e->message}};
}

std::optional<RunError> error_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return RunError{j.at("code").get<std::string>(), j.at("message").get<std::string>()};
}

// Runs fn(i) for i in [0, n) on `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunRecord json

Json to_json(const RunRecord& r) {
  Json warnings = Json::array();
  for (const auto& w : r.warnings) warnings.push_back({{"offset", w.offset}, {"message", w.message}});
  Json calls = Json::array();
  for (const auto& c : r.calls) {
    Json payloads = Json::array();
    for (const auto& p : c.payloads) payloads.push_back(to_json(p));
    calls.push_back({{"module", c.call.module},
                     {"instruction", c.call.instruction},
                     {"kind", c.kind ? Json(to_string(*c.kind)) : Json(nullptr)},
                     {"payloads", std::move(payloads)},
                     {"error", error_json(c.error)}});
  }
  return {{"format_version", kStoreFormatVersion},
          {"instance_id", r.instance_id},
          {"task", to_string(r.task)},
          {"prompt", r.prompt},
          {"meta_response", r.meta_response},
          {"warnings", std::move(warnings)},
          {"calls", std::move(calls)},
          {"prediction", to_json(r.prediction)},
          {"error", error_json(r.error)}};
}

RunRecord run_record_from_json(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != kStoreFormatVersion) {
      throw FormatError("run record: unsupported format_version", "UNSUPPORTED_VERSION");
    }
    RunRecord r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.task = parse_task(j.at("task").get<std::string>());
    r.prompt = j.at("prompt").get<std::string>();
    r.meta_response = j.at("meta_response").get<std::string>();
    for (const auto& w : j.at("warnings")) {
      r.warnings.push_back({w.at("offset").get<std::size_t>(), w.at("message").get<std::string>()});
    }
    for (const auto& c : j.at("calls")) {
      CallRecord cr;
      cr.call = {c.at("module").get<std::string>(), c.at("instruction").get<std::string>()};
      if (!c.at("kind").is_null()) cr.kind = parse_backend_kind(c.at("kind").get<std::string>());
      for (const auto& p : c.at("payloads")) cr.payloads.push_back(grounding_from_json(p));
      cr.error = error_from_json(c.at("error"));
      r.calls.push_back(std::move(cr));
    }
    r.prediction = annotation_from_json(j.at("prediction"));
    r.error = error_from_json(j.at("error"));
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("run record: ") + e.what(), "SCHEMA_ERROR");
  }
}

// ---------------------------------------------------------------------------
// PredictionStore

std::string encode_instance_id(const std::string& id) {
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '_' || c == '-') {
      out += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

PredictionStore PredictionStore::create(const fs::path& dir) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw FormatError(dir.string() + " is not a directory", "STORE_EXISTS");
    const bool empty = fs::directory_iterator(dir) == fs::directory_iterator();
    if (!empty && !fs::exists(dir / "index.json")) {
      throw FormatError(dir.string() + " is not empty and holds no prediction store",
                        "STORE_EXISTS");
    }
    fs::remove_all(dir / "records");
    fs::remove_all(dir / "timings");
    fs::remove(dir / "index.json");
  }
  fs::create_directories(dir / "records");
  fs::create_directories(dir / "timings");
  return PredictionStore(dir);
}

PredictionStore PredictionStore::open(const fs::path& dir) {
  const Json index = read_json(dir / "index.json");
  PredictionStore store(dir);
  try {
    if (index.at("format_version").get<int>() != kStoreFormatVersion) {
      throw FormatError("index.json: unsupported format_version", "UNSUPPORTED_VERSION");
    }
    for (const auto& e : index.at("instances")) {
      std::optional<std::string> code;
      if (!e.at("error").is_null()) code = e.at("error").get<std::string>();
      store.index_[e.at("instance_id").get<std::string>()] = code;
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("index.json: ") + e.what(), "SCHEMA_ERROR");
  }
  return store;
}

void PredictionStore::put(const RunRecord& r) {
  const std::string stem = encode_instance_id(r.instance_id);
  write_text(dir_ / "records" / (stem + ".json"), dump(to_json(r)));
  Json timings = Json::object();
  for (const auto& t : r.timings) timings[t.stage] = t.seconds;
  write_text(dir_ / "timings" / (stem + ".json"), dump(timings));
  index_[r.instance_id] = r.error ? std::optional<std::string>(r.error->code) : std::nullopt;
}

void PredictionStore::finalize() {
  Json instances = Json::array();
  for (const auto& [id, code] : index_) {
    instances.push_back({{"instance_id", id},
                         {"record", "records/" + encode_instance_id(id) + ".json"},
                         {"error", code ? Json(*code) : Json(nullptr)}});
  }
  write_text(dir_ / "index.json",
             dump({{"format_version", kStoreFormatVersion}, {"instances", std::move(instances)}}));
}

std::vector<std::string> PredictionStore::instance_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, code] : index_) out.push_back(id);
  return out;
}

RunRecord PredictionStore::get(const std::string& instance_id) const {
  return run_record_from_json(read_json(dir_ / "records" / (encode_instance_id(instance_id) + ".json")));
}

// ---------------------------------------------------------------------------
// pipeline

RunRecord run_instance(const ManifestEntry& entry, const std::map<BackendKind, Backend*>& backends,
                       const HarnessConfig& config) {
  using clock = std::chrono::steady_clock;
  RunRecord rec;
  rec.instance_id = entry.instance_id();
  rec.task = entry.task;
  rec.prediction.instance_id = rec.instance_id;
  rec.prediction.task = entry.task;
  auto t0 = clock::now();
  auto lap = [&](const char* stage) {
    const auto now = clock::now();
    rec.timings.push_back({stage, std::chrono::duration<double>(now - t0).count()});
    t0 = now;
  };
  auto fail = [&](std::string code, std::string message) {
    if (!rec.error) rec.error = RunError{std::move(code), std::move(message)};
  };

  const ModalityBundle& b = entry.bundle;
  try {
    PromptSpec spec;
    spec.task = entry.task;
    spec.label_schema = entry.labels;
    spec.argument_roles = entry.argument_roles;
    for (Modality m : modalities(entry.combo)) spec.modalities_present.insert(m);
    if (b.text) spec.input_text = *b.text;
    rec.prompt = build_prompt(spec);
  } catch (const Error& e) {
    fail("BAD_PROMPT", e.what());
    return rec;
  }
  lap("prompt");

  std::vector<Attachment> attachments;
  if (b.image) attachments.push_back({Modality::image, b.image->path});
  if (b.audio) attachments.push_back({Modality::audio, b.audio->path});
  if (b.video) attachments.push_back({Modality::video, b.video->path});
  try {
    Backend* uie = backends.at(BackendKind::uie);
    rec.meta_response = uie_reply_text(uie->call(make_uie_request(rec.instance_id + ":uie", rec.prompt, attachments)));
  } catch (const Error& e) {
    fail(e.code(), e.what());
    return rec;
  }
  lap("uie");

  MetaResponse meta;
  try {
    meta = parse_meta_response(rec.meta_response, entry.task);
  } catch (const ParseError& e) {
    fail("PARSE_ERROR", e.what());
    return rec;
  }
  rec.warnings = meta.warnings;
  lap("parse");

  std::vector<GroundingResult> results;
  for (std::size_t k = 0; k < meta.module_calls.size(); ++k) {
    CallRecord cr;
    cr.call = meta.module_calls[k];
    auto call_fail = [&](std::string code, std::string message) {
      cr.error = RunError{code, message};
      fail(std::move(code), std::move(message));
    };
    const auto kind = config.module_kinds.find(cr.call.module);
    if (kind == config.module_kinds.end()) {
      call_fail("UNKNOWN_MODULE", "no backend kind for module '" + cr.call.module + "'");
    } else {
      cr.kind = kind->second;
      const Modality m = grounding_modality(kind->second);
      const auto backend = backends.find(kind->second);
      std::optional<std::string> source;
      if (m == Modality::image && b.image) source = b.image->path;
      if (m == Modality::audio && b.audio) source = b.audio->path;
      if (m == Modality::video && b.video) source = b.video->path;
      if (backend == backends.end() || backend->second == nullptr) {
        call_fail("NO_BACKEND", "no " + std::string(to_string(kind->second)) + " backend configured");
      } else if (!source) {
        call_fail("MODALITY_MISMATCH", "module '" + cr.call.module + "' needs " +
                                           std::string(to_string(m)) + " input");
      } else {
        try {
          const Json reply = backend->second->call(make_grounding_request(
              rec.instance_id + ":call" + std::to_string(k), cr.call.module, cr.call.instruction,
              {m, *source}));
          cr.payloads = grounding_reply_payloads(reply, m);
          for (const auto& p : cr.payloads) results.push_back({k, p});
        } catch (const Error& e) {
          call_fail(e.code(), e.what());
        }
      }
    }
    rec.calls.push_back(std::move(cr));
  }
  lap("grounding");

  rec.prediction = link_groundings(meta, results, rec.instance_id);
  lap("link");
  return rec;
}

RunSummary run_pipeline(const Manifest& manifest, const std::map<BackendKind, Backend*>& backends,
                        const HarnessConfig& config, PredictionStore& store) {
  if (!backends.count(BackendKind::uie) || backends.at(BackendKind::uie) == nullptr) {
    throw InvalidArgument("run_pipeline needs exactly one uie backend", "NO_UIE_BACKEND");
  }

  std::mutex m;
  std::condition_variable cv;
  std::deque<RunRecord> queue;
  std::size_t produced = 0;
  const std::size_t n = manifest.entries.size();

  RunSummary summary;
  summary.instances = static_cast<int>(n);
  std::exception_ptr worker_failure;

  std::thread producer([&] {
    try {
      parallel_for(n, config.jobs, [&](std::size_t i) {
        RunRecord r = run_instance(manifest.entries[i], backends, config);
        {
          std::lock_guard lock(m);
          queue.push_back(std::move(r));
        }
        cv.notify_one();
      });
    } catch (...) {
      worker_failure = std::current_exception();
    }
    {
      std::lock_guard lock(m);
      produced = n + 1;  // sentinel: no more records
    }
    cv.notify_one();
  });

  // Single writer: this thread owns the store and the summary.
  for (;;) {
    std::unique_lock lock(m);
    cv.wait(lock, [&] { return !queue.empty() || produced > n; });
    if (queue.empty()) break;
    RunRecord r = std::move(queue.front());
    queue.pop_front();
    lock.unlock();
    if (r.error) {
      ++summary.failed;
      summary.errors.emplace_back(r.instance_id, *r.error);
    }
    store.put(r);
  }
  producer.join();
  if (worker_failure) std::rethrow_exception(worker_failure);
  store.finalize();
  std::sort(summary.errors.begin(), summary.errors.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return summary;
}

RunSummary run_pipeline(const Manifest& manifest, const std::vector<BackendSpec>& specs,
                        const HarnessConfig& config, PredictionStore& store) {
  std::vector<std::unique_ptr<Backend>> owned;
  std::map<BackendKind, Backend*> backends;
  for (const auto& s : specs) {
    if (backends.count(s.kind)) {
      throw InvalidArgument("more than one " + std::string(to_string(s.kind)) + " backend",
                            "DUPLICATE_BACKEND");
    }
    backends[s.kind] = nullptr;
  }
  if (!backends.count(BackendKind::uie)) {
    throw InvalidArgument("run_pipeline needs exactly one uie backend", "NO_UIE_BACKEND");
  }
  for (const auto& s : specs) {
    owned.push_back(connect(s));
    backends[s.kind] = owned.back().get();
  }
  return run_pipeline(manifest, backends, config, store);
}

// ---------------------------------------------------------------------------
// scoring

ScoreOutcome score_predictions(const Manifest& manifest,
                               const std::map<std::string, PredictionSet>& predictions,
                               std::span<const std::string> split_keys, const ScoringOptions& opts,
                               int jobs) {
  // Validate split keys before doing any work.
  (void)aggregate({}, split_keys, opts);

  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<InstanceScores>> scored(n);
  std::vector<std::vector<Violation>> found(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    GoldAnnotation gold;
    try {
      gold = load_gold(e);
    } catch (const CorpusError& err) {
      found[i] = err.violations();
      return;
    }
    PredictionSet pred;
    pred.instance_id = e.instance_id();
    pred.task = e.task;
    if (const auto it = predictions.find(e.instance_id()); it != predictions.end()) {
      if (it->second.task != e.task) {
        found[i].push_back({e.instance_id(), "PRED_TASK_MISMATCH",
                            "prediction task " + std::string(to_string(it->second.task)) +
                                " != " + std::string(to_string(e.task)),
                            {}});
      } else {
        pred = it->second;
        for (auto& v : check_groundings(pred, e.bundle, true)) {
          v.code = "PRED_" + v.code;
          found[i].push_back(std::move(v));
        }
      }
    }
    InstanceInfo info{e.instance_id(), e.dataset, e.combo, e.task, e.bundle.alignment};
    scored[i] = score_instance(info, gold, pred, opts);
  });

  ScoreOutcome out;
  for (std::size_t i = 0; i < n; ++i) {
    if (scored[i]) out.instances.push_back(std::move(*scored[i]));
    out.violations.insert(out.violations.end(), found[i].begin(), found[i].end());
  }
  for (const auto& [id, pred] : predictions) {
    if (!manifest.find(id)) {
      out.violations.push_back({id, "MISSING_GOLD", "prediction for an instance not in the manifest", {}});
    }
  }
  std::sort(out.violations.begin(), out.violations.end());
  out.report = aggregate(out.instances, split_keys, opts);
  return out;
}

ScoreOutcome score_store(const PredictionStore& store, const Manifest& manifest,
                         std::span<const std::string> split_keys, const ScoringOptions& opts,
                         int jobs) {
  std::map<std::string, PredictionSet> preds;
  for (const auto& id : store.instance_ids()) preds.emplace(id, store.get(id).prediction);
  return score_predictions(manifest, preds, split_keys, opts, jobs);
}

std::map<std::string, PredictionSet> load_prediction_dir(const fs::path& dir,
                                                         std::vector<Violation>& violations) {
  if (!fs::is_directory(dir)) throw FormatError(dir.string() + " is not a directory", "MISSING_FILE");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, PredictionSet> out;
  for (const auto& f : files) {
    try {
      Annotation a = read_annotation(f);
      const std::string id = a.instance_id;
      if (!out.emplace(id, std::move(a)).second) {
        violations.push_back({id, "DUPLICATE_ID", "second prediction file for this instance", f.string()});
      }
    } catch (const Error& e) {
      violations.push_back({f.stem().string(), e.code(), e.what(), f.string()});
    }
  }
  return out;
}

}  // namespace muie
