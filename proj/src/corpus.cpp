#include "muie/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "muie/serialization.hpp"

namespace fs = std::filesystem;

namespace muie {

const ManifestEntry* Manifest::find(const std::string& instance_id) const {
  for (const auto& e : entries) {
    if (e.instance_id() == instance_id) return &e;
  }
  return nullptr;
}

bool operator<(const Violation& a, const Violation& b) {
  return std::tie(a.instance_id, a.code, a.message, a.path) <
         std::tie(b.instance_id, b.code, b.message, b.path);
}

CorpusError::CorpusError(std::vector<Violation> violations)
    : Error(violations.empty() ? "CORPUS_ERROR" : violations.front().code,
            violations.empty() ? "corpus error"
                               : violations.front().message +
                                     (violations.size() > 1
                                          ? " (+" + std::to_string(violations.size() - 1) +
                                                " more)"
                                          : "")),
      violations_(std::move(violations)) {}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), "MISSING_FILE");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void fail(std::size_t line, const std::string& code, const std::string& message) {
  throw FormatError("line " + std::to_string(line) + ": " + message, code);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::vector<std::string> string_list(const Json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) return {};
  if (!j.at(key).is_array()) fail(line, "SCHEMA_ERROR", std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_string()) fail(line, "SCHEMA_ERROR", std::string("'") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

ManifestEntry parse_entry(const Json& j, std::size_t line, const fs::path& base) {
  ManifestEntry e;
  e.line = line;
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string()) {
      fail(line, "SCHEMA_ERROR", std::string("missing string field '") + key + "'");
    }
    return j.at(key).get<std::string>();
  };
  auto num = [&](const Json& obj, const char* key) -> double {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number()) {
      fail(line, "SCHEMA_ERROR", std::string("missing numeric field '") + key + "'");
    }
    return obj.at(key).get<double>();
  };
  auto integer = [&](const Json& obj, const char* key) -> int {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number_integer()) {
      fail(line, "SCHEMA_ERROR", std::string("missing integer field '") + key + "'");
    }
    return obj.at(key).get<int>();
  };
  auto path_of = [&](const Json& obj) -> std::string {
    if (!obj.is_object() || !obj.contains("path") || !obj.at("path").is_string()) {
      fail(line, "SCHEMA_ERROR", "media reference without 'path'");
    }
    return resolve(base, obj.at("path").get<std::string>()).string();
  };

  if (j.contains("format_version") &&
      (!j.at("format_version").is_number_integer() ||
       j.at("format_version").get<int>() != kManifestFormatVersion)) {
    fail(line, "UNSUPPORTED_VERSION", "unsupported format_version");
  }
  e.bundle.instance_id = str("instance_id");
  if (e.bundle.instance_id.empty()) fail(line, "SCHEMA_ERROR", "empty instance_id");
  e.dataset = j.contains("dataset") ? str("dataset") : std::string();
  try {
    e.combo = parse_modality_combo(str("modality_combo"));
  } catch (const InvalidArgument& ex) {
    fail(line, "UNKNOWN_COMBO", ex.what());
  }
  try {
    e.task = parse_task(str("task"));
  } catch (const InvalidArgument& ex) {
    fail(line, "UNKNOWN_TASK", ex.what());
  }
  try {
    e.bundle.alignment = j.contains("alignment") ? parse_alignment(str("alignment")) : Alignment::shared;
  } catch (const InvalidArgument& ex) {
    fail(line, "SCHEMA_ERROR", ex.what());
  }
  if (j.contains("text")) e.bundle.text = str("text");
  if (j.contains("image")) {
    const Json& m = j.at("image");
    e.bundle.image = ImageRef{path_of(m), integer(m, "width"), integer(m, "height")};
  }
  if (j.contains("audio")) {
    const Json& m = j.at("audio");
    e.bundle.audio = AudioRef{path_of(m), num(m, "duration")};
  }
  if (j.contains("video")) {
    const Json& m = j.at("video");
    e.bundle.video = VideoRef{path_of(m), integer(m, "frame_count"), num(m, "fps"),
                              integer(m, "width"), integer(m, "height")};
  }
  try {
    validate(e.bundle);
  } catch (const InvalidArgument& ex) {
    fail(line, "SCHEMA_ERROR", ex.what());
  }
  for (Modality m : {Modality::text, Modality::image, Modality::audio, Modality::video}) {
    if (e.bundle.has(m) != includes(e.combo, m)) {
      fail(line, "MODALITY_MISMATCH",
           std::string("modality '") + std::string(to_string(m)) +
               (e.bundle.has(m) ? "' present but not in " : "' missing for ") +
               std::string(to_string(e.combo)));
    }
  }
  e.gold_path = resolve(base, str("gold"));
  e.labels = string_list(j, "labels", line);
  e.argument_roles = string_list(j, "argument_roles", line);

  std::vector<std::string> files{e.gold_path.string()};
  if (e.bundle.image) files.push_back(e.bundle.image->path);
  if (e.bundle.audio) files.push_back(e.bundle.audio->path);
  if (e.bundle.video) files.push_back(e.bundle.video->path);
  for (const auto& f : files) {
    if (!fs::exists(f)) fail(line, "MISSING_FILE", "referenced file does not exist: " + f);
  }
  return e;
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
  const std::string content = read_file(path);
  Manifest m;
  m.directory = path.parent_path();
  std::map<std::string, std::size_t> seen;
  bool header_seen = false;

  std::istringstream in(content);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.find_first_not_of(" \t") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(raw);
    } catch (const Json::exception& ex) {
      fail(line, "PARSE_ERROR", std::string("invalid json: ") + ex.what());
    }
    if (!j.is_object()) fail(line, "PARSE_ERROR", "expected a json object");
    if (!j.contains("instance_id")) {
      if (header_seen || !m.entries.empty() || !j.contains("corpus")) {
        fail(line, "SCHEMA_ERROR", "entry without instance_id");
      }
      if (!j.contains("format_version") || !j.at("format_version").is_number_integer() ||
          j.at("format_version").get<int>() != kManifestFormatVersion) {
        fail(line, "UNSUPPORTED_VERSION", "header needs format_version 1");
      }
      m.corpus = j.value("corpus", "");
      m.version = j.value("version", "");
      header_seen = true;
      continue;
    }
    ManifestEntry e = parse_entry(j, line, m.directory);
    const auto [it, inserted] = seen.emplace(e.instance_id(), line);
    if (!inserted) {
      fail(line, "DUPLICATE_ID",
           "instance_id '" + e.instance_id() + "' duplicates line " + std::to_string(it->second) +
               " (lines " + std::to_string(it->second) + " and " + std::to_string(line) + ")");
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) m.warnings.push_back("manifest has no entries");
  if (!header_seen && !m.entries.empty()) {
    m.warnings.push_back("manifest has no header line; assuming format_version 1");
  }
  return m;
}

std::vector<Violation> check_groundings(Annotation& a, const ModalityBundle& bundle,
                                        bool remove_invalid) {
  std::vector<Violation> out;
  auto problem = [&](const GroundingRef& g) -> std::optional<Violation> {
    auto v = [&](std::string code, std::string msg) {
      return Violation{bundle.instance_id, std::move(code), std::move(msg), {}};
    };
    if (!bundle.has(g.modality())) {
      return v("MODALITY_MISMATCH", std::string(to_string(g.modality())) +
                                        " grounding but the instance has no such input");
    }
    if (const auto* m = g.mask()) {
      if (m->width() != bundle.image->width || m->height() != bundle.image->height) {
        return v("DIMENSION_MISMATCH", "mask " + std::to_string(m->width()) + "x" +
                                           std::to_string(m->height()) + " vs image " +
                                           std::to_string(bundle.image->width) + "x" +
                                           std::to_string(bundle.image->height));
      }
    } else if (const auto* s = g.segment()) {
      if (s->end() > bundle.audio->duration) {
        return v("SEGMENT_OUT_OF_RANGE", "segment ends at " + std::to_string(s->end()) +
                                             "s, audio lasts " +
                                             std::to_string(bundle.audio->duration) + "s");
      }
    } else if (const auto* t = g.tracklet()) {
      if (t->width() != bundle.video->width || t->height() != bundle.video->height) {
        return v("DIMENSION_MISMATCH", "tracklet masks do not match video dimensions");
      }
      if (t->frames().rbegin()->first >= bundle.video->frame_count) {
        return v("FRAME_OUT_OF_RANGE", "frame " + std::to_string(t->frames().rbegin()->first) +
                                           " >= frame_count " +
                                           std::to_string(bundle.video->frame_count));
      }
    }
    return std::nullopt;
  };

  auto check_list = [&](std::vector<GroundingRef>& refs) {
    std::vector<GroundingRef> kept;
    for (auto& g : refs) {
      if (auto v = problem(g)) {
        out.push_back(*v);
        if (remove_invalid) continue;
      }
      kept.push_back(std::move(g));
    }
    refs = std::move(kept);
  };
  auto check_slots = [&](GroundingSlots& slots) {
    GroundingSlots kept;
    for (const auto& g : slots.all()) {
      if (auto v = problem(g)) {
        out.push_back(*v);
        if (remove_invalid) continue;
      }
      kept.attach(g);
    }
    slots = std::move(kept);
  };
  for (auto& e : a.entities) check_slots(e.groundings);
  for (auto& r : a.relations) {
    check_slots(r.subject.groundings);
    check_slots(r.object.groundings);
  }
  for (auto& ev : a.events) {
    for (auto& arg : ev.arguments) check_slots(arg.groundings);
  }
  check_list(a.groundings);
  return out;
}

GoldAnnotation load_gold(const fs::path& path, const ModalityBundle& bundle, Task expected_task) {
  std::vector<Violation> violations;
  auto add = [&](const std::string& code, const std::string& message) {
    violations.push_back({bundle.instance_id, code, message, path.string()});
  };
  Annotation a;
  try {
    const Json j = Json::parse(read_file(path));
    a = annotation_from_json(j, add);
  } catch (const Json::exception& e) {
    add("SCHEMA_ERROR", std::string("invalid json: ") + e.what());
    throw CorpusError(std::move(violations));
  } catch (const Error& e) {
    add(e.code(), e.what());
    throw CorpusError(std::move(violations));
  }
  if (a.instance_id != bundle.instance_id) {
    add("ID_MISMATCH", "gold instance_id '" + a.instance_id + "' != manifest '" +
                           bundle.instance_id + "'");
  }
  if (a.task != expected_task) {
    add("TASK_MISMATCH", "gold task " + std::string(to_string(a.task)) + " != manifest task " +
                             std::string(to_string(expected_task)));
  }
  for (auto& v : check_groundings(a, bundle, false)) {
    v.path = path.string();
    violations.push_back(std::move(v));
  }
  if (!violations.empty()) throw CorpusError(std::move(violations));
  return a;
}

GoldAnnotation load_gold(const ManifestEntry& entry) {
  return load_gold(entry.gold_path, entry.bundle, entry.task);
}

CorpusValidation validate_corpus(const Manifest& manifest) {
  CorpusValidation out;
  for (const auto& e : manifest.entries) {
    ++out.partition[std::string(to_string(e.bundle.alignment))];
    try {
      (void)load_gold(e);
    } catch (const CorpusError& err) {
      out.violations.insert(out.violations.end(), err.violations().begin(), err.violations().end());
    }
  }
  std::sort(out.violations.begin(), out.violations.end());
  return out;
}

void write_annotation(const fs::path& path, const Annotation& a) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string(), "IO_ERROR");
  out << to_json(a).dump(2, ' ', false, Json::error_handler_t::replace) << "\n";
}

Annotation read_annotation(const fs::path& path) {
  try {
    return annotation_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": invalid json: " + e.what(), "SCHEMA_ERROR");
  }
}

}  // namespace muie
