#include "muie/serialization.hpp"

#include <limits>

namespace muie {

namespace {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'", "SCHEMA_ERROR");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw FormatError(std::string("field '") + key + "' has the wrong type", "SCHEMA_ERROR");
  }
}

std::string text_field(const Json& j, const char* key) { return field<std::string>(j, key); }

int int_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer()) {
    throw FormatError(std::string("field '") + key + "' must be an integer", "SCHEMA_ERROR");
  }
  const auto v = j.at(key).get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw FormatError(std::string("field '") + key + "' out of range", "SCHEMA_ERROR");
  }
  return int(v);
}

}  // namespace

Json to_json(const ImageMask& m) {
  return Json{{"width", m.width()}, {"height", m.height()}, {"rle", m.runs()}};
}

ImageMask mask_from_json(const Json& j) {
  const int w = int_field(j, "width");
  const int h = int_field(j, "height");
  if (!j.contains("rle") || !j.at("rle").is_array()) {
    throw FormatError("mask 'rle' must be an array", "SCHEMA_ERROR");
  }
  std::vector<std::uint32_t> runs;
  runs.reserve(j.at("rle").size());
  for (const auto& r : j.at("rle")) {
    if (!r.is_number_integer() || r.get<long long>() < 0 ||
        r.get<long long>() > std::numeric_limits<std::uint32_t>::max()) {
      throw FormatError("rle runs must be non-negative 32-bit integers", "BAD_RLE");
    }
    runs.push_back(static_cast<std::uint32_t>(r.get<long long>()));
  }
  return ImageMask(w, h, std::move(runs));
}

Json to_json(const AudioSegment& s) { return Json::array({s.start(), s.end()}); }

AudioSegment segment_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw FormatError("segment must be [start, end]", "SCHEMA_ERROR");
  }
  return AudioSegment(j[0].get<double>(), j[1].get<double>());
}

Json to_json(const Tracklet& t) {
  Json j = Json::object();
  for (const auto& [frame, mask] : t.frames()) j[std::to_string(frame)] = to_json(mask);
  return j;
}

Tracklet tracklet_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("tracklet must be an object", "SCHEMA_ERROR");
  std::map<int, ImageMask> frames;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    int frame = -1;
    try {
      frame = std::stoi(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || key.empty()) {
      throw FormatError("tracklet frame key '" + key + "' is not an integer", "SCHEMA_ERROR");
    }
    if (frame < 0) throw FormatError("negative frame index", "FRAME_OUT_OF_RANGE");
    frames.emplace(frame, mask_from_json(value));
  }
  return Tracklet(std::move(frames));
}

Json to_json(const GroundingRef& g) {
  switch (g.modality()) {
    case Modality::image: return Json{{"modality", "image"}, {"mask", to_json(*g.mask())}};
    case Modality::audio: return Json{{"modality", "audio"}, {"segment", to_json(*g.segment())}};
    default: return Json{{"modality", "video"}, {"tracklet", to_json(*g.tracklet())}};
  }
}

GroundingRef grounding_from_json(const Json& j) {
  const Modality m = parse_modality(text_field(j, "modality"));
  switch (m) {
    case Modality::image:
      if (!j.contains("mask")) throw FormatError("image grounding without 'mask'", "SCHEMA_ERROR");
      return mask_from_json(j.at("mask"));
    case Modality::audio:
      if (!j.contains("segment")) throw FormatError("audio grounding without 'segment'", "SCHEMA_ERROR");
      return segment_from_json(j.at("segment"));
    case Modality::video:
      if (!j.contains("tracklet")) {
        throw FormatError("video grounding without 'tracklet'", "SCHEMA_ERROR");
      }
      return tracklet_from_json(j.at("tracklet"));
    default:
      throw FormatError("text is not a grounding modality", "SCHEMA_ERROR");
  }
}

// ---------------------------------------------------------------------------

Json to_json(const Annotation& a) {
  Json groundings = Json::array();
  auto emit = [&](const GroundingSlots& slots, const Json& link) {
    for (const auto& g : slots.all()) {
      Json gj = to_json(g);
      gj["link"] = link;
      groundings.push_back(std::move(gj));
    }
  };

  Json entities = Json::array();
  for (std::size_t i = 0; i < a.entities.size(); ++i) {
    entities.push_back({{"surface", a.entities[i].surface}, {"label", a.entities[i].label}});
    emit(a.entities[i].groundings, {{"entity", i}});
  }
  Json relations = Json::array();
  for (std::size_t i = 0; i < a.relations.size(); ++i) {
    const auto& r = a.relations[i];
    relations.push_back({
        {"subject", {{"surface", r.subject.surface}, {"label", r.subject.label}}},
        {"relation", r.relation},
        {"object", {{"surface", r.object.surface}, {"label", r.object.label}}},
    });
    emit(r.subject.groundings, {{"relation", i}, {"side", "subject"}});
    emit(r.object.groundings, {{"relation", i}, {"side", "object"}});
  }
  Json events = Json::array();
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const auto& e = a.events[i];
    Json args = Json::array();
    for (std::size_t k = 0; k < e.arguments.size(); ++k) {
      args.push_back({{"mention", e.arguments[k].mention}, {"role", e.arguments[k].role}});
      emit(e.arguments[k].groundings, {{"event", i}, {"argument", k}});
    }
    events.push_back({{"trigger", e.trigger}, {"event_type", e.event_type}, {"arguments", args}});
  }
  for (const auto& g : a.groundings) groundings.push_back(to_json(g));

  return Json{
      {"format_version", kAnnotationFormatVersion},
      {"instance_id", a.instance_id},
      {"task", to_string(a.task)},
      {"entities", std::move(entities)},
      {"relations", std::move(relations)},
      {"events", std::move(events)},
      {"groundings", std::move(groundings)},
  };
}

namespace {

EntityMention mention_from_json(const Json& j) {
  EntityMention m;
  m.surface = normalize_mention(text_field(j, "surface"));
  if (j.contains("label")) m.label = normalize_mention(text_field(j, "label"));
  return m;
}

const Json& array_field(const Json& j, const char* key) {
  static const Json empty = Json::array();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_array()) {
    throw FormatError(std::string("field '") + key + "' must be an array", "SCHEMA_ERROR");
  }
  return j.at(key);
}

}  // namespace

Annotation annotation_from_json(const Json& j, const ViolationSink& sink) {
  if (!j.is_object()) throw FormatError("annotation must be a json object", "SCHEMA_ERROR");
  if (j.contains("format_version") && int_field(j, "format_version") != kAnnotationFormatVersion) {
    throw FormatError("unsupported annotation format_version", "UNSUPPORTED_VERSION");
  }
  Annotation a;
  a.instance_id = text_field(j, "instance_id");
  try {
    a.task = parse_task(text_field(j, "task"));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), "UNKNOWN_TASK");
  }
  for (const auto& e : array_field(j, "entities")) a.entities.push_back(mention_from_json(e));
  for (const auto& r : array_field(j, "relations")) {
    RelationTriple t;
    if (!r.contains("subject") || !r.contains("object")) {
      throw FormatError("relation needs 'subject' and 'object'", "SCHEMA_ERROR");
    }
    t.subject = mention_from_json(r.at("subject"));
    t.relation = normalize_mention(text_field(r, "relation"));
    t.object = mention_from_json(r.at("object"));
    a.relations.push_back(std::move(t));
  }
  for (const auto& e : array_field(j, "events")) {
    EventRecord ev;
    ev.trigger = normalize_mention(text_field(e, "trigger"));
    ev.event_type = normalize_mention(text_field(e, "event_type"));
    for (const auto& arg : array_field(e, "arguments")) {
      ev.arguments.push_back({normalize_mention(text_field(arg, "mention")),
                              normalize_mention(text_field(arg, "role")),
                              {}});
    }
    a.events.push_back(std::move(ev));
  }
  try {
    validate(a);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), e.code());
  }

  auto report = [&](const std::string& code, const std::string& message) {
    if (!sink) throw FormatError(message, code);
    sink(code, message);
  };

  const Json& groundings = array_field(j, "groundings");
  for (std::size_t gi = 0; gi < groundings.size(); ++gi) {
    const Json& gj = groundings[gi];
    const std::string where = "grounding " + std::to_string(gi) + ": ";
    std::optional<GroundingRef> ref;
    try {
      ref = grounding_from_json(gj);
    } catch (const Error& e) {
      report(e.code(), where + e.what());
      continue;
    }
    if (!gj.contains("link") || gj.at("link").is_null()) {
      a.groundings.push_back(std::move(*ref));
      continue;
    }
    const Json& link = gj.at("link");
    auto index = [&](const char* key, std::size_t bound) -> std::optional<std::size_t> {
      if (!link.contains(key) || !link.at(key).is_number_integer()) return std::nullopt;
      const long long v = link.at(key).get<long long>();
      if (v < 0 || std::size_t(v) >= bound) return std::nullopt;
      return std::size_t(v);
    };
    GroundingSlots* slots = nullptr;
    if (link.contains("entity")) {
      if (auto i = index("entity", a.entities.size())) slots = &a.entities[*i].groundings;
    } else if (link.contains("relation")) {
      if (auto i = index("relation", a.relations.size())) {
        const std::string side = link.value("side", "");
        if (side == "subject") slots = &a.relations[*i].subject.groundings;
        if (side == "object") slots = &a.relations[*i].object.groundings;
      }
    } else if (link.contains("event")) {
      if (auto i = index("event", a.events.size())) {
        if (auto k = index("argument", a.events[*i].arguments.size())) {
          slots = &a.events[*i].arguments[*k].groundings;
        }
      }
    }
    if (!slots) {
      report("BAD_LINK_INDEX", where + "link " + link.dump() + " does not name a record");
      continue;
    }
    if (!slots->attach(*ref)) {
      report("DUPLICATE_GROUNDING",
             where + "mention already has a " + std::string(to_string(ref->modality())) +
                 " grounding");
    }
  }
  return a;
}

Json to_json(const MetaResponse& m) {
  Json entities = Json::array();
  for (const auto& e : m.entities) {
    entities.push_back({{"surface", e.mention.surface},
                        {"label", e.mention.label},
                        {"concept", e.concept_marker}});
  }
  Json relations = Json::array();
  for (const auto& r : m.relations) {
    relations.push_back({{"subject", r.triple.subject.surface},
                         {"relation", r.triple.relation},
                         {"object", r.triple.object.surface},
                         {"subject_concept", r.subject_concept},
                         {"object_concept", r.object_concept}});
  }
  Json events = Json::array();
  for (const auto& ev : m.events) {
    Json args = Json::array();
    for (std::size_t k = 0; k < ev.event.arguments.size(); ++k) {
      args.push_back({{"role", ev.event.arguments[k].role},
                      {"mention", ev.event.arguments[k].mention},
                      {"concept", k < ev.argument_concept.size() && ev.argument_concept[k]}});
    }
    events.push_back({{"trigger", ev.event.trigger},
                      {"event_type", ev.event.event_type},
                      {"trigger_concept", ev.trigger_concept},
                      {"arguments", std::move(args)}});
  }
  Json calls = Json::array();
  for (const auto& c : m.module_calls) {
    calls.push_back({{"module", c.module}, {"instruction", c.instruction}});
  }
  Json warnings = Json::array();
  for (const auto& w : m.warnings) warnings.push_back({{"offset", w.offset}, {"message", w.message}});
  return Json{{"task", to_string(m.task)}, {"entities", std::move(entities)},
              {"relations", std::move(relations)}, {"events", std::move(events)},
              {"module_calls", std::move(calls)}, {"warnings", std::move(warnings)}};
}

}  // namespace muie
