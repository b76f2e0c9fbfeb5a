#include "muie/stubs.hpp"

#include "muie/backend.hpp"

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>

namespace muie {

namespace {

struct OracleCall {
  std::string mention;  // empty for instance-level groundings
  GroundingRef ref;
};

std::vector<OracleCall> oracle_calls(const GoldAnnotation& gold) {
  std::vector<OracleCall> out;
  auto add = [&](const std::string& mention, const GroundingSlots& slots) {
    for (const auto& g : slots.all()) out.push_back({mention, g});
  };
  for (const auto& e : gold.entities) add(e.surface, e.groundings);
  for (const auto& r : gold.relations) {
    add(r.subject.surface, r.subject.groundings);
    add(r.object.surface, r.object.groundings);
  }
  for (const auto& ev : gold.events) {
    for (const auto& a : ev.arguments) add(a.mention, a.groundings);
  }
  for (const auto& g : gold.groundings) out.push_back({"", g});
  return out;
}

ModuleCall module_call_for(const OracleCall& c) {
  ModuleCall call;
  std::string verb;
  switch (c.ref.modality()) {
    case Modality::image: call.module = "Image Segmenter"; verb = "Segmentation"; break;
    case Modality::audio: call.module = "Audio Segmenter"; verb = "Segmentation"; break;
    case Modality::video: call.module = "Video Tracker"; verb = "Tracking"; break;
    case Modality::text: break;
  }
  call.instruction = c.mention.empty() ? verb + ": all grounded regions"
                                       : verb + ": \"" + c.mention + "\"";
  return call;
}

std::uint64_t fnv1a(std::string_view a, std::string_view b) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (unsigned char c : a) mix(c);
  mix(0x1f);
  for (unsigned char c : b) mix(c);
  return h;
}

constexpr const char* kCorruptSuffix = " corrupted";

GroundingRef corrupt_payload(const GroundingRef& g, const GoldAnnotation& gold,
                             const ModalityBundle& bundle) {
  if (const auto* m = g.mask()) {
    return GroundingRef(ImageMask(m->width(), m->height(),
                                  {static_cast<std::uint32_t>(m->width() * m->height())}));
  }
  if (const auto* t = g.tracklet()) {
    std::map<int, ImageMask> frames;
    for (const auto& [f, mask] : t->frames()) {
      frames.emplace(f, ImageMask(mask.width(), mask.height(),
                                  {static_cast<std::uint32_t>(mask.width() * mask.height())}));
    }
    return GroundingRef(Tracklet(std::move(frames)));
  }
  // Audio: a short segment after every gold segment, so it overlaps none.
  double max_end = 0.0;
  for (const auto& ref : collect_groundings(gold, Modality::audio)) {
    max_end = std::max(max_end, ref.segment()->end());
  }
  const double duration = bundle.audio ? bundle.audio->duration : max_end + 1.0;
  const double room = duration - max_end;
  if (room > 1e-6) return GroundingRef(AudioSegment(max_end + room / 4, max_end + room / 2));
  return GroundingRef(AudioSegment(max_end + 1.0, max_end + 2.0));
}

Json error_reply(const Json& request, const std::string& code, const std::string& message) {
  Json id = request.is_object() && request.contains("id") ? request.at("id") : Json(nullptr);
  return {{"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

MetaResponse oracle_meta_response(const GoldAnnotation& gold) {
  MetaResponse m;
  m.task = gold.task;
  for (const auto& e : gold.entities) {
    ParsedEntity p;
    p.mention = EntityMention{e.surface, e.label, {}};
    m.entities.push_back(std::move(p));
  }
  for (const auto& r : gold.relations) {
    ParsedRelation p;
    p.triple.subject = EntityMention{r.subject.surface, r.subject.label, {}};
    p.triple.relation = r.relation;
    p.triple.object = EntityMention{r.object.surface, r.object.label, {}};
    m.relations.push_back(std::move(p));
  }
  for (const auto& ev : gold.events) {
    ParsedEvent p;
    p.event.trigger = ev.trigger;
    p.event.event_type = ev.event_type;
    for (const auto& a : ev.arguments) p.event.arguments.push_back({a.mention, a.role, {}});
    p.argument_concept.assign(ev.arguments.size(), 0);
    m.events.push_back(std::move(p));
  }
  for (const auto& c : oracle_calls(gold)) m.module_calls.push_back(module_call_for(c));
  return m;
}

std::vector<GroundingRef> oracle_groundings(const GoldAnnotation& gold) {
  std::vector<GroundingRef> out;
  for (auto& c : oracle_calls(gold)) out.push_back(std::move(c.ref));
  return out;
}

bool corrupt_item(const std::string& instance_id, const std::string& item, int percent) {
  return static_cast<int>(fnv1a(instance_id, item) % 100) < percent;
}

Stub Stub::echo(std::string text, std::optional<Json> grounding_reply) {
  Stub s;
  s.mode_ = Mode::echo;
  s.text_ = std::move(text);
  s.grounding_reply_ = std::move(grounding_reply);
  return s;
}

Stub Stub::oracle(const Manifest& manifest) {
  Stub s;
  s.mode_ = Mode::oracle;
  for (const auto& e : manifest.entries) {
    s.gold_.emplace(e.instance_id(), load_gold(e));
    s.bundles_.emplace(e.instance_id(), e.bundle);
  }
  return s;
}

Stub Stub::corrupt(const Manifest& manifest, int percent) {
  if (percent < 0 || percent > 100) throw InvalidArgument("corruption percent must be in [0, 100]");
  Stub s = oracle(manifest);
  s.mode_ = Mode::corrupt;
  s.percent_ = percent;
  return s;
}

GoldAnnotation Stub::corrupted(const GoldAnnotation& gold) const {
  GoldAnnotation g = gold;
  if (mode_ != Mode::corrupt) return g;
  const std::string& id = gold.instance_id;
  for (std::size_t i = 0; i < g.entities.size(); ++i) {
    if (corrupt_item(id, "e" + std::to_string(i), percent_)) g.entities[i].label += kCorruptSuffix;
  }
  for (std::size_t i = 0; i < g.relations.size(); ++i) {
    if (corrupt_item(id, "r" + std::to_string(i), percent_)) g.relations[i].relation += kCorruptSuffix;
  }
  for (std::size_t i = 0; i < g.events.size(); ++i) {
    if (corrupt_item(id, "v" + std::to_string(i), percent_)) g.events[i].event_type += kCorruptSuffix;
  }
  return g;
}

Json Stub::respond(const Json& request) const {
  if (!request.is_object() || !request.contains("id") || !request.at("id").is_string()) {
    return error_reply(request, "BAD_REQUEST", "request without string id");
  }
  const std::string id = request.at("id").get<std::string>();
  const bool is_uie = request.contains("prompt");
  const bool is_grounding = request.contains("module");
  if (is_uie == is_grounding) return error_reply(request, "BAD_REQUEST", "cannot tell request type");

  if (mode_ == Mode::echo) {
    if (is_uie) return {{"id", id}, {"text", text_}};
    if (!grounding_reply_) return error_reply(request, "NO_PAYLOAD", "echo stub has no grounding payload");
    Json reply = *grounding_reply_;
    reply["id"] = id;
    return reply;
  }

  // "<instance>:uie" or "<instance>:call<k>"
  const auto colon = id.rfind(':');
  if (colon == std::string::npos) return error_reply(request, "UNKNOWN_ID", "malformed id " + id);
  const std::string instance = id.substr(0, colon);
  const std::string tail = id.substr(colon + 1);
  const auto it = gold_.find(instance);
  if (it == gold_.end()) return error_reply(request, "UNKNOWN_ID", "no gold for " + instance);

  if (is_uie) {
    if (tail != "uie") return error_reply(request, "UNKNOWN_ID", "malformed id " + id);
    return {{"id", id}, {"text", render_meta_response(oracle_meta_response(corrupted(it->second)))}};
  }
  if (tail.rfind("call", 0) != 0 || tail.size() == 4 ||
      !std::all_of(tail.begin() + 4, tail.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return error_reply(request, "UNKNOWN_ID", "malformed id " + id);
  }
  const std::size_t k = std::stoul(tail.substr(4));
  const auto refs = oracle_groundings(it->second);
  if (k >= refs.size()) return error_reply(request, "UNKNOWN_ID", "no gold grounding for " + id);
  GroundingRef ref = refs[k];
  if (mode_ == Mode::corrupt && corrupt_item(instance, "g" + std::to_string(k), percent_)) {
    ref = corrupt_payload(ref, it->second, bundles_.at(instance));
  }
  return make_grounding_reply(id, ref.modality(), {ref});
}

int serve(const Stub& stub, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json reply;
    try {
      reply = stub.respond(Json::parse(line));
    } catch (const Json::exception& e) {
      reply = error_reply(Json(nullptr), "BAD_REQUEST", e.what());
    } catch (const Error& e) {
      reply = error_reply(Json(nullptr), e.code(), e.what());
    }
    out << reply.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n' << std::flush;
  }
  return 0;
}

}  // namespace muie
