#include "muie/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace muie {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Task t) {
  switch (t) {
    case Task::ner: return "NER";
    case Task::re: return "RE";
    case Task::ee: return "EE";
  }
  throw InvalidArgument("unknown task enum");
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::image: return "image";
    case Modality::audio: return "audio";
    case Modality::video: return "video";
  }
  throw InvalidArgument("unknown modality enum");
}

std::string_view to_string(Alignment a) {
  return a == Alignment::shared ? "shared" : "specific";
}

namespace {

struct ComboInfo {
  ModalityCombo combo;
  std::string_view name;
  std::vector<Modality> parts;
};

const std::vector<ComboInfo>& combo_table() {
  static const std::vector<ComboInfo> table{
      {ModalityCombo::t_i, "T+I", {Modality::text, Modality::image}},
      {ModalityCombo::i, "I", {Modality::image}},
      {ModalityCombo::t_a, "T+A", {Modality::text, Modality::audio}},
      {ModalityCombo::a, "A", {Modality::audio}},
      {ModalityCombo::t_v, "T+V", {Modality::text, Modality::video}},
      {ModalityCombo::v, "V", {Modality::video}},
      {ModalityCombo::t_i_a, "T+I+A", {Modality::text, Modality::image, Modality::audio}},
      {ModalityCombo::i_a, "I+A", {Modality::image, Modality::audio}},
      {ModalityCombo::v_a, "V+A", {Modality::audio, Modality::video}},
  };
  return table;
}

}  // namespace

std::string_view to_string(ModalityCombo c) {
  return combo_table().at(static_cast<std::size_t>(c)).name;
}

ModalityCombo parse_modality_combo(std::string_view s) {
  std::string upper(s);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (const auto& info : combo_table()) {
    if (info.name == upper) return info.combo;
  }
  throw InvalidArgument("unknown modality combination '" + std::string(s) + "'", "UNKNOWN_COMBO");
}

std::vector<Modality> modalities(ModalityCombo c) {
  return combo_table().at(static_cast<std::size_t>(c)).parts;
}

bool includes(ModalityCombo c, Modality m) {
  const auto parts = modalities(c);
  return std::find(parts.begin(), parts.end(), m) != parts.end();
}

Task parse_task(std::string_view s) {
  const auto l = lower(s);
  if (l == "ner") return Task::ner;
  if (l == "re") return Task::re;
  if (l == "ee") return Task::ee;
  throw InvalidArgument("unknown task '" + std::string(s) + "'", "UNKNOWN_TASK");
}

Modality parse_modality(std::string_view s) {
  const auto l = lower(s);
  if (l == "text") return Modality::text;
  if (l == "image") return Modality::image;
  if (l == "audio") return Modality::audio;
  if (l == "video") return Modality::video;
  throw InvalidArgument("unknown modality '" + std::string(s) + "'", "UNKNOWN_MODALITY");
}

Alignment parse_alignment(std::string_view s) {
  const auto l = lower(s);
  if (l == "shared") return Alignment::shared;
  if (l == "specific") return Alignment::specific;
  throw InvalidArgument("unknown alignment '" + std::string(s) + "'", "UNKNOWN_ALIGNMENT");
}

ImageMask::ImageMask(int width, int height, std::vector<std::uint32_t> runs)
    : width_(width), height_(height), runs_(std::move(runs)) {
  if (width <= 0 || height <= 0) {
    throw FormatError("mask dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height),
                      "BAD_DIMENSIONS");
  }
  const std::uint64_t total =
      std::accumulate(runs_.begin(), runs_.end(), std::uint64_t{0});
  const std::uint64_t expected = std::uint64_t(width) * std::uint64_t(height);
  if (total != expected) {
    throw FormatError("RLE sums to " + std::to_string(total) + ", expected " +
                          std::to_string(expected),
                      "RLE_SUM_MISMATCH");
  }
}

AudioSegment::AudioSegment(double start, double end) : start_(start), end_(end) {
  if (!std::isfinite(start) || !std::isfinite(end) || start < 0.0 || !(start < end)) {
    throw InvalidArgument("audio segment requires 0 <= start < end, got [" +
                              std::to_string(start) + ", " + std::to_string(end) + "]",
                          "SEGMENT_OUT_OF_RANGE");
  }
}

Tracklet::Tracklet(std::map<int, ImageMask> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) throw InvalidArgument("tracklet has no frames", "EMPTY_TRACKLET");
  if (frames_.begin()->first < 0) {
    throw InvalidArgument("negative frame index", "FRAME_OUT_OF_RANGE");
  }
  const auto& first = frames_.begin()->second;
  for (const auto& [idx, m] : frames_) {
    if (m.width() != first.width() || m.height() != first.height()) {
      throw InvalidArgument("tracklet frame " + std::to_string(idx) +
                                " has different mask dimensions",
                            "DIMENSION_MISMATCH");
    }
  }
}

Modality GroundingRef::modality() const noexcept {
  switch (payload_.index()) {
    case 0: return Modality::image;
    case 1: return Modality::audio;
    default: return Modality::video;
  }
}

const GroundingRef* GroundingSlots::find(Modality m) const noexcept {
  for (const auto& r : refs_) {
    if (r.modality() == m) return &r;
  }
  return nullptr;
}

bool GroundingSlots::attach(GroundingRef ref) {
  if (has(ref.modality())) return false;
  refs_.push_back(std::move(ref));
  return true;
}

std::vector<GroundingRef> collect_groundings(const Annotation& a, Modality m) {
  std::vector<GroundingRef> out;
  auto take = [&](const GroundingSlots& s) {
    if (const auto* r = s.find(m)) out.push_back(*r);
  };
  for (const auto& e : a.entities) take(e.groundings);
  for (const auto& r : a.relations) {
    take(r.subject.groundings);
    take(r.object.groundings);
  }
  for (const auto& ev : a.events) {
    for (const auto& arg : ev.arguments) take(arg.groundings);
  }
  for (const auto& g : a.groundings) {
    if (g.modality() == m) out.push_back(g);
  }
  return out;
}

void validate(const Annotation& a) {
  auto check_mention = [](const EntityMention& m) {
    if (m.surface.empty()) throw InvalidArgument("empty entity surface", "EMPTY_MENTION");
    if (m.surface != normalize_mention(m.surface)) {
      throw InvalidArgument("entity surface '" + m.surface + "' is not normalized",
                            "UNNORMALIZED_MENTION");
    }
  };
  for (const auto& e : a.entities) check_mention(e);
  for (const auto& r : a.relations) {
    check_mention(r.subject);
    check_mention(r.object);
    if (r.relation.empty()) throw InvalidArgument("empty relation label", "EMPTY_LABEL");
  }
  for (const auto& ev : a.events) {
    if (ev.trigger.empty()) throw InvalidArgument("empty event trigger", "EMPTY_MENTION");
    for (const auto& arg : ev.arguments) {
      if (arg.role.empty()) throw InvalidArgument("empty argument role", "EMPTY_LABEL");
      if (arg.mention.empty()) throw InvalidArgument("empty argument mention", "EMPTY_MENTION");
    }
  }
  const bool consistent =
      (a.task == Task::ner && a.relations.empty() && a.events.empty()) ||
      (a.task == Task::re && a.entities.empty() && a.events.empty()) ||
      (a.task == Task::ee && a.entities.empty() && a.relations.empty());
  if (!consistent) {
    throw InvalidArgument("records inconsistent with task " + std::string(to_string(a.task)),
                          "TASK_MISMATCH");
  }
}

bool ModalityBundle::has(Modality m) const noexcept {
  switch (m) {
    case Modality::text: return text.has_value();
    case Modality::image: return image.has_value();
    case Modality::audio: return audio.has_value();
    case Modality::video: return video.has_value();
  }
  return false;
}

void validate(const ModalityBundle& b) {
  if (!b.text && !b.image && !b.audio && !b.video) {
    throw InvalidArgument("instance '" + b.instance_id + "' has no modality", "NO_MODALITY");
  }
  if (b.image && (b.image->width <= 0 || b.image->height <= 0)) {
    throw InvalidArgument("image dimensions must be positive", "BAD_DIMENSIONS");
  }
  if (b.audio && !(b.audio->duration > 0.0)) {
    throw InvalidArgument("audio duration must be positive", "BAD_DIMENSIONS");
  }
  if (b.video && (b.video->width <= 0 || b.video->height <= 0 || b.video->frame_count <= 0 ||
                  !(b.video->fps > 0.0))) {
    throw InvalidArgument("video metadata must be positive", "BAD_DIMENSIONS");
  }
}

}  // namespace muie
