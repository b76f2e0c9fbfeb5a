// Domain types shared by parsing, scoring and orchestration.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace muie {

// ---------------------------------------------------------------------------
// Errors

/// Base class for every error raised by the toolkit. `code()` is a stable
/// machine-readable identifier (e.g. "RLE_SUM_MISMATCH").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what, std::string code = "INVALID_ARGUMENT")
      : Error(std::move(code), what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::string code = "FORMAT_ERROR")
      : Error(std::move(code), what) {}
};

/// Raised by the meta-response parser; `offset()` is a byte offset into the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error("PARSE_ERROR", what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// ---------------------------------------------------------------------------
// Enumerations

enum class Task { ner, re, ee };
enum class Modality { text, image, audio, video };
enum class Alignment { shared, specific };

/// The nine input combinations of the benchmark (T = text, I = image,
/// A = audio, V = video).
enum class ModalityCombo { t_i, i, t_a, a, t_v, v, t_i_a, i_a, v_a };

std::string_view to_string(ModalityCombo c);  // "T+I", "I", ...
ModalityCombo parse_modality_combo(std::string_view s);
/// Modalities making up the combination, in text/image/audio/video order.
std::vector<Modality> modalities(ModalityCombo c);
bool includes(ModalityCombo c, Modality m);

std::string_view to_string(Task t);
std::string_view to_string(Modality m);
std::string_view to_string(Alignment a);
Task parse_task(std::string_view s);            // "NER" | "RE" | "EE", case-insensitive
Modality parse_modality(std::string_view s);    // "text" | "image" | "audio" | "video"
Alignment parse_alignment(std::string_view s);  // "shared" | "specific"

// ---------------------------------------------------------------------------
// Grounding targets

/// Binary image mask stored as uncompressed row-major RLE. Runs alternate
/// between background (0) and foreground (1), starting with background; a
/// leading zero run encodes a mask whose first pixel is foreground.
class ImageMask {
 public:
  /// Throws FormatError (code RLE_SUM_MISMATCH) unless sum(runs) == width*height.
  ImageMask(int width, int height, std::vector<std::uint32_t> runs);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<std::uint32_t>& runs() const noexcept { return runs_; }

  friend bool operator==(const ImageMask&, const ImageMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint32_t> runs_;
};

/// Time span in seconds, 0 <= start < end.
class AudioSegment {
 public:
  AudioSegment(double start, double end);
  double start() const noexcept { return start_; }
  double end() const noexcept { return end_; }
  double length() const noexcept { return end_ - start_; }
  friend bool operator==(const AudioSegment&, const AudioSegment&) = default;

 private:
  double start_;
  double end_;
};

/// Per-frame masks following one object through a video. Non-empty; every
/// mask has the same dimensions.
class Tracklet {
 public:
  explicit Tracklet(std::map<int, ImageMask> frames);
  const std::map<int, ImageMask>& frames() const noexcept { return frames_; }
  int width() const noexcept { return frames_.begin()->second.width(); }
  int height() const noexcept { return frames_.begin()->second.height(); }
  friend bool operator==(const Tracklet&, const Tracklet&) = default;

 private:
  std::map<int, ImageMask> frames_;
};

/// A grounding payload; the modality is implied by the alternative held.
class GroundingRef {
 public:
  using Payload = std::variant<ImageMask, AudioSegment, Tracklet>;

  GroundingRef(ImageMask m) : payload_(std::move(m)) {}     // NOLINT(implicit)
  GroundingRef(AudioSegment s) : payload_(std::move(s)) {}  // NOLINT(implicit)
  GroundingRef(Tracklet t) : payload_(std::move(t)) {}      // NOLINT(implicit)

  Modality modality() const noexcept;
  const Payload& payload() const noexcept { return payload_; }

  const ImageMask* mask() const noexcept { return std::get_if<ImageMask>(&payload_); }
  const AudioSegment* segment() const noexcept { return std::get_if<AudioSegment>(&payload_); }
  const Tracklet* tracklet() const noexcept { return std::get_if<Tracklet>(&payload_); }

  friend bool operator==(const GroundingRef&, const GroundingRef&) = default;

 private:
  Payload payload_;
};

// ---------------------------------------------------------------------------
// Extraction records

/// Groundings attached to a mention, at most one per modality.
class GroundingSlots {
 public:
  const std::vector<GroundingRef>& all() const noexcept { return refs_; }
  const GroundingRef* find(Modality m) const noexcept;
  bool has(Modality m) const noexcept { return find(m) != nullptr; }
  /// Returns false (and leaves the slots unchanged) if `m` is already grounded.
  bool attach(GroundingRef ref);
  friend bool operator==(const GroundingSlots&, const GroundingSlots&) = default;

 private:
  std::vector<GroundingRef> refs_;
};

struct EntityMention {
  std::string surface;
  std::string label;
  GroundingSlots groundings;
  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

struct RelationTriple {
  EntityMention subject;
  std::string relation;
  EntityMention object;
  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
};

struct EventArgument {
  std::string mention;
  std::string role;
  GroundingSlots groundings;
  friend bool operator==(const EventArgument&, const EventArgument&) = default;
};

struct EventRecord {
  std::string trigger;
  std::string event_type;
  std::vector<EventArgument> arguments;
  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Gold annotation or prediction set for one instance. Groundings not tied to
/// any mention live in `groundings`.
struct Annotation {
  std::string instance_id;
  Task task = Task::ner;
  std::vector<EntityMention> entities;
  std::vector<RelationTriple> relations;
  std::vector<EventRecord> events;
  std::vector<GroundingRef> groundings;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

using GoldAnnotation = Annotation;
using PredictionSet = Annotation;

/// Every grounding of modality `m` in the annotation, mention-attached ones
/// first (in record order), then instance-level ones.
std::vector<GroundingRef> collect_groundings(const Annotation& a, Modality m);

/// Checks record invariants (non-empty surfaces, trigger, roles, and that the
/// populated collections agree with the task). Throws InvalidArgument.
void validate(const Annotation& a);

// ---------------------------------------------------------------------------
// Inputs

struct ImageRef {
  std::string path;
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct AudioRef {
  std::string path;
  double duration = 0.0;
  friend bool operator==(const AudioRef&, const AudioRef&) = default;
};

struct VideoRef {
  std::string path;
  int frame_count = 0;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  friend bool operator==(const VideoRef&, const VideoRef&) = default;
};

/// One test instance's inputs.
struct ModalityBundle {
  std::string instance_id;
  std::optional<std::string> text;
  std::optional<ImageRef> image;
  std::optional<AudioRef> audio;
  std::optional<VideoRef> video;
  Alignment alignment = Alignment::shared;

  bool has(Modality m) const noexcept;
  friend bool operator==(const ModalityBundle&, const ModalityBundle&) = default;
};

/// Throws InvalidArgument if no modality is present or any media metadata is
/// non-positive.
void validate(const ModalityBundle& b);

// ---------------------------------------------------------------------------
// Text

/// NFC-normalizes, collapses internal whitespace runs to one space and strips
/// the ends. Case is preserved. Invalid UTF-8 is replaced by U+FFFD.
std::string normalize_mention(std::string_view raw);

/// Unicode case fold of an (already normalized) string.
std::string fold_case(std::string_view s);

}  // namespace muie
