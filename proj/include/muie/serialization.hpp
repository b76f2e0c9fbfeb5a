// JSON forms of the domain types, shared by gold files, prediction files,
// run records and the backend wire protocol.
#pragma once

#include <json.hpp>

#include <functional>

#include "muie/core.hpp"
#include "muie/metaresponse.hpp"

namespace muie {

using Json = nlohmann::json;

inline constexpr int kAnnotationFormatVersion = 1;

// {"width": W, "height": H, "rle": [runs...]}
Json to_json(const ImageMask& m);
ImageMask mask_from_json(const Json& j);

// [start, end]
Json to_json(const AudioSegment& s);
AudioSegment segment_from_json(const Json& j);

// {"<frame>": mask, ...}
Json to_json(const Tracklet& t);
Tracklet tracklet_from_json(const Json& j);

// {"modality": "image", "mask": {...}} | {"modality": "audio", "segment": [s, e]}
//   | {"modality": "video", "tracklet": {...}}
Json to_json(const GroundingRef& g);
GroundingRef grounding_from_json(const Json& j);

/// Annotation file body. Groundings are listed at top level; a grounding tied
/// to a mention carries a "link" ({"entity": i} | {"relation": i, "side":
/// "subject"|"object"} | {"event": i, "argument": j}).
Json to_json(const Annotation& a);

/// Receives (code, message) for a recoverable problem in one grounding entry;
/// the entry is skipped and parsing continues.
using ViolationSink = std::function<void(const std::string& code, const std::string& message)>;

/// Throws FormatError on structural problems. Grounding-level problems
/// (RLE_SUM_MISMATCH, BAD_LINK_INDEX, ...) go to `sink` when given, otherwise
/// they throw as well.
Annotation annotation_from_json(const Json& j, const ViolationSink& sink = {});

/// Canonical json for a parsed meta-response (records, concept flags,
/// module calls, warnings).
Json to_json(const MetaResponse& m);

}  // namespace muie
