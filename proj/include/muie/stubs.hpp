// Deterministic stand-in backends: echo a fixture, replay gold (oracle), or
// replay gold with a fixed fraction of items corrupted.
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "muie/corpus.hpp"
#include "muie/serialization.hpp"

namespace muie {

/// Meta-response reproducing `gold`: every record, plus one module call per
/// gold grounding. Calls for mention groundings quote the mention.
MetaResponse oracle_meta_response(const GoldAnnotation& gold);

/// Gold groundings in the order of oracle_meta_response's module calls.
std::vector<GroundingRef> oracle_groundings(const GoldAnnotation& gold);

/// Deterministic item selector: true iff hash(instance_id, item) mod 100 < percent,
/// so the selected set at k is contained in the set at any larger k.
bool corrupt_item(const std::string& instance_id, const std::string& item, int percent);

class Stub {
 public:
  /// Replies `text` to every uie request and `grounding_reply` (an object with
  /// "masks", "segments" or "tracklets") to every grounding request.
  static Stub echo(std::string text, std::optional<Json> grounding_reply = std::nullopt);
  static Stub oracle(const Manifest& manifest);
  static Stub corrupt(const Manifest& manifest, int percent);

  /// Reply for one request; unknown ids produce an {"error": ...} reply.
  Json respond(const Json& request) const;

 private:
  enum class Mode { echo, oracle, corrupt };
  Mode mode_ = Mode::echo;
  std::string text_;
  std::optional<Json> grounding_reply_;
  int percent_ = 0;
  std::map<std::string, GoldAnnotation> gold_;
  std::map<std::string, ModalityBundle> bundles_;

  GoldAnnotation corrupted(const GoldAnnotation& gold) const;
};

/// Serves newline-delimited requests until end of input. Returns 0.
int serve(const Stub& stub, std::istream& in, std::ostream& out);

}  // namespace muie
