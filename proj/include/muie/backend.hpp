// Extraction and grounding backends reached over newline-delimited json,
// either as a child process (stdio) or an HTTP endpoint.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "muie/core.hpp"
#include "muie/serialization.hpp"

namespace muie {

enum class BackendKind { uie, image_segmenter, video_tracker, audio_segmenter };
enum class Transport { stdio, http, in_process };

std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

/// Modality a grounding backend consumes and produces (uie has none).
Modality grounding_modality(BackendKind k);

struct BackendSpec {
  std::string name;
  BackendKind kind = BackendKind::uie;
  Transport transport = Transport::stdio;
  std::string target;  // shell command (stdio) or URL (http)
  double timeout_seconds = 60.0;
  int max_inflight = 1;
  int retries = 0;  // 0 or 1
};

/// Parses `KIND[,opt=val...]=TARGET` where TARGET is `[name@]stdio:COMMAND` or
/// an http:// URL and options are timeout=<s>, inflight=<n>, retries=<0|1>.
/// Throws InvalidArgument (code BAD_BACKEND_SPEC).
BackendSpec parse_backend_spec(std::string_view arg);
void validate(const BackendSpec& spec);

/// Error codes: LAUNCH_FAILED, TIMEOUT, BACKEND_ERROR (backend replied with an
/// error object or died), PROTOCOL_ERROR (reply not understood).
class BackendError : public Error {
 public:
  using Error::Error;
};

class Backend {
 public:
  explicit Backend(BackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  /// Sends `request` (which carries a unique "id") and waits for the reply
  /// with the same id. Thread-safe; at most max_inflight calls are in flight.
  /// Retries once on TIMEOUT when spec().retries > 0.
  Json call(const Json& request);

  const BackendSpec& spec() const noexcept { return spec_; }

 protected:
  virtual Json call_once(const Json& request) = 0;

 private:
  BackendSpec spec_;
  class Gate;
  std::shared_ptr<Gate> gate_;
  friend std::unique_ptr<Backend> connect(const BackendSpec& spec);
  friend std::unique_ptr<Backend> make_function_backend(BackendSpec,
                                                        std::function<Json(const Json&)>);
};

/// Launches or connects. A stdio command that cannot be executed throws
/// BackendError(LAUNCH_FAILED).
std::unique_ptr<Backend> connect(const BackendSpec& spec);

/// In-process backend, used by tests and by the stub executable's self-check.
std::unique_ptr<Backend> make_function_backend(BackendSpec spec,
                                               std::function<Json(const Json&)> handler);

// --- message helpers -------------------------------------------------------

struct Attachment {
  Modality modality = Modality::image;
  std::string path;
};

Json make_uie_request(const std::string& id, const std::string& prompt,
                      const std::vector<Attachment>& attachments);
Json make_grounding_request(const std::string& id, const std::string& module,
                            const std::string& instruction, const Attachment& source);

/// Text of a uie reply. Throws BackendError(PROTOCOL_ERROR).
std::string uie_reply_text(const Json& reply);

/// Payloads of a grounding reply ("masks", "segments" or "tracklets").
/// Throws BackendError(PROTOCOL_ERROR) on a malformed reply or a payload
/// kind that does not match `expected`.
std::vector<GroundingRef> grounding_reply_payloads(const Json& reply, Modality expected);

/// Reply body for a list of payloads of one modality (without "id").
Json make_grounding_reply(const std::string& id, Modality modality,
                          const std::vector<GroundingRef>& payloads);

}  // namespace muie
