// End-to-end orchestration: prompt -> uie backend -> parse -> grounding
// dispatch -> linked predictions, persisted as a PredictionStore.
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "muie/backend.hpp"
#include "muie/corpus.hpp"
#include "muie/metaresponse.hpp"
#include "muie/scoring.hpp"

namespace muie {

struct RunError {
  std::string code;  // PARSE_ERROR, TIMEOUT, UNKNOWN_MODULE, BACKEND_ERROR, ...
  std::string message;
  friend bool operator==(const RunError&, const RunError&) = default;
};

struct CallRecord {
  ModuleCall call;
  std::optional<BackendKind> kind;
  std::vector<GroundingRef> payloads;
  std::optional<RunError> error;
};

struct StageTiming {
  std::string stage;  // "prompt", "uie", "parse", "grounding", "link"
  double seconds = 0.0;
};

struct RunRecord {
  std::string instance_id;
  Task task = Task::ner;
  std::string prompt;
  std::string meta_response;  // raw backend text
  std::vector<ParseWarning> warnings;
  std::vector<CallRecord> calls;
  PredictionSet prediction;
  std::optional<RunError> error;  // first error of the instance
  std::vector<StageTiming> timings;  // not part of the canonical form
};

/// Canonical json (no timings).
Json to_json(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);

/// Directory layout:
///   index.json              {"format_version":1,"instances":[{"instance_id","record","error"}]}
///   records/<id>.json       canonical RunRecord, id percent-encoded
///   timings/<id>.json       per-stage wall clock (excluded from comparisons)
class PredictionStore {
 public:
  /// Creates `dir`, replacing a previous store there. Refuses (FormatError,
  /// STORE_EXISTS) a non-empty directory that is not a store.
  static PredictionStore create(const std::filesystem::path& dir);
  /// Opens an existing store. Throws FormatError if index.json is missing.
  static PredictionStore open(const std::filesystem::path& dir);

  void put(const RunRecord& r);
  /// Writes index.json (instances sorted by id).
  void finalize();

  std::vector<std::string> instance_ids() const;
  RunRecord get(const std::string& instance_id) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  explicit PredictionStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::filesystem::path dir_;
  std::map<std::string, std::optional<std::string>> index_;  // id -> error code
};

/// File name stem for an instance id ([A-Za-z0-9_-] kept, rest %XX).
std::string encode_instance_id(const std::string& id);

struct HarnessConfig {
  /// Module name (as written after <Module>) -> backend kind.
  std::map<std::string, BackendKind> module_kinds{
      {"Image Segmenter", BackendKind::image_segmenter},
      {"Video Tracker", BackendKind::video_tracker},
      {"Audio Segmenter", BackendKind::audio_segmenter},
  };
  int jobs = 1;
};

struct RunSummary {
  int instances = 0;
  int failed = 0;  // instances with a coded error
  std::vector<std::pair<std::string, RunError>> errors;  // sorted by id
};

/// Runs one instance. Never throws for backend or parse problems; they end up
/// in RunRecord::error.
RunRecord run_instance(const ManifestEntry& entry,
                       const std::map<BackendKind, Backend*>& backends,
                       const HarnessConfig& config);

/// Requires exactly one uie backend and at most one backend per grounding
/// kind (InvalidArgument otherwise). Workers process instances concurrently;
/// records reach the store through a single writer.
RunSummary run_pipeline(const Manifest& manifest, const std::map<BackendKind, Backend*>& backends,
                        const HarnessConfig& config, PredictionStore& store);

/// Connects every spec first; a launch failure throws BackendError before any
/// instance runs.
RunSummary run_pipeline(const Manifest& manifest, const std::vector<BackendSpec>& specs,
                        const HarnessConfig& config, PredictionStore& store);

// ---------------------------------------------------------------------------
// scoring over stored or external predictions

struct ScoreOutcome {
  ScoreReport report;
  std::vector<InstanceScores> instances;  // manifest order
  std::vector<Violation> violations;      // sorted
};

/// Scores every manifest instance whose gold loads; instances without a
/// prediction are scored against an empty PredictionSet. Predictions for ids
/// absent from the manifest give MISSING_GOLD; invalid predicted groundings
/// are dropped with a PRED_* violation.
ScoreOutcome score_predictions(const Manifest& manifest,
                               const std::map<std::string, PredictionSet>& predictions,
                               std::span<const std::string> split_keys,
                               const ScoringOptions& opts = {}, int jobs = 1);

ScoreOutcome score_store(const PredictionStore& store, const Manifest& manifest,
                         std::span<const std::string> split_keys,
                         const ScoringOptions& opts = {}, int jobs = 1);

/// Reads every *.json annotation file in `dir` (keyed by its instance_id).
/// Unreadable files and duplicate ids become violations.
std::map<std::string, PredictionSet> load_prediction_dir(const std::filesystem::path& dir,
                                                         std::vector<Violation>& violations);

}  // namespace muie
