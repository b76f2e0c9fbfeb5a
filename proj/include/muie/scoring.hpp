// Task metrics (micro-F1 for NER/RE/ET/EA; mIoU / Jaccard for groundings),
// corpus aggregation and report rendering.
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muie/assignment.hpp"
#include "muie/core.hpp"

namespace muie {

struct PRF {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  /// Derives P/R/F1; each ratio is 0 when its denominator is 0.
  static PRF from_counts(long tp, long fp, long fn);
  friend bool operator==(const PRF&, const PRF&) = default;
};

enum class GroundingKind { image_miou, video_jaccard, audio_miou };

struct GroundingScore {
  GroundingKind kind = GroundingKind::image_miou;
  double value = 0.0;
  int matched_pairs = 0;
  int unmatched_gold = 0;
  int unmatched_pred = 0;
  bool vacuous = false;  // no gold and no prediction; scored 1.0
};

struct ScoringOptions {
  bool case_sensitive = true;
  /// RE: also require subject/object entity labels to match.
  bool strict_re = false;
  double bce_epsilon = kDefaultBceEpsilon;
  /// Drop vacuous grounding instances from corpus means.
  bool exclude_vacuous = false;
};

PRF score_ner(std::span<const EntityMention> gold, std::span<const EntityMention> pred,
              const ScoringOptions& opts = {});
PRF score_re(std::span<const RelationTriple> gold, std::span<const RelationTriple> pred,
             const ScoringOptions& opts = {});
PRF score_event_trigger(std::span<const EventRecord> gold, std::span<const EventRecord> pred,
                        const ScoringOptions& opts = {});
PRF score_event_argument(std::span<const EventRecord> gold, std::span<const EventRecord> pred,
                         const ScoringOptions& opts = {});

/// Instance mIoU: sum of IoU over matched real pairs divided by max(G, K).
GroundingScore score_image_grounding(std::span<const ImageMask> gold,
                                     std::span<const ImageMask> pred,
                                     double bce_epsilon = kDefaultBceEpsilon);
GroundingScore score_video_tracking(std::span<const Tracklet> gold,
                                    std::span<const Tracklet> pred);
GroundingScore score_audio_segmentation(std::span<const AudioSegment> gold,
                                        std::span<const AudioSegment> pred);

// ---------------------------------------------------------------------------
// Per-instance and corpus level

/// Report columns, in table order.
enum class Metric { ner, re, et, ea, image_seg, video_track, audio_seg };

std::string_view to_string(Metric m);  // "NER", "RE", "ET", "EA", "I-Seg", "V-Trck", "A-Seg"
Metric parse_metric(std::string_view s);

struct InstanceInfo {
  std::string instance_id;
  std::string dataset;
  ModalityCombo combo = ModalityCombo::t_i;
  Task task = Task::ner;
  Alignment alignment = Alignment::shared;
};

struct InstanceScores {
  InstanceInfo info;
  int entity_count = 0;  // gold entities / objects, for bucket splits
  std::map<Metric, PRF> f1;
  std::map<Metric, GroundingScore> grounding;
};

/// Number of gold entities (NER), distinct subject/object surfaces (RE), or
/// event arguments (EE).
int gold_entity_count(const GoldAnnotation& gold);

/// Runs every scorer applicable to the instance's task and modality combo.
InstanceScores score_instance(const InstanceInfo& info, const GoldAnnotation& gold,
                              const PredictionSet& pred, const ScoringOptions& opts = {});

/// Bucket label for an entity count: "0", "1-2", "3-4", "5-6", "7+".
std::string entity_bucket(int count);

struct CellKey {
  std::string split;  // "all", "shared", "specific", "entities=<bucket>"
  ModalityCombo combo = ModalityCombo::t_i;
  Task task = Task::ner;
  std::string dataset;
  Metric metric = Metric::ner;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

/// Table order: split, combo, task, dataset, metric.
bool operator<(const CellKey& a, const CellKey& b);

struct Cell {
  CellKey key;
  double value = 0.0;
  std::optional<PRF> counts;  // F1 cells only
  int vacuous = 0;            // grounding cells only
  std::vector<std::string> instance_ids;  // sorted
};

struct ScoreReport {
  static constexpr int kFormatVersion = 1;
  std::vector<Cell> cells;  // sorted by key
  const Cell* find(const CellKey& key) const;
};

/// Split keys accepted by aggregate, besides the implicit "all".
inline constexpr std::string_view kSplitShared = "shared";
inline constexpr std::string_view kSplitSpecific = "specific";
inline constexpr std::string_view kSplitEntityBuckets = "entity-buckets";

/// F1 cells sum tp/fp/fn over instances (micro); grounding cells are the mean
/// of per-instance values taken in instance-id order. Throws InvalidArgument
/// on an unknown split key.
ScoreReport aggregate(std::span<const InstanceScores> instances,
                      std::span<const std::string> split_keys, const ScoringOptions& opts = {});

enum class ReportFormat { table, csv, json };
ReportFormat parse_report_format(std::string_view s);

/// Percentage with exactly one decimal: 0.474 -> "47.4".
std::string format_percent(double value);

std::string render_report(const ScoreReport& report, ReportFormat format);
/// Inverse of the json rendering. Throws FormatError.
ScoreReport report_from_json(std::string_view json_text);

}  // namespace muie
