#include "muie/scoring.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace muie {

PRF PRF::from_counts(long tp, long fp, long fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

namespace {

using Key = std::vector<std::string>;

class KeyBuilder {
 public:
  explicit KeyBuilder(const ScoringOptions& opts) : fold_(!opts.case_sensitive) {}
  std::string operator()(const std::string& s) const { return fold_ ? fold_case(s) : s; }

 private:
  bool fold_;
};

/// Set semantics: duplicates collapse, each gold key is consumed at most once.
PRF count(const std::set<Key>& gold, const std::set<Key>& pred) {
  long tp = 0;
  for (const auto& k : pred) tp += gold.count(k) ? 1 : 0;
  return PRF::from_counts(tp, long(pred.size()) - tp, long(gold.size()) - tp);
}

}  // namespace

PRF score_ner(std::span<const EntityMention> gold, std::span<const EntityMention> pred,
              const ScoringOptions& opts) {
  const KeyBuilder k(opts);
  auto keys = [&](std::span<const EntityMention> items) {
    std::set<Key> out;
    for (const auto& e : items) out.insert({k(e.surface), k(e.label)});
    return out;
  };
  return count(keys(gold), keys(pred));
}

PRF score_re(std::span<const RelationTriple> gold, std::span<const RelationTriple> pred,
             const ScoringOptions& opts) {
  const KeyBuilder k(opts);
  auto keys = [&](std::span<const RelationTriple> items) {
    std::set<Key> out;
    for (const auto& r : items) {
      Key key{k(r.subject.surface), k(r.relation), k(r.object.surface)};
      if (opts.strict_re) {
        key.push_back(k(r.subject.label));
        key.push_back(k(r.object.label));
      }
      out.insert(std::move(key));
    }
    return out;
  };
  return count(keys(gold), keys(pred));
}

PRF score_event_trigger(std::span<const EventRecord> gold, std::span<const EventRecord> pred,
                        const ScoringOptions& opts) {
  const KeyBuilder k(opts);
  auto keys = [&](std::span<const EventRecord> items) {
    std::set<Key> out;
    for (const auto& e : items) out.insert({k(e.trigger), k(e.event_type)});
    return out;
  };
  return count(keys(gold), keys(pred));
}

PRF score_event_argument(std::span<const EventRecord> gold, std::span<const EventRecord> pred,
                         const ScoringOptions& opts) {
  const KeyBuilder k(opts);
  auto keys = [&](std::span<const EventRecord> items) {
    std::set<Key> out;
    for (const auto& e : items) {
      for (const auto& a : e.arguments) out.insert({k(e.event_type), k(a.role), k(a.mention)});
    }
    return out;
  };
  return count(keys(gold), keys(pred));
}

namespace {

template <typename PairIoU>
GroundingScore finish_grounding(GroundingKind kind, std::size_t g, std::size_t p,
                                const Matching<double>& m, PairIoU&& iou) {
  GroundingScore s;
  s.kind = kind;
  if (g == 0 && p == 0) {
    s.value = 1.0;
    s.vacuous = true;
    return s;
  }
  double sum = 0.0;
  for (const auto& pair : m.pairs) {
    if (!pair.real()) continue;
    sum += iou(*pair.gold, *pair.pred);
    ++s.matched_pairs;
  }
  s.unmatched_gold = int(g) - s.matched_pairs;
  s.unmatched_pred = int(p) - s.matched_pairs;
  s.value = sum / double(std::max(g, p));
  return s;
}

}  // namespace

GroundingScore score_image_grounding(std::span<const ImageMask> gold,
                                     std::span<const ImageMask> pred, double bce_epsilon) {
  std::vector<DenseMask> g, p;
  g.reserve(gold.size());
  p.reserve(pred.size());
  for (const auto& m : gold) g.push_back(rle_decode(m));
  for (const auto& m : pred) p.push_back(rle_decode(m));
  const auto matching = match_mask_sets(g, p, bce_epsilon);
  return finish_grounding(GroundingKind::image_miou, g.size(), p.size(), matching,
                          [&](int i, int j) { return mask_iou<double>(g[i], p[j]); });
}

GroundingScore score_video_tracking(std::span<const Tracklet> gold,
                                    std::span<const Tracklet> pred) {
  const auto matching = match_tracklet_sets(gold, pred);
  return finish_grounding(GroundingKind::video_jaccard, gold.size(), pred.size(), matching,
                          [&](int i, int j) {
                            return tracklet_iou_profile<double>(gold[i], pred[j]).mean;
                          });
}

GroundingScore score_audio_segmentation(std::span<const AudioSegment> gold,
                                        std::span<const AudioSegment> pred) {
  const auto matching = match_span_sets(gold, pred);
  return finish_grounding(GroundingKind::audio_miou, gold.size(), pred.size(), matching,
                          [&](int i, int j) { return span_iou_1d<double>(gold[i], pred[j]); });
}

// ---------------------------------------------------------------------------

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::ner: return "NER";
    case Metric::re: return "RE";
    case Metric::et: return "ET";
    case Metric::ea: return "EA";
    case Metric::image_seg: return "I-Seg";
    case Metric::video_track: return "V-Trck";
    case Metric::audio_seg: return "A-Seg";
  }
  throw InvalidArgument("unknown metric enum");
}

Metric parse_metric(std::string_view s) {
  for (Metric m : {Metric::ner, Metric::re, Metric::et, Metric::ea, Metric::image_seg,
                   Metric::video_track, Metric::audio_seg}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown metric '" + std::string(s) + "'");
}

int gold_entity_count(const GoldAnnotation& gold) {
  switch (gold.task) {
    case Task::ner: return int(gold.entities.size());
    case Task::re: {
      std::set<std::string> surfaces;
      for (const auto& r : gold.relations) {
        surfaces.insert(r.subject.surface);
        surfaces.insert(r.object.surface);
      }
      return int(surfaces.size());
    }
    case Task::ee: {
      std::size_t n = 0;
      for (const auto& e : gold.events) n += e.arguments.size();
      return int(n);
    }
  }
  return 0;
}

namespace {

template <typename T>
std::vector<T> payloads(const std::vector<GroundingRef>& refs) {
  std::vector<T> out;
  for (const auto& r : refs) {
    if (const T* p = std::get_if<T>(&r.payload())) out.push_back(*p);
  }
  return out;
}

}  // namespace

InstanceScores score_instance(const InstanceInfo& info, const GoldAnnotation& gold,
                              const PredictionSet& pred, const ScoringOptions& opts) {
  InstanceScores s;
  s.info = info;
  s.entity_count = gold_entity_count(gold);
  switch (info.task) {
    case Task::ner:
      s.f1[Metric::ner] = score_ner(gold.entities, pred.entities, opts);
      break;
    case Task::re:
      s.f1[Metric::re] = score_re(gold.relations, pred.relations, opts);
      break;
    case Task::ee:
      s.f1[Metric::et] = score_event_trigger(gold.events, pred.events, opts);
      s.f1[Metric::ea] = score_event_argument(gold.events, pred.events, opts);
      break;
  }
  if (includes(info.combo, Modality::image)) {
    s.grounding[Metric::image_seg] = score_image_grounding(
        payloads<ImageMask>(collect_groundings(gold, Modality::image)),
        payloads<ImageMask>(collect_groundings(pred, Modality::image)), opts.bce_epsilon);
  }
  if (includes(info.combo, Modality::video)) {
    s.grounding[Metric::video_track] =
        score_video_tracking(payloads<Tracklet>(collect_groundings(gold, Modality::video)),
                             payloads<Tracklet>(collect_groundings(pred, Modality::video)));
  }
  if (includes(info.combo, Modality::audio)) {
    s.grounding[Metric::audio_seg] = score_audio_segmentation(
        payloads<AudioSegment>(collect_groundings(gold, Modality::audio)),
        payloads<AudioSegment>(collect_groundings(pred, Modality::audio)));
  }
  return s;
}

std::string entity_bucket(int count) {
  if (count <= 0) return "0";
  if (count <= 2) return "1-2";
  if (count <= 4) return "3-4";
  if (count <= 6) return "5-6";
  return "7+";
}

namespace {

int split_rank(const std::string& split) {
  if (split == "all") return 0;
  if (split == kSplitShared) return 1;
  if (split == kSplitSpecific) return 2;
  return 3;
}

}  // namespace

bool operator<(const CellKey& a, const CellKey& b) {
  return std::make_tuple(split_rank(a.split), a.split, a.combo, a.task, a.dataset, a.metric) <
         std::make_tuple(split_rank(b.split), b.split, b.combo, b.task, b.dataset, b.metric);
}

const Cell* ScoreReport::find(const CellKey& key) const {
  for (const auto& c : cells) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

ScoreReport aggregate(std::span<const InstanceScores> instances,
                      std::span<const std::string> split_keys, const ScoringOptions& opts) {
  bool by_alignment_shared = false, by_alignment_specific = false, by_bucket = false;
  for (const auto& key : split_keys) {
    if (key == kSplitShared) {
      by_alignment_shared = true;
    } else if (key == kSplitSpecific) {
      by_alignment_specific = true;
    } else if (key == kSplitEntityBuckets) {
      by_bucket = true;
    } else if (key != "all") {
      throw InvalidArgument("unknown split key '" + key + "'", "UNKNOWN_SPLIT");
    }
  }

  struct Accum {
    long tp = 0, fp = 0, fn = 0;
    bool is_f1 = false;
    std::vector<std::pair<std::string, double>> values;  // (instance id, value)
    int vacuous = 0;
    std::vector<std::string> ids;
  };
  std::map<CellKey, Accum> acc;

  for (const auto& inst : instances) {
    std::vector<std::string> splits{"all"};
    if (by_alignment_shared && inst.info.alignment == Alignment::shared) splits.emplace_back(kSplitShared);
    if (by_alignment_specific && inst.info.alignment == Alignment::specific) {
      splits.emplace_back(kSplitSpecific);
    }
    if (by_bucket) splits.push_back("entities=" + entity_bucket(inst.entity_count));

    for (const auto& split : splits) {
      auto key_for = [&](Metric m) {
        return CellKey{split, inst.info.combo, inst.info.task, inst.info.dataset, m};
      };
      for (const auto& [metric, prf] : inst.f1) {
        auto& a = acc[key_for(metric)];
        a.is_f1 = true;
        a.tp += prf.tp;
        a.fp += prf.fp;
        a.fn += prf.fn;
        a.ids.push_back(inst.info.instance_id);
      }
      for (const auto& [metric, gs] : inst.grounding) {
        auto& a = acc[key_for(metric)];
        if (gs.vacuous) {
          ++a.vacuous;
          if (opts.exclude_vacuous) continue;
        }
        a.values.emplace_back(inst.info.instance_id, gs.value);
        a.ids.push_back(inst.info.instance_id);
      }
    }
  }

  ScoreReport report;
  for (auto& [key, a] : acc) {
    Cell cell;
    cell.key = key;
    if (a.is_f1) {
      const PRF prf = PRF::from_counts(a.tp, a.fp, a.fn);
      cell.value = prf.f1;
      cell.counts = prf;
    } else {
      if (a.values.empty()) continue;
      std::sort(a.values.begin(), a.values.end());
      double sum = 0.0;
      for (const auto& [id, v] : a.values) sum += v;
      cell.value = sum / double(a.values.size());
      cell.vacuous = a.vacuous;
    }
    std::sort(a.ids.begin(), a.ids.end());
    cell.instance_ids = std::move(a.ids);
    report.cells.push_back(std::move(cell));
  }
  return report;
}

}  // namespace muie
