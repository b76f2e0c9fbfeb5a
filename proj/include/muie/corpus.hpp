// Benchmark corpus: json-lines manifest, per-instance gold files, validation.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "muie/core.hpp"

namespace muie {

inline constexpr int kManifestFormatVersion = 1;

struct ManifestEntry {
  std::size_t line = 0;  // 1-based line in the manifest file
  std::string dataset;
  ModalityCombo combo = ModalityCombo::t_i;
  Task task = Task::ner;
  ModalityBundle bundle;  // media paths resolved against the manifest directory
  std::filesystem::path gold_path;
  std::vector<std::string> labels;
  std::vector<std::string> argument_roles;

  const std::string& instance_id() const { return bundle.instance_id; }
};

struct Manifest {
  std::string corpus;
  std::string version;
  std::filesystem::path directory;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;

  const ManifestEntry* find(const std::string& instance_id) const;
};

/// Parses and validates a manifest. Throws FormatError whose message starts
/// with "line N:" and whose code is one of PARSE_ERROR, SCHEMA_ERROR,
/// DUPLICATE_ID, UNKNOWN_COMBO, UNKNOWN_TASK, MODALITY_MISMATCH, MISSING_FILE,
/// UNSUPPORTED_VERSION.
Manifest load_manifest(const std::filesystem::path& path);

struct Violation {
  std::string instance_id;
  std::string code;
  std::string message;
  std::string path;
  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Orders by (instance_id, code, message).
bool operator<(const Violation& a, const Violation& b);

class CorpusError : public Error {
 public:
  explicit CorpusError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Checks groundings against the bundle's media metadata (modality present,
/// mask dimensions, frame range, segment within duration). When
/// `remove_invalid` is set the offending groundings are dropped from `a`.
std::vector<Violation> check_groundings(Annotation& a, const ModalityBundle& bundle,
                                        bool remove_invalid);

/// Loads one gold file and enforces every invariant against `bundle`. Throws
/// CorpusError listing all violations (codes include RLE_SUM_MISMATCH,
/// SEGMENT_OUT_OF_RANGE, FRAME_OUT_OF_RANGE, BAD_LINK_INDEX).
GoldAnnotation load_gold(const std::filesystem::path& path, const ModalityBundle& bundle,
                         Task expected_task);
GoldAnnotation load_gold(const ManifestEntry& entry);

struct CorpusValidation {
  std::vector<Violation> violations;  // sorted
  std::map<std::string, int> partition;  // "shared" / "specific" -> instance count
};

/// Loads every entry; never stops at the first failure.
CorpusValidation validate_corpus(const Manifest& manifest);

/// Writes a prediction or gold file (pretty json, trailing newline).
void write_annotation(const std::filesystem::path& path, const Annotation& a);
/// Reads a prediction file without bundle checks. Throws FormatError.
Annotation read_annotation(const std::filesystem::path& path);

}  // namespace muie
