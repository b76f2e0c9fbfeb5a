// Task prompts and the three-part meta-response format (<UIE>, <Module>,
// <Instruction>) emitted by the extraction backend.
#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muie/core.hpp"

namespace muie {

struct PromptSpec {
  Task task = Task::ner;
  /// Entity labels (NER), relation labels (RE) or event types (EE).
  std::vector<std::string> label_schema;
  /// EE only: candidate argument roles; the line is omitted when empty.
  std::vector<std::string> argument_roles;
  std::set<Modality> modalities_present;
  /// Appended verbatim as the input line when present.
  std::string input_text;
};

/// Throws InvalidArgument for an empty schema, no modalities, or labels that
/// are empty, untrimmed or contain ',' or a line break.
std::string build_prompt(const PromptSpec& spec);

/// Recovers the candidate label list from a prompt produced by build_prompt
/// (event types for EE). Returns an empty vector if the line is absent.
std::vector<std::string> parse_label_line(std::string_view prompt);
std::vector<std::string> parse_argument_role_line(std::string_view prompt);

// ---------------------------------------------------------------------------

struct ModuleCall {
  std::string module;
  std::string instruction;
  friend bool operator==(const ModuleCall&, const ModuleCall&) = default;
};

struct ParseWarning {
  std::size_t offset = 0;
  std::string message;
};

struct ParsedEntity {
  EntityMention mention;
  bool concept_marker = false;
  friend bool operator==(const ParsedEntity&, const ParsedEntity&) = default;
};

struct ParsedRelation {
  RelationTriple triple;
  bool subject_concept = false;
  bool object_concept = false;
  friend bool operator==(const ParsedRelation&, const ParsedRelation&) = default;
};

struct ParsedEvent {
  EventRecord event;
  bool trigger_concept = false;
  std::vector<char> argument_concept;  // parallel to event.arguments
  friend bool operator==(const ParsedEvent&, const ParsedEvent&) = default;
};

struct MetaResponse {
  Task task = Task::ner;
  std::string uie_block;  // raw text of the <UIE> section(s)
  std::vector<ParsedEntity> entities;
  std::vector<ParsedRelation> relations;
  std::vector<ParsedEvent> events;
  std::vector<ModuleCall> module_calls;
  std::vector<ParseWarning> warnings;

  /// Structural equality: records and module calls; raw text and warnings
  /// are ignored.
  friend bool operator==(const MetaResponse& a, const MetaResponse& b) {
    return a.task == b.task && a.entities == b.entities && a.relations == b.relations &&
           a.events == b.events && a.module_calls == b.module_calls;
  }
};

/// Parses raw model output. Throws ParseError if no <UIE> section exists or an
/// <Instruction> appears without a preceding <Module>. Malformed tuples are
/// skipped and reported in `warnings`. Mentions and labels are normalized.
MetaResponse parse_meta_response(std::string_view text, Task task);

/// Canonical text form; parse_meta_response(render_meta_response(m), m.task) == m.
std::string render_meta_response(const MetaResponse& meta);

/// Records only (no concept flags), as an Annotation.
Annotation to_annotation(const MetaResponse& meta, std::string instance_id = {});

// ---------------------------------------------------------------------------

struct GroundingResult {
  std::size_t call_index = 0;
  GroundingRef payload;
};

/// Attaches grounding payloads to records. A result is linked to the first
/// mention quoted in its call's instruction; remaining results of each
/// modality go, in order, to the <concept>-flagged mentions still lacking that
/// modality; anything left over stays as an instance-level grounding.
/// Throws InvalidArgument if a call_index is out of range.
PredictionSet link_groundings(const MetaResponse& meta, std::span<const GroundingResult> results,
                              std::string instance_id = {});

}  // namespace muie
