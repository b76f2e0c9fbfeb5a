#include "muie/metaresponse.hpp"

#include <algorithm>
#include <array>
#include <optional>

namespace muie {

namespace {

constexpr std::string_view kConceptToken = "<concept>";
constexpr std::string_view kUieTag = "<UIE>";
constexpr std::string_view kModuleTag = "<Module>";
constexpr std::string_view kInstructionTag = "<Instruction>";

constexpr std::string_view kNerLabelPrefix = "Candidate category labels: ";
constexpr std::string_view kReLabelPrefix = "Candidate relation labels: ";
constexpr std::string_view kEeLabelPrefix = "Candidate event types: ";
constexpr std::string_view kEeRolePrefix = "Candidate event argument types: ";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }
bool is_space_or_nl(char c) { return is_space(c) || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space_or_nl(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space_or_nl(s.back())) s.remove_suffix(1);
  return s;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

void check_labels(const std::vector<std::string>& labels, const char* what) {
  for (const auto& l : labels) {
    if (l.empty() || trim(l) != l || l.find_first_of(",\n\r") != std::string::npos) {
      throw InvalidArgument(std::string("build_prompt: invalid ") + what + " '" + l + "'");
    }
  }
}

std::vector<std::string> split_label_line(std::string_view prompt, std::string_view prefix) {
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    const std::size_t eol = std::min(prompt.find('\n', pos), prompt.size());
    const std::string_view line = prompt.substr(pos, eol - pos);
    if (line.starts_with(prefix)) {
      std::vector<std::string> out;
      std::string_view rest = line.substr(prefix.size());
      while (true) {
        const std::size_t comma = rest.find(',');
        out.emplace_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      return out;
    }
    pos = eol + 1;
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompts

std::string build_prompt(const PromptSpec& spec) {
  if (spec.label_schema.empty()) throw InvalidArgument("build_prompt: empty label schema");
  if (spec.modalities_present.empty()) throw InvalidArgument("build_prompt: no modalities");
  check_labels(spec.label_schema, "label");
  check_labels(spec.argument_roles, "argument role");

  const bool grounded = std::any_of(spec.modalities_present.begin(), spec.modalities_present.end(),
                                    [](Modality m) { return m != Modality::text; });
  std::string p;
  switch (spec.task) {
    case Task::ner:
      p += "Please recognize all entity words and categorize them by pre-defined labels in the "
           "given text, and outline them in the given image or video or audio correspondingly. "
           "The output format should be ``(entity1, label1)(entity2, label2)''.\n";
      if (grounded) {
        p += "If an entity possibly has a counterpart in the given image or video or audio, "
             "please generate a token ``<concept>'' after the entity word, for subsequent "
             "cross-modal grounding.\n";
      }
      p += kNerLabelPrefix;
      p += join(spec.label_schema, ", ") + "\n";
      break;
    case Task::re:
      p += "Please extract all relations between named entities, and outline them in the given "
           "image or video or audio correspondingly. The output format should be ``(subject "
           "entity, relation, object entity)''.\n";
      if (grounded) {
        p += "If an entity possibly has a counterpart in the given image or video or audio, "
             "please generate a token ``<concept>'' after the entity word, for subsequent "
             "cross-modal grounding.\n";
      }
      p += kReLabelPrefix;
      p += join(spec.label_schema, ", ") + "\n";
      break;
    case Task::ee:
      p += "Extract all the possible events in the video, and track the argument mentions "
           "correspondingly. Each event associated with an event type must have a trigger verb. "
           "If possible, please give detailed arguments for each event. The output format should "
           "be ``(trigger, event type, role1: argument1, role2: argument2)''.\n";
      if (grounded) {
        p += "If an argument possibly has a counterpart in the given image or video or audio, "
             "please generate a token ``<concept>'' after the argument word, for subsequent "
             "cross-modal grounding.\n";
      }
      p += kEeLabelPrefix;
      p += join(spec.label_schema, ", ") + "\n";
      if (!spec.argument_roles.empty()) {
        p += kEeRolePrefix;
        p += join(spec.argument_roles, ", ") + "\n";
      }
      break;
    default:
      throw InvalidArgument("build_prompt: unknown task");
  }

  std::vector<std::string> present;
  for (Modality m : spec.modalities_present) {
    std::string name(to_string(m));
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    present.push_back(std::move(name));
  }
  p += "Input Modalities: " + join(present, ", ") + "\n";
  if (!spec.input_text.empty()) p += "Input Text: " + spec.input_text + "\n";
  return p;
}

std::vector<std::string> parse_label_line(std::string_view prompt) {
  for (auto prefix : {kNerLabelPrefix, kReLabelPrefix, kEeLabelPrefix}) {
    auto labels = split_label_line(prompt, prefix);
    if (!labels.empty()) return labels;
  }
  return {};
}

std::vector<std::string> parse_argument_role_line(std::string_view prompt) {
  return split_label_line(prompt, kEeRolePrefix);
}

// ---------------------------------------------------------------------------
// Tuple grammar

namespace {

/// Piece of a field between top-level ':' separators.
struct Segment {
  std::string leading;  // whitespace preceding the segment
  std::string text;
  bool quoted = false;
};

struct Field {
  std::vector<Segment> segments{1};
  bool concept_marker = false;

  bool blank() const {
    return std::all_of(segments.begin(), segments.end(), [](const Segment& s) {
      return !s.quoted && trim(s.text).empty();
    }) && segments.size() == 1;
  }
  std::string joined(std::size_t from = 0) const {
    std::string out;
    for (std::size_t i = from; i < segments.size(); ++i) {
      if (i > from) out += ':';
      if (i > from) out += segments[i].leading;
      out += segments[i].text;
    }
    return out;
  }
};

struct QuoteStyle {
  std::string_view open;
  std::array<std::string_view, 2> close;
  bool escapes;
};

// Opening quote -> accepted closing quotes. Only '"' supports backslash
// escapes; the others close at a quote followed by a separator.
constexpr std::array<QuoteStyle, 5> kQuoteStyles{{
    {"\"", {"\"", "\""}, true},
    {"'", {"'", "'"}, false},
    {"`", {"'", "`"}, false},
    {"\xE2\x80\x98", {"\xE2\x80\x99", "'"}, false},          // ‘ ’
    {"\xE2\x80\x9C", {"\xE2\x80\x9D", "\""}, false},         // “ ”
}};

class BlockScanner {
 public:
  BlockScanner(std::string_view s, std::size_t base, std::vector<ParseWarning>& warnings)
      : s_(s), base_(base), warnings_(warnings) {}

  std::size_t pos() const { return i_; }
  bool done() const { return i_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[i_]; }
  void advance(std::size_t n = 1) { i_ = std::min(s_.size(), i_ + n); }
  bool at(std::string_view token) const { return s_.substr(i_).starts_with(token); }

  void warn(std::size_t local_offset, std::string message) {
    warnings_.push_back({base_ + local_offset, std::move(message)});
  }

  void skip_spaces() {
    while (!done() && is_space(peek())) advance();
  }
  void skip_blank() {
    while (!done() && is_space_or_nl(peek())) advance();
  }
  std::size_t line_end() const {
    const auto eol = s_.find('\n', i_);
    return eol == std::string_view::npos ? s_.size() : eol;
  }

  /// Reads comma/colon separated fields until `closer` (')' for tuples, '\n'
  /// for lines). Returns nullopt on a malformed field list; the scanner is
  /// left at the end of the offending line in that case.
  std::optional<std::vector<Field>> read_fields(char closer, bool split_commas) {
    std::vector<Field> fields(1);
    bool seg_start = true;
    int depth = 0;
    while (true) {
      if (done()) {
        if (closer == '\n' && depth == 0) return finish(fields);
        return std::nullopt;
      }
      const char c = peek();
      if (c == '\n') {
        if (closer == '\n' && depth == 0) return finish(fields);
        return std::nullopt;
      }
      Field& field = fields.back();
      Segment& seg = field.segments.back();
      if (seg_start && is_space(c)) {
        seg.leading += c;
        advance();
        continue;
      }
      if (seg_start) {
        seg_start = false;
        if (const QuoteStyle* q = quote_at()) {
          advance(q->open.size());
          if (!read_quoted(*q, seg.text)) return std::nullopt;
          seg.quoted = true;
          continue;
        }
      }
      if (at(kConceptToken)) {
        field.concept_marker = true;
        advance(kConceptToken.size());
        continue;
      }
      if (depth == 0) {
        if (c == closer) {
          advance();
          return finish(fields);
        }
        if (c == ',' && split_commas) {
          fields.emplace_back();
          seg_start = true;
          advance();
          continue;
        }
        if (c == ':') {
          field.segments.emplace_back();
          seg_start = true;
          advance();
          continue;
        }
      }
      if (c == '(') ++depth;
      if (c == ')') --depth;
      seg.text += c;
      advance();
    }
  }

 private:
  const QuoteStyle* quote_at() const {
    for (const auto& q : kQuoteStyles) {
      if (at(q.open)) return &q;
    }
    return nullptr;
  }

  /// True if, after optional spaces, the next byte ends a field.
  bool separator_follows(std::size_t from) const {
    while (from < s_.size() && is_space(s_[from])) ++from;
    if (from >= s_.size()) return true;
    const char c = s_[from];
    return c == ',' || c == ')' || c == ':' || c == '\n' || c == '<';
  }

  bool read_quoted(const QuoteStyle& q, std::string& out) {
    while (!done()) {
      const char c = peek();
      if (c == '\n') return false;
      if (q.escapes && c == '\\') {
        advance();
        if (done() || peek() == '\n') return false;
        out += peek();
        advance();
        continue;
      }
      for (auto close : q.close) {
        if (at(close) && (q.escapes || separator_follows(i_ + close.size()))) {
          advance(close.size());
          return true;
        }
      }
      out += c;
      advance();
    }
    return false;
  }

  static std::vector<Field> finish(std::vector<Field>& fields) {
    if (fields.size() > 1 && fields.back().blank() && !fields.back().concept_marker) fields.pop_back();
    for (auto& f : fields) {
      for (auto& seg : f.segments) {
        if (!seg.quoted) {
          while (!seg.text.empty() && is_space(seg.text.back())) seg.text.pop_back();
        }
      }
    }
    return std::move(fields);
  }

  std::string_view s_;
  std::size_t base_;
  std::size_t i_ = 0;
  std::vector<ParseWarning>& warnings_;
};

bool ignorable_filler(std::string_view text) {
  std::string_view t = trim(text);
  while (!t.empty()) {
    if (t.front() == ',' || t.front() == ';' || t.front() == '.' || is_space_or_nl(t.front())) {
      t.remove_prefix(1);
    } else if (t.starts_with("\xE2\x8B\xAF") || t.starts_with("\xE2\x80\xA6")) {  // ⋯ …
      t.remove_prefix(3);
    } else {
      return false;
    }
  }
  return true;
}

class UieBlockParser {
 public:
  UieBlockParser(MetaResponse& meta, std::string_view block, std::size_t base)
      : meta_(meta), sc_(block, base, meta.warnings) {}

  void run() {
    while (true) {
      sc_.skip_blank();
      if (sc_.done()) return;
      const std::size_t start = sc_.pos();
      const char c = sc_.peek();
      if (c == '(') {
        sc_.advance();
        auto fields = sc_.read_fields(')', true);
        if (!fields) {
          sc_.warn(start, "unterminated or malformed tuple");
          skip_to_line_end();
          continue;
        }
        sc_.skip_spaces();
        bool trailing_concept = false;
        if (sc_.at(kConceptToken)) {
          trailing_concept = true;
          sc_.advance(kConceptToken.size());
        }
        if (!fields->empty() && trailing_concept) fields->front().concept_marker = true;
        accept_tuple(*fields, start);
        continue;
      }
      if (meta_.task == Task::ee && c == '[') {
        parse_event_header(start);
        continue;
      }
      if (meta_.task == Task::ee && open_event_ && (c == '-' || c == '*')) {
        sc_.advance();
        parse_argument_line(start);
        continue;
      }
      skip_junk(start);
    }
  }

 private:
  void skip_to_line_end() {
    while (!sc_.done() && sc_.peek() != '\n') sc_.advance();
  }

  void skip_junk(std::size_t start) {
    std::string skipped;
    while (!sc_.done() && sc_.peek() != '\n' && sc_.peek() != '(') {
      skipped += sc_.peek();
      sc_.advance();
    }
    if (!ignorable_filler(skipped)) sc_.warn(start, "unexpected text '" + std::string(trim(skipped)) + "'");
    if (!sc_.done() && sc_.peek() == '\n') open_event_ = open_event_ && ignorable_filler(skipped);
  }

  static std::string norm(const Field& f, std::size_t from = 0) {
    return normalize_mention(f.joined(from));
  }

  void accept_tuple(const std::vector<Field>& fields, std::size_t start) {
    open_event_ = false;
    switch (meta_.task) {
      case Task::ner: {
        if (fields.size() != 2) {
          sc_.warn(start, "entity tuple needs 2 fields, got " + std::to_string(fields.size()));
          return;
        }
        ParsedEntity e;
        e.mention.surface = norm(fields[0]);
        e.mention.label = norm(fields[1]);
        e.concept_marker = fields[0].concept_marker;
        if (e.mention.surface.empty() || e.mention.label.empty()) {
          sc_.warn(start, "empty entity surface or label");
          return;
        }
        meta_.entities.push_back(std::move(e));
        return;
      }
      case Task::re: {
        if (fields.size() != 3) {
          sc_.warn(start, "relation tuple needs 3 fields, got " + std::to_string(fields.size()));
          return;
        }
        ParsedRelation r;
        r.triple.subject.surface = norm(fields[0]);
        r.triple.relation = norm(fields[1]);
        r.triple.object.surface = norm(fields[2]);
        r.subject_concept = fields[0].concept_marker;
        r.object_concept = fields[2].concept_marker;
        if (r.triple.subject.surface.empty() || r.triple.relation.empty() ||
            r.triple.object.surface.empty()) {
          sc_.warn(start, "empty relation field");
          return;
        }
        meta_.relations.push_back(std::move(r));
        return;
      }
      case Task::ee: {
        if (fields.size() < 2) {
          sc_.warn(start, "event tuple needs at least trigger and type");
          return;
        }
        ParsedEvent ev;
        ev.event.trigger = norm(fields[0]);
        ev.event.event_type = norm(fields[1]);
        ev.trigger_concept = fields[0].concept_marker;
        if (ev.event.trigger.empty() || ev.event.event_type.empty()) {
          sc_.warn(start, "empty event trigger or type");
          return;
        }
        for (std::size_t k = 2; k < fields.size(); ++k) {
          add_argument(ev, fields[k], start);
        }
        meta_.events.push_back(std::move(ev));
        return;
      }
    }
  }

  void add_argument(ParsedEvent& ev, const Field& f, std::size_t start) {
    if (f.segments.size() < 2) {
      sc_.warn(start, "event argument without 'role: mention' form");
      return;
    }
    EventArgument arg;
    arg.role = normalize_mention(f.segments[0].text);
    arg.mention = norm(f, 1);
    if (arg.role.empty() || arg.mention.empty()) {
      sc_.warn(start, "empty event argument role or mention");
      return;
    }
    ev.event.arguments.push_back(std::move(arg));
    ev.argument_concept.push_back(f.concept_marker ? 1 : 0);
  }

  void parse_event_header(std::size_t start) {
    open_event_ = false;
    sc_.advance();  // '['
    std::string type;
    while (!sc_.done() && sc_.peek() != ']' && sc_.peek() != '\n') {
      type += sc_.peek();
      sc_.advance();
    }
    if (sc_.peek() != ']') {
      sc_.warn(start, "unterminated event type bracket");
      return;
    }
    sc_.advance();
    auto fields = sc_.read_fields('\n', false);
    if (!fields || fields->empty()) {
      sc_.warn(start, "malformed event header");
      skip_to_line_end();
      return;
    }
    const Field& f = fields->front();
    std::size_t from = 0;
    if (f.segments.size() >= 2) {
      std::string key = fold_case(normalize_mention(f.segments[0].text));
      if (key == "trigger") from = 1;
    }
    ParsedEvent ev;
    ev.event.event_type = normalize_mention(type);
    ev.event.trigger = norm(f, from);
    ev.trigger_concept = f.concept_marker;
    if (ev.event.trigger.empty() || ev.event.event_type.empty()) {
      sc_.warn(start, "empty event trigger or type");
      return;
    }
    meta_.events.push_back(std::move(ev));
    open_event_ = true;
  }

  void parse_argument_line(std::size_t start) {
    auto fields = sc_.read_fields('\n', false);
    if (!fields || fields->empty()) {
      sc_.warn(start, "malformed argument line");
      skip_to_line_end();
      return;
    }
    add_argument(meta_.events.back(), fields->front(), start);
  }

  MetaResponse& meta_;
  BlockScanner sc_;
  bool open_event_ = false;
};

enum class Tag { uie, module, instruction };

struct TagHit {
  Tag tag;
  std::size_t pos;
  std::size_t len;
};

std::optional<TagHit> next_tag(std::string_view text, std::size_t from) {
  while (true) {
    const std::size_t lt = text.find('<', from);
    if (lt == std::string_view::npos) return std::nullopt;
    if (lt > 0 && text[lt - 1] == '\\') {  // escaped inside a quoted field
      from = lt + 1;
      continue;
    }
    const std::string_view rest = text.substr(lt);
    if (rest.starts_with(kUieTag)) return TagHit{Tag::uie, lt, kUieTag.size()};
    if (rest.starts_with(kModuleTag)) return TagHit{Tag::module, lt, kModuleTag.size()};
    if (rest.starts_with(kInstructionTag)) {
      return TagHit{Tag::instruction, lt, kInstructionTag.size()};
    }
    from = lt + 1;
  }
}

bool needs_quoting(std::string_view s) {
  if (s.empty()) return true;
  if (s.find_first_of(",():\"\\<[]'`\n") != std::string_view::npos) return true;
  for (const auto& q : kQuoteStyles) {
    if (s.find(q.open) != std::string_view::npos) return true;
    for (auto c : q.close) {
      if (s.find(c) != std::string_view::npos) return true;
    }
  }
  return s.front() == '-' || s.front() == '*' || is_space_or_nl(s.front()) ||
         is_space_or_nl(s.back());
}

std::string render_field(std::string_view s, bool concept_marker = false) {
  std::string out;
  if (needs_quoting(s)) {
    out += '"';
    for (char c : s) {
      if (c == '"' || c == '\\' || c == '<') out += '\\';
      out += c;
    }
    out += '"';
  } else {
    out += s;
  }
  if (concept_marker) out += kConceptToken;
  return out;
}

}  // namespace

MetaResponse parse_meta_response(std::string_view text, Task task) {
  MetaResponse meta;
  meta.task = task;

  const std::size_t uie_at = text.find(kUieTag);
  if (uie_at == std::string_view::npos) throw ParseError("missing <UIE> section", text.size());
  auto hit = next_tag(text, 0);
  if (!trim(text.substr(0, hit->pos)).empty()) {
    meta.warnings.push_back({0, "text before first section ignored"});
  }

  bool seen_uie = false;
  bool module_open = false;
  while (hit) {
    const std::size_t content_start = hit->pos + hit->len;
    const auto following = next_tag(text, content_start);
    const std::size_t content_end = following ? following->pos : text.size();
    const std::string_view content = text.substr(content_start, content_end - content_start);
    switch (hit->tag) {
      case Tag::uie: {
        if (seen_uie) meta.warnings.push_back({hit->pos, "repeated <UIE> section merged"});
        seen_uie = true;
        if (module_open) {
          meta.warnings.push_back({hit->pos, "<Module> without <Instruction>"});
          module_open = false;
        }
        meta.uie_block += content;
        UieBlockParser(meta, content, content_start).run();
        break;
      }
      case Tag::module: {
        if (module_open) meta.warnings.push_back({hit->pos, "<Module> without <Instruction>"});
        meta.module_calls.push_back({std::string(trim(content)), {}});
        module_open = true;
        break;
      }
      case Tag::instruction: {
        if (!module_open) throw ParseError("<Instruction> without preceding <Module>", hit->pos);
        meta.module_calls.back().instruction = std::string(trim(content));
        module_open = false;
        break;
      }
    }
    hit = following;
  }
  if (module_open) meta.warnings.push_back({text.size(), "<Module> without <Instruction>"});
  return meta;
}

std::string render_meta_response(const MetaResponse& meta) {
  std::string out = "<UIE>\n";
  for (const auto& e : meta.entities) {
    out += "(" + render_field(e.mention.surface, e.concept_marker) + ", " +
           render_field(e.mention.label) + ")\n";
  }
  for (const auto& r : meta.relations) {
    out += "(" + render_field(r.triple.subject.surface, r.subject_concept) + ", " +
           render_field(r.triple.relation) + ", " +
           render_field(r.triple.object.surface, r.object_concept) + ")\n";
  }
  for (const auto& ev : meta.events) {
    out += "(" + render_field(ev.event.trigger, ev.trigger_concept) + ", " +
           render_field(ev.event.event_type);
    for (std::size_t k = 0; k < ev.event.arguments.size(); ++k) {
      const auto& a = ev.event.arguments[k];
      const bool flagged = k < ev.argument_concept.size() && ev.argument_concept[k];
      out += ", " + render_field(a.role) + ": " + render_field(a.mention, flagged);
    }
    out += ")\n";
  }
  for (const auto& call : meta.module_calls) {
    out += "<Module>\n" + call.module + "\n<Instruction>\n" + call.instruction + "\n";
  }
  return out;
}

Annotation to_annotation(const MetaResponse& meta, std::string instance_id) {
  Annotation a;
  a.instance_id = std::move(instance_id);
  a.task = meta.task;
  for (const auto& e : meta.entities) a.entities.push_back(e.mention);
  for (const auto& r : meta.relations) a.relations.push_back(r.triple);
  for (const auto& ev : meta.events) a.events.push_back(ev.event);
  return a;
}

// ---------------------------------------------------------------------------
// Grounding linkage

namespace {

/// Quoted spans inside an instruction; falls back to the text after the
/// first ':' when nothing is quoted.
std::vector<std::string> quoted_mentions(std::string_view instruction) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < instruction.size()) {
    const QuoteStyle* style = nullptr;
    for (const auto& q : kQuoteStyles) {
      if (instruction.substr(i).starts_with(q.open)) {
        style = &q;
        break;
      }
    }
    if (!style) {
      ++i;
      continue;
    }
    const std::size_t body = i + style->open.size();
    std::size_t best = std::string_view::npos;
    std::size_t close_len = 0;
    for (auto close : style->close) {
      const auto at = instruction.find(close, body);
      if (at < best) {
        best = at;
        close_len = close.size();
      }
    }
    if (best == std::string_view::npos) break;
    out.push_back(normalize_mention(instruction.substr(body, best - body)));
    i = best + close_len;
  }
  if (out.empty()) {
    const auto colon = instruction.find(':');
    if (colon != std::string_view::npos) {
      out.push_back(normalize_mention(instruction.substr(colon + 1)));
    }
  }
  return out;
}

struct MentionSlot {
  const std::string* surface;
  GroundingSlots* slots;
  bool concept_marker;
};

}  // namespace

PredictionSet link_groundings(const MetaResponse& meta, std::span<const GroundingResult> results,
                              std::string instance_id) {
  for (const auto& r : results) {
    if (r.call_index >= meta.module_calls.size()) {
      throw InvalidArgument("link_groundings: call_index " + std::to_string(r.call_index) +
                            " out of range (" + std::to_string(meta.module_calls.size()) +
                            " calls)");
    }
  }
  PredictionSet pred = to_annotation(meta, std::move(instance_id));

  std::vector<MentionSlot> mentions;
  for (std::size_t i = 0; i < pred.entities.size(); ++i) {
    auto& e = pred.entities[i];
    mentions.push_back({&e.surface, &e.groundings, meta.entities[i].concept_marker});
  }
  for (std::size_t i = 0; i < pred.relations.size(); ++i) {
    auto& r = pred.relations[i];
    mentions.push_back({&r.subject.surface, &r.subject.groundings, meta.relations[i].subject_concept});
    mentions.push_back({&r.object.surface, &r.object.groundings, meta.relations[i].object_concept});
  }
  for (std::size_t i = 0; i < pred.events.size(); ++i) {
    auto& args = pred.events[i].arguments;
    const auto& flags = meta.events[i].argument_concept;
    for (std::size_t k = 0; k < args.size(); ++k) {
      mentions.push_back({&args[k].mention, &args[k].groundings, k < flags.size() && flags[k]});
    }
  }

  // Pass 1: instruction quotes a mention.
  std::vector<char> claimed(results.size(), 0);
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto quoted = quoted_mentions(meta.module_calls[results[r].call_index].instruction);
    const Modality modality = results[r].payload.modality();
    for (const auto& q : quoted) {
      auto it = std::find_if(mentions.begin(), mentions.end(), [&](const MentionSlot& m) {
        return *m.surface == q && !m.slots->has(modality);
      });
      if (it != mentions.end()) {
        it->slots->attach(results[r].payload);
        claimed[r] = 1;
        break;
      }
    }
  }

  // Pass 2: positional, per modality, over <concept>-flagged mentions.
  for (std::size_t r = 0; r < results.size(); ++r) {
    if (claimed[r]) continue;
    const Modality modality = results[r].payload.modality();
    auto it = std::find_if(mentions.begin(), mentions.end(), [&](const MentionSlot& m) {
      return m.concept_marker && !m.slots->has(modality);
    });
    if (it != mentions.end()) {
      it->slots->attach(results[r].payload);
    } else {
      pred.groundings.push_back(results[r].payload);
    }
  }
  return pred;
}

}  // namespace muie
