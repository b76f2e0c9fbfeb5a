#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "muie/scoring.hpp"

namespace muie {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view s) {
  if (s == "table") return ReportFormat::table;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw InvalidArgument("unknown report format '" + std::string(s) + "'");
}

std::string format_percent(double value) {
  // Round in tenths of a percent so 0.474 prints "47.4" regardless of the
  // binary representation of value * 100.
  const long long tenths = std::llround(value * 1000.0);
  const long long whole = tenths / 10;
  const long long frac = std::llabs(tenths % 10);
  std::string out = (tenths < 0 && whole == 0) ? "-" : "";
  out += std::to_string(whole) + "." + std::to_string(frac);
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// table

struct Column {
  ModalityCombo combo;
  Task task;
  std::string dataset;
  Metric metric;
  auto tie() const { return std::make_tuple(combo, task, dataset, metric); }
  bool operator<(const Column& o) const { return tie() < o.tie(); }
  bool operator==(const Column& o) const { return tie() == o.tie(); }
};

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render_table(const ScoreReport& report) {
  std::set<Column> column_set;
  std::vector<std::string> splits;
  for (const auto& c : report.cells) {
    column_set.insert({c.key.combo, c.key.task, c.key.dataset, c.key.metric});
    if (std::find(splits.begin(), splits.end(), c.key.split) == splits.end()) {
      splits.push_back(c.key.split);
    }
  }
  const std::vector<Column> columns(column_set.begin(), column_set.end());
  if (columns.empty()) return "(empty report)\n";

  // values[row][col]
  std::vector<std::vector<std::string>> values(splits.size(),
                                               std::vector<std::string>(columns.size(), "-"));
  for (const auto& c : report.cells) {
    const auto row = std::find(splits.begin(), splits.end(), c.key.split) - splits.begin();
    const auto col = std::lower_bound(columns.begin(), columns.end(),
                                      Column{c.key.combo, c.key.task, c.key.dataset, c.key.metric}) -
                     columns.begin();
    values[row][col] = format_percent(c.value);
  }

  std::vector<std::size_t> width(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    width[j] = std::string(to_string(columns[j].metric)).size();
    for (const auto& row : values) width[j] = std::max(width[j], row[j].size());
  }
  std::size_t label_width = std::string("split").size();
  for (const auto& s : splits) label_width = std::max(label_width, s.size());

  // Group headers span consecutive columns; widen the group's last column
  // if the label does not fit.
  const std::string sep = "  ";
  auto widen_groups = [&](auto same_group, auto label_of) {
    std::size_t start = 0;
    while (start < columns.size()) {
      std::size_t end = start + 1;
      while (end < columns.size() && same_group(columns[start], columns[end])) ++end;
      std::size_t span = 0;
      for (std::size_t j = start; j < end; ++j) span += width[j] + (j + 1 < end ? sep.size() : 0);
      const std::size_t need = label_of(columns[start]).size();
      if (need > span) width[end - 1] += need - span;
      start = end;
    }
  };
  auto same_combo = [](const Column& a, const Column& b) { return a.combo == b.combo; };
  auto same_dataset = [](const Column& a, const Column& b) {
    return a.combo == b.combo && a.task == b.task && a.dataset == b.dataset;
  };
  auto combo_label = [](const Column& c) { return std::string(to_string(c.combo)); };
  auto dataset_label = [](const Column& c) { return c.dataset; };
  widen_groups(same_combo, combo_label);
  widen_groups(same_dataset, dataset_label);

  auto group_row = [&](auto same_group, auto label_of, const std::string& corner) {
    std::string line = pad(corner, label_width);
    std::size_t start = 0;
    while (start < columns.size()) {
      std::size_t end = start + 1;
      while (end < columns.size() && same_group(columns[start], columns[end])) ++end;
      std::size_t span = 0;
      for (std::size_t j = start; j < end; ++j) span += width[j] + (j + 1 < end ? sep.size() : 0);
      line += sep + pad(label_of(columns[start]), span);
      start = end;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    return line + "\n";
  };

  std::string out;
  out += group_row(same_combo, combo_label, "");
  out += group_row(same_dataset, dataset_label, "");
  std::string metric_line = pad("split", label_width);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    metric_line += sep + pad(std::string(to_string(columns[j].metric)), width[j]);
  }
  while (!metric_line.empty() && metric_line.back() == ' ') metric_line.pop_back();
  out += metric_line + "\n";
  for (std::size_t i = 0; i < splits.size(); ++i) {
    std::string line = pad(splits[i], label_width);
    for (std::size_t j = 0; j < columns.size(); ++j) line += sep + pad(values[i][j], width[j]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// csv (RFC 4180: CRLF records, fields quoted when needed)

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render_csv(const ScoreReport& report) {
  std::string out =
      "split,modality_combo,task,dataset,metric,value,percent,tp,fp,fn,vacuous,instance_ids\r\n";
  for (const auto& c : report.cells) {
    std::string ids;
    for (std::size_t i = 0; i < c.instance_ids.size(); ++i) {
      if (i) ids += ';';
      ids += c.instance_ids[i];
    }
    std::vector<std::string> fields{
        c.key.split,
        std::string(to_string(c.key.combo)),
        std::string(to_string(c.key.task)),
        c.key.dataset,
        std::string(to_string(c.key.metric)),
        exact(c.value),
        format_percent(c.value),
        c.counts ? std::to_string(c.counts->tp) : "",
        c.counts ? std::to_string(c.counts->fp) : "",
        c.counts ? std::to_string(c.counts->fn) : "",
        c.counts ? "" : std::to_string(c.vacuous),
        ids,
    };
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += "\r\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// json

json cell_to_json(const Cell& c) {
  json j{
      {"split", c.key.split},
      {"modality_combo", to_string(c.key.combo)},
      {"task", to_string(c.key.task)},
      {"dataset", c.key.dataset},
      {"metric", to_string(c.key.metric)},
      {"value", c.value},
      {"instance_ids", c.instance_ids},
  };
  if (c.counts) {
    j["tp"] = c.counts->tp;
    j["fp"] = c.counts->fp;
    j["fn"] = c.counts->fn;
  } else {
    j["vacuous"] = c.vacuous;
  }
  return j;
}

}  // namespace

std::string render_report(const ScoreReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::table: return render_table(report);
    case ReportFormat::csv: return render_csv(report);
    case ReportFormat::json: {
      json cells = json::array();
      for (const auto& c : report.cells) cells.push_back(cell_to_json(c));
      json doc{{"format_version", ScoreReport::kFormatVersion}, {"cells", std::move(cells)}};
      return doc.dump(2) + "\n";
    }
  }
  throw InvalidArgument("unknown report format");
}

ScoreReport report_from_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: invalid json: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != ScoreReport::kFormatVersion) {
      throw FormatError("report: unsupported format_version", "UNSUPPORTED_VERSION");
    }
    ScoreReport report;
    for (const auto& j : doc.at("cells")) {
      Cell c;
      c.key.split = j.at("split").get<std::string>();
      c.key.combo = parse_modality_combo(j.at("modality_combo").get<std::string>());
      c.key.task = parse_task(j.at("task").get<std::string>());
      c.key.dataset = j.at("dataset").get<std::string>();
      c.key.metric = parse_metric(j.at("metric").get<std::string>());
      c.value = j.at("value").get<double>();
      c.instance_ids = j.at("instance_ids").get<std::vector<std::string>>();
      if (j.contains("tp")) {
        c.counts = PRF::from_counts(j.at("tp").get<long>(), j.at("fp").get<long>(),
                                    j.at("fn").get<long>());
      } else {
        c.vacuous = j.value("vacuous", 0);
      }
      report.cells.push_back(std::move(c));
    }
    std::sort(report.cells.begin(), report.cells.end(),
              [](const Cell& a, const Cell& b) { return a.key < b.key; });
    return report;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

}  // namespace muie
