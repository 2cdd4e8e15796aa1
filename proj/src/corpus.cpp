#include "narrative_audit/corpus.hpp"

#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>

#include "narrative_audit/error.hpp"
#include "narrative_audit/hashing.hpp"
#include "narrative_audit/text.hpp"

namespace naudit {

std::string record_id(std::string_view model, std::string_view prompt_text, int sample_index) {
  std::string material;
  material.reserve(model.size() + prompt_text.size() + 16);
  material.append(model).push_back('\x1f');
  material.append(prompt_text).push_back('\x1f');
  material += std::to_string(sample_index);
  return sha256_hex(material).substr(0, 32);
}

Json to_json(const NarrativeRecord& r) {
  return Json{{"id", r.id},
              {"model", r.model},
              {"scenario_id", r.scenario_id},
              {"power_condition", to_string(r.power_condition)},
              {"input_country", r.input_country},
              {"prompt_text", r.prompt_text},
              {"story_text", r.story_text},
              {"created_at", r.created_at},
              {"sample_index", r.sample_index},
              {"params", r.params}};
}

NarrativeRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
  for (const char* key : {"model", "scenario_id", "power_condition", "input_country",
                          "prompt_text", "story_text"}) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw ValidationError(std::string("record is missing string field '") + key + "'");
    }
  }
  NarrativeRecord r;
  r.model = j.at("model").get<std::string>();
  r.scenario_id = j.at("scenario_id").get<std::string>();
  r.power_condition = parse_condition(j.at("power_condition").get<std::string>());
  r.input_country = j.at("input_country").get<std::string>();
  r.prompt_text = j.at("prompt_text").get<std::string>();
  r.story_text = j.at("story_text").get<std::string>();
  if (r.story_text.empty()) throw ValidationError("record has empty story_text");
  r.created_at = j.value("created_at", std::string());
  r.sample_index = j.value("sample_index", 0);
  if (j.contains("params") && j.at("params").is_object()) r.params = j.at("params");
  r.id = j.contains("id") && j.at("id").is_string()
             ? j.at("id").get<std::string>()
             : record_id(r.model, r.prompt_text, r.sample_index);
  return r;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "native" || s == "Native") return CorpusFormat::Native;
  if (s == "upstream" || s == "upstream-study1" || s == "UpstreamStudy1") {
    return CorpusFormat::UpstreamStudy1;
  }
  throw ValidationError("unknown corpus format '" + std::string(s) + "'");
}

std::vector<CsvRow> parse_csv(std::string_view content) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool row_started = false;
  std::size_t line = 1;
  row.line = 1;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_started = true;
        break;
      case ',':
        row.fields.push_back(std::move(field));
        field.clear();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_started || !field.empty()) {
          row.fields.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row = CsvRow{};
        row_started = false;
        row.line = ++line;
        break;
      default:
        field.push_back(c);
        row_started = true;
    }
  }
  if (row_started || !field.empty()) {
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

IngestResult ingest_native(const std::filesystem::path& path) {
  IngestResult result;
  const auto rows = read_jsonl_lenient(path, [&](std::size_t line, const std::string& reason) {
    result.errors.push_back({line, reason});
  });
  for (const auto& row : rows) {
    try {
      result.records.push_back(record_from_json(row.value));
    } catch (const ValidationError& e) {
      result.errors.push_back({row.line, e.what()});
    }
  }
  return result;
}

IngestResult ingest_upstream(const std::filesystem::path& path,
                             const std::vector<Scenario>& scenarios, const Gazetteer& g) {
  IngestResult result;
  const auto rows = parse_csv(read_text_file(path));
  if (rows.empty()) throw ValidationError("upstream corpus has no header: " + path.string());

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows.front().fields.size(); ++i) {
    column[text::trim(rows.front().fields[i])] = i;
  }
  for (const char* required : {"model", "prompt", "story"}) {
    if (column.count(required) == 0) {
      throw ValidationError(std::string("upstream corpus lacks column '") + required + "'");
    }
  }

  struct Origin {
    std::string scenario_id;
    PowerCondition condition;
  };
  std::map<std::string, Origin> by_prompt;
  if (const Country* usa = g.find("USA")) {
    for (const auto& s : scenarios) {
      for (PowerCondition c : {PowerCondition::Neutral, PowerCondition::Laden}) {
        by_prompt.emplace(render_prompt(s, c, *usa, Phrasing::Demonym), Origin{s.id, c});
      }
    }
  }

  for (std::size_t i = 1; i < rows.size(); ++i) {
    const CsvRow& row = rows[i];
    auto get = [&](const char* name) -> std::string {
      const auto it = column.find(name);
      if (it == column.end() || it->second >= row.fields.size()) return {};
      return text::trim(row.fields[it->second]);
    };
    NarrativeRecord r;
    r.model = get("model");
    r.prompt_text = get("prompt");
    r.story_text = get("story");
    if (r.model.empty()) {
      result.errors.push_back({row.line, "missing model"});
      continue;
    }
    if (r.prompt_text.empty()) {
      result.errors.push_back({row.line, "missing prompt text"});
      continue;
    }
    if (r.story_text.empty()) {
      result.errors.push_back({row.line, "missing story text"});
      continue;
    }
    r.scenario_id = get("scenario_id");
    const std::string condition = get("power_condition");
    if (r.scenario_id.empty() || condition.empty()) {
      const auto it = by_prompt.find(r.prompt_text);
      if (it == by_prompt.end()) {
        result.errors.push_back({row.line, "prompt does not match any known scenario"});
        continue;
      }
      if (r.scenario_id.empty()) r.scenario_id = it->second.scenario_id;
      r.power_condition = condition.empty() ? it->second.condition : parse_condition(condition);
    } else {
      try {
        r.power_condition = parse_condition(condition);
      } catch (const ValidationError& e) {
        result.errors.push_back({row.line, e.what()});
        continue;
      }
    }
    if (find_scenario(scenarios, r.scenario_id) == nullptr) {
      result.errors.push_back({row.line, "unknown scenario id '" + r.scenario_id + "'"});
      continue;
    }
    r.input_country = get("input_country");
    if (r.input_country.empty()) r.input_country = "USA";
    if (g.find(r.input_country) == nullptr) {
      result.errors.push_back({row.line, "unknown input country '" + r.input_country + "'"});
      continue;
    }
    const std::string sample = get("sample_index");
    r.sample_index = sample.empty() ? static_cast<int>(i) : std::stoi(sample);
    r.created_at = get("created_at");
    r.id = record_id(r.model, r.prompt_text, r.sample_index);
    result.records.push_back(std::move(r));
  }
  return result;
}

}  // namespace

IngestResult ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                           const std::vector<Scenario>& scenarios, const Gazetteer& g) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("corpus file not found: " + path.string());
  }
  return format == CorpusFormat::Native ? ingest_native(path)
                                        : ingest_upstream(path, scenarios, g);
}

std::vector<NarrativeRecord> read_corpus(const std::filesystem::path& path) {
  std::vector<NarrativeRecord> out;
  for (const auto& row : read_jsonl(path)) {
    try {
      out.push_back(record_from_json(row.value));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return out;
}

CorpusWriter::CorpusWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  file_ = std::fopen(path.c_str(), "ab");
  if (file_ == nullptr) throw RuntimeFailure("cannot open corpus for append: " + path.string());
}

CorpusWriter::~CorpusWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void CorpusWriter::append(const NarrativeRecord& r) {
  const std::string line = to_json(r).dump() + "\n";
  std::lock_guard<std::mutex> lock(mu_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw RuntimeFailure("corpus write failed");
  }
  ::fsync(fileno(file_));
}

std::unordered_set<std::string> existing_record_ids(const std::filesystem::path& path) {
  std::unordered_set<std::string> ids;
  if (!std::filesystem::exists(path)) return ids;
  const std::string content = read_text_file(path);
  const auto last_newline = content.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete < content.size()) std::filesystem::resize_file(path, complete);

  std::size_t start = 0;
  while (start < complete) {
    const auto end = content.find('\n', start);
    const std::string_view line(content.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const Json j = Json::parse(line);
      if (j.is_object() && j.contains("id") && j.at("id").is_string()) {
        ids.insert(j.at("id").get<std::string>());
      }
    } catch (const Json::parse_error&) {
      // Skipped; the record will be regenerated.
    }
  }
  return ids;
}

}  // namespace naudit
