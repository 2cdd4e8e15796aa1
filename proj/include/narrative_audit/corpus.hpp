#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "narrative_audit/gazetteer.hpp"
#include "narrative_audit/jsonl.hpp"
#include "narrative_audit/prompt_forge.hpp"

namespace naudit {

struct NarrativeRecord {
  std::string id;
  std::string model;
  std::string scenario_id;
  PowerCondition power_condition = PowerCondition::Laden;
  CountryCode input_country;
  std::string prompt_text;
  std::string story_text;
  std::string created_at;  // ISO-8601 UTC; empty when the source had none
  int sample_index = 0;
  Json params = Json::object();  // decoding parameters as sent
};

// 128-bit truncated SHA-256 over (model, prompt_text, sample_index), hex encoded.
std::string record_id(std::string_view model, std::string_view prompt_text, int sample_index);

Json to_json(const NarrativeRecord& r);
NarrativeRecord record_from_json(const Json& j);

std::string utc_timestamp_now();

enum class CorpusFormat { Native, UpstreamStudy1 };
CorpusFormat parse_corpus_format(std::string_view s);

struct RowError {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<NarrativeRecord> records;
  std::vector<RowError> errors;
};

// Native: JSONL NarrativeRecord rows.
// UpstreamStudy1: CSV with header; required columns model, prompt, story;
// optional scenario_id, power_condition, input_country (default USA),
// sample_index. Missing scenario/condition columns are recovered by matching
// the prompt text against the US-anchored renderings of `scenarios`.
IngestResult ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                           const std::vector<Scenario>& scenarios, const Gazetteer& g);

std::vector<NarrativeRecord> read_corpus(const std::filesystem::path& path);

// Minimal RFC 4180 reader. Each row carries the line number it starts on.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRow> parse_csv(std::string_view content);
std::string csv_escape(std::string_view field);

// Append-only JSONL corpus writer. Each record is emitted with one write and
// flushed before append() returns, so readers never see a partial line from a
// completed call.
class CorpusWriter {
 public:
  explicit CorpusWriter(const std::filesystem::path& path);
  ~CorpusWriter();
  CorpusWriter(const CorpusWriter&) = delete;
  CorpusWriter& operator=(const CorpusWriter&) = delete;

  void append(const NarrativeRecord& r);

 private:
  std::mutex mu_;
  std::FILE* file_ = nullptr;
};

// Ids of completed records in an existing corpus. A trailing line without a
// newline (left by an interrupted write) is truncated away first.
std::unordered_set<std::string> existing_record_ids(const std::filesystem::path& path);

}  // namespace naudit
