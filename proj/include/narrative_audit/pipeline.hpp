#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "narrative_audit/corpus.hpp"
#include "narrative_audit/corpus_contrast.hpp"
#include "narrative_audit/cue_extraction.hpp"
#include "narrative_audit/distribution_analytics.hpp"
#include "narrative_audit/eval_harness.hpp"
#include "narrative_audit/generation_client.hpp"

namespace naudit {

std::string_view tool_version();

// Directory holding the bundled gazetteer, scenarios and stopwords.
std::filesystem::path default_data_dir();

enum class QaMode { None, Replay, Live };
QaMode parse_qa_mode(std::string_view s);
std::string_view to_string(QaMode m);

struct AnalysisParams {
  double min_refs = 15.0;
  TsneOptions tsne;  // seed is derived from the master seed
  double cut = 0.7;
  Linkage linkage = Linkage::Average;
  CutMode cut_mode = CutMode::Absolute;
  AmbiguityMode ambiguity = AmbiguityMode::Split;
};

struct RunConfig {
  std::filesystem::path gazetteer;
  std::filesystem::path scenarios;
  std::filesystem::path stopwords;
  ClientConfig client;
  QaMode qa_mode = QaMode::None;
  std::filesystem::path qa_replay;
  QaScope qa_scope = QaScope::Prefiltered;
  AnalysisParams analysis;
  ContrastOptions contrast;  // group_override filled from group_file
  std::filesystem::path group_file;
  BootstrapOptions bootstrap;  // seed is derived from the master seed
  std::string home_country = "USA";
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 0;
};

RunConfig default_run_config();
// JSON config. Relative paths resolve against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir);
Json to_json(const RunConfig& c);
// Referenced paths must exist.
void validate(const RunConfig& c);
// 16 hex chars of SHA-256 over the canonical config JSON, output_dir excluded.
std::string config_hash(const RunConfig& c);

// Sub-seeds derived from the master seed with mix_seed.
enum class SeedStream : std::uint64_t { Tsne = 1, Bootstrap = 2, Jitter = 3 };
std::uint64_t sub_seed(std::uint64_t master, SeedStream stream);

struct Manifest {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;  // name -> sha256
  Json extra = Json::object();
};

Manifest make_manifest(const RunConfig& c, std::string stage);
void add_input(Manifest& m, const std::string& name, const std::filesystem::path& path);
Json manifest_json(const Manifest& m);
// "# manifest: {...}" followed by the CSV body.
std::string csv_with_manifest(const Manifest& m, const std::string& csv);
void write_jsonl(const std::filesystem::path& path, const Manifest& m, const std::vector<Json>& rows);
void write_json(const std::filesystem::path& path, const Manifest& m, Json body);

// Mentions persisted with their record's scenario, condition and input
// country so that analyses can run from the mention file alone.
void write_mentions(const std::filesystem::path& path, const Manifest& m,
                    const std::vector<CueMention>& mentions, const RecordIndex& records);
struct MentionSet {
  std::vector<CueMention> mentions;
  RecordIndex records;
};
MentionSet read_mentions_with_context(const std::filesystem::path& path);

void write_corpus(const std::filesystem::path& path, const Manifest& m,
                  const std::vector<NarrativeRecord>& records);

// Corpus from either supported format; rows that fail validation abort with
// every offending line listed.
std::vector<NarrativeRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                         const std::vector<Scenario>& scenarios,
                                         const Gazetteer& g);

struct Analysis {
  std::vector<CharacterSlot> slots;
  std::vector<CountryDistribution> distributions;
  DistanceMatrix distances;
  std::optional<TsneResult> tsne;
  std::optional<ClusterAssignment> clusters;
  std::map<int, double> entropy;
  std::string skipped;  // why t-SNE / clustering did not run, if they did not
  SubordinationReport ratios;
  std::vector<ChoroplethRow> choropleth;
};

Analysis analyze(const MentionSet& ms, const std::vector<Scenario>& scenarios,
                 const RunConfig& c);

struct EndToEndResult {
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> reports;
};

// ingest -> extract -> analyze -> contrast. The run directory is named by a
// hash of the config and input digests, so identical inputs rewrite identical
// files.
EndToEndResult end_to_end(const RunConfig& c, const std::filesystem::path& corpus,
                          CorpusFormat format);

}  // namespace naudit
