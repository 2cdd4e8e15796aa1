#include "narrative_audit/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <sstream>

#include "narrative_audit/hashing.hpp"

namespace naudit {
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

std::string_view to_string(QaScope s) { return s == QaScope::All ? "all" : "prefiltered"; }

QaScope parse_qa_scope(std::string_view s) {
  if (s == "prefiltered") return QaScope::Prefiltered;
  if (s == "all") return QaScope::All;
  throw ValidationError("unknown QA scope '" + std::string(s) + "' (prefiltered|all)");
}

std::string_view to_string(AmbiguityMode m) { return m == AmbiguityMode::Drop ? "drop" : "split"; }

// Runs one end-to-end stage, naming it in any error that escapes.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("stage ") + name + ": " + e.what());
  } catch (const AuditError& e) {
    throw RuntimeFailure(std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw RuntimeFailure(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

std::string_view tool_version() { return NAUDIT_VERSION; }

fs::path default_data_dir() {
  if (const char* env = std::getenv("NARRATIVE_AUDIT_DATA"); env != nullptr && *env != '\0') {
    return env;
  }
  return NAUDIT_DATA_DIR;
}

QaMode parse_qa_mode(std::string_view s) {
  if (s == "none") return QaMode::None;
  if (s == "replay") return QaMode::Replay;
  if (s == "live") return QaMode::Live;
  throw ValidationError("unknown QA mode '" + std::string(s) + "' (none|replay|live)");
}

std::string_view to_string(QaMode m) {
  switch (m) {
    case QaMode::None: return "none";
    case QaMode::Replay: return "replay";
    case QaMode::Live: return "live";
  }
  return "none";
}

RunConfig default_run_config() {
  RunConfig c;
  const fs::path data = default_data_dir();
  c.gazetteer = data / "countries.jsonl";
  c.scenarios = data / "scenarios.jsonl";
  c.stopwords = data / "stopwords_en.txt";
  return c;
}

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown_keys(j, {"gazetteer", "scenarios", "stopwords", "seed", "home_country", "output_dir",
                          "client", "extraction", "analysis", "contrast", "evaluation"},
                      "top level");
  RunConfig c = default_run_config();
  if (j.contains("gazetteer")) c.gazetteer = resolve(base_dir, j.at("gazetteer").get<std::string>());
  if (j.contains("scenarios")) c.scenarios = resolve(base_dir, j.at("scenarios").get<std::string>());
  if (j.contains("stopwords")) c.stopwords = resolve(base_dir, j.at("stopwords").get<std::string>());
  if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  read_opt(j, "seed", c.seed);
  read_opt(j, "home_country", c.home_country);

  if (j.contains("client")) {
    const Json& k = j.at("client");
    reject_unknown_keys(k, {"base_url", "api_key_env", "model", "max_in_flight", "requests_per_minute",
                            "max_attempts", "base_backoff_ms", "jitter", "timeout_ms", "params"},
                        "client");
    read_opt(k, "base_url", c.client.base_url);
    read_opt(k, "api_key_env", c.client.api_key_source);
    read_opt(k, "model", c.client.model);
    read_opt(k, "max_in_flight", c.client.max_in_flight);
    read_opt(k, "requests_per_minute", c.client.requests_per_minute);
    read_opt(k, "max_attempts", c.client.retry.max_attempts);
    read_opt(k, "jitter", c.client.retry.jitter);
    long ms = 0;
    if (k.contains("base_backoff_ms")) {
      read_opt(k, "base_backoff_ms", ms);
      c.client.retry.base_backoff = std::chrono::milliseconds(ms);
    }
    if (k.contains("timeout_ms")) {
      read_opt(k, "timeout_ms", ms);
      c.client.timeout = std::chrono::milliseconds(ms);
    }
    if (k.contains("params")) c.client.params = k.at("params");
  }
  if (j.contains("extraction")) {
    const Json& k = j.at("extraction");
    reject_unknown_keys(k, {"qa", "qa_replay", "qa_scope"}, "extraction");
    if (k.contains("qa")) c.qa_mode = parse_qa_mode(k.at("qa").get<std::string>());
    if (k.contains("qa_replay")) c.qa_replay = resolve(base_dir, k.at("qa_replay").get<std::string>());
    if (k.contains("qa_scope")) c.qa_scope = parse_qa_scope(k.at("qa_scope").get<std::string>());
  }
  if (j.contains("analysis")) {
    const Json& k = j.at("analysis");
    reject_unknown_keys(k, {"min_refs", "perplexity", "tsne_iterations", "learning_rate",
                            "early_exaggeration", "exaggeration_iterations", "cut", "linkage",
                            "cut_mode", "ambiguity"},
                        "analysis");
    read_opt(k, "min_refs", c.analysis.min_refs);
    read_opt(k, "perplexity", c.analysis.tsne.perplexity);
    read_opt(k, "tsne_iterations", c.analysis.tsne.iterations);
    read_opt(k, "learning_rate", c.analysis.tsne.learning_rate);
    read_opt(k, "early_exaggeration", c.analysis.tsne.early_exaggeration);
    read_opt(k, "exaggeration_iterations", c.analysis.tsne.exaggeration_iterations);
    read_opt(k, "cut", c.analysis.cut);
    if (k.contains("linkage")) c.analysis.linkage = parse_linkage(k.at("linkage").get<std::string>());
    if (k.contains("cut_mode")) c.analysis.cut_mode = parse_cut_mode(k.at("cut_mode").get<std::string>());
    if (k.contains("ambiguity")) {
      c.analysis.ambiguity = parse_ambiguity_mode(k.at("ambiguity").get<std::string>());
    }
  }
  if (j.contains("contrast")) {
    const Json& k = j.at("contrast");
    reject_unknown_keys(k, {"ngrams", "top_k", "group_file"}, "contrast");
    read_opt(k, "ngrams", c.contrast.ngram_orders);
    read_opt(k, "top_k", c.contrast.top_k);
    if (k.contains("group_file")) c.group_file = resolve(base_dir, k.at("group_file").get<std::string>());
  }
  if (j.contains("evaluation")) {
    const Json& k = j.at("evaluation");
    reject_unknown_keys(k, {"resamples", "level"}, "evaluation");
    read_opt(k, "resamples", c.bootstrap.resamples);
    read_opt(k, "level", c.bootstrap.level);
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  try {
    return run_config_from_json(j, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
}

Json to_json(const RunConfig& c) {
  Json j;
  j["gazetteer"] = c.gazetteer.string();
  j["scenarios"] = c.scenarios.string();
  j["stopwords"] = c.stopwords.string();
  j["seed"] = c.seed;
  j["home_country"] = c.home_country;
  j["output_dir"] = c.output_dir.string();
  j["client"] = {{"base_url", c.client.base_url},
                 {"api_key_env", c.client.api_key_source},
                 {"model", c.client.model},
                 {"max_in_flight", c.client.max_in_flight},
                 {"requests_per_minute", c.client.requests_per_minute},
                 {"max_attempts", c.client.retry.max_attempts},
                 {"base_backoff_ms", c.client.retry.base_backoff.count()},
                 {"jitter", c.client.retry.jitter},
                 {"timeout_ms", c.client.timeout.count()},
                 {"params", c.client.params}};
  j["extraction"] = {{"qa", to_string(c.qa_mode)},
                     {"qa_replay", c.qa_replay.string()},
                     {"qa_scope", to_string(c.qa_scope)}};
  j["analysis"] = {{"min_refs", c.analysis.min_refs},
                   {"perplexity", c.analysis.tsne.perplexity},
                   {"tsne_iterations", c.analysis.tsne.iterations},
                   {"learning_rate", c.analysis.tsne.learning_rate},
                   {"early_exaggeration", c.analysis.tsne.early_exaggeration},
                   {"exaggeration_iterations", c.analysis.tsne.exaggeration_iterations},
                   {"cut", c.analysis.cut},
                   {"linkage", to_string(c.analysis.linkage)},
                   {"cut_mode", to_string(c.analysis.cut_mode)},
                   {"ambiguity", to_string(c.analysis.ambiguity)}};
  j["contrast"] = {{"ngrams", c.contrast.ngram_orders},
                   {"top_k", c.contrast.top_k},
                   {"group_file", c.group_file.string()}};
  j["evaluation"] = {{"resamples", c.bootstrap.resamples}, {"level", c.bootstrap.level}};
  return j;
}

void validate(const RunConfig& c) {
  auto must_exist = [](const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) {
      throw ValidationError(std::string(what) + " not found: " + p.string());
    }
  };
  must_exist(c.gazetteer, "gazetteer");
  must_exist(c.scenarios, "scenarios");
  must_exist(c.stopwords, "stopwords");
  if (c.qa_mode == QaMode::Replay) {
    if (c.qa_replay.empty()) throw ValidationError("QA replay mode needs extraction.qa_replay");
    must_exist(c.qa_replay, "QA replay file");
  }
  if (!c.group_file.empty()) must_exist(c.group_file, "group file");
  if (c.analysis.min_refs < 0.0) throw ValidationError("min_refs must be non-negative");
  if (c.analysis.cut < 0.0) throw ValidationError("cut must be non-negative");
  if (c.contrast.top_k == 0) throw ValidationError("contrast top_k must be positive");
  for (int n : c.contrast.ngram_orders) {
    if (n < 1) throw ValidationError("n-gram orders must be positive");
  }
  if (c.home_country.empty()) throw ValidationError("home_country must be set");
}

std::string config_hash(const RunConfig& c) {
  Json j = to_json(c);
  // Paths are machine-specific; the files they name enter manifests by digest.
  for (const char* key : {"gazetteer", "scenarios", "stopwords", "output_dir"}) j.erase(key);
  j["extraction"].erase("qa_replay");
  j["contrast"].erase("group_file");
  return sha256_hex(j.dump()).substr(0, 16);
}

std::uint64_t sub_seed(std::uint64_t master, SeedStream stream) {
  return mix_seed(master, static_cast<std::uint64_t>(stream));
}

Manifest make_manifest(const RunConfig& c, std::string stage_name) {
  Manifest m;
  m.stage = std::move(stage_name);
  m.config_hash = config_hash(c);
  m.seed = c.seed;
  return m;
}

void add_input(Manifest& m, const std::string& name, const fs::path& path) {
  m.inputs[name] = sha256_file(path);
}

Json manifest_json(const Manifest& m) {
  Json inputs = Json::object();
  for (const auto& [k, v] : m.inputs) inputs[k] = v;
  Json body{{"tool", "narrative-audit"},
            {"version", tool_version()},
            {"stage", m.stage},
            {"config_hash", m.config_hash},
            {"seed", m.seed},
            {"inputs", inputs}};
  for (const auto& [k, v] : m.extra.items()) body[k] = v;
  return Json{{"manifest", body}};
}

std::string csv_with_manifest(const Manifest& m, const std::string& csv) {
  return "# manifest: " + manifest_json(m).at("manifest").dump() + "\n" + csv;
}

void write_jsonl(const fs::path& path, const Manifest& m, const std::vector<Json>& rows) {
  std::string out = manifest_json(m).dump() + "\n";
  for (const auto& r : rows) out += r.dump() + "\n";
  write_text_file(path, out);
}

void write_json(const fs::path& path, const Manifest& m, Json body) {
  Json doc = manifest_json(m);
  for (auto& [k, v] : body.items()) doc[k] = v;
  write_text_file(path, doc.dump(2) + "\n");
}

void write_mentions(const fs::path& path, const Manifest& m, const std::vector<CueMention>& mentions,
                    const RecordIndex& records) {
  std::vector<Json> rows;
  rows.reserve(mentions.size());
  for (const auto& mention : mentions) {
    Json j = to_json(mention);
    if (const auto it = records.find(mention.record_id); it != records.end()) {
      j["scenario_id"] = it->second.scenario_id;
      j["power_condition"] = to_string(it->second.power_condition);
      j["input_country"] = it->second.input_country;
    }
    rows.push_back(std::move(j));
  }
  write_jsonl(path, m, rows);
}

MentionSet read_mentions_with_context(const fs::path& path) {
  MentionSet ms;
  for (const auto& row : read_jsonl(path)) {
    try {
      ms.mentions.push_back(mention_from_json(row.value));
      const Json& j = row.value;
      if (j.contains("scenario_id") && j.contains("power_condition")) {
        RecordMeta meta{j.at("scenario_id").get<std::string>(),
                        parse_condition(j.at("power_condition").get<std::string>()),
                        j.value("input_country", std::string())};
        ms.records.emplace(ms.mentions.back().record_id, std::move(meta));
      }
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return ms;
}

void write_corpus(const fs::path& path, const Manifest& m, const std::vector<NarrativeRecord>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, m, rows);
}

std::vector<NarrativeRecord> load_corpus(const fs::path& path, CorpusFormat format,
                                         const std::vector<Scenario>& scenarios, const Gazetteer& g) {
  auto result = ingest_corpus(path, format, scenarios, g);
  if (!result.errors.empty()) {
    std::ostringstream os;
    os << result.errors.size() << " invalid row(s) in " << path.string();
    for (const auto& e : result.errors) os << "\n  line " << e.line << ": " << e.reason;
    throw ValidationError(os.str());
  }
  return std::move(result.records);
}

Analysis analyze(const MentionSet& ms, const std::vector<Scenario>& scenarios, const RunConfig& c) {
  Analysis a;
  a.slots = character_slots(scenarios);
  a.distributions = build_distributions(ms.mentions, ms.records, scenarios, c.analysis.min_refs,
                                        c.analysis.ambiguity);
  a.distances = hellinger_matrix(a.distributions);
  const std::size_t n = a.distributions.size();
  if (n >= 1) {
    a.clusters = hac_cluster(a.distances, c.analysis.cut, c.analysis.linkage, c.analysis.cut_mode);
    a.entropy = cluster_entropy(*a.clusters, a.distributions);
  }
  if (n >= 2 && c.analysis.tsne.perplexity < static_cast<double>(n - 1)) {
    TsneOptions opt = c.analysis.tsne;
    opt.seed = sub_seed(c.seed, SeedStream::Tsne);
    a.tsne = tsne_embed(a.distances, opt);
  } else {
    a.skipped = "t-SNE needs more than perplexity + 1 countries; have " + std::to_string(n);
  }
  a.ratios = subordination_stats(ms.mentions, ms.records, c.home_country, c.analysis.ambiguity);
  a.choropleth = choropleth_data(ms.mentions, ms.records, c.home_country, c.analysis.ambiguity);
  return a;
}

EndToEndResult end_to_end(const RunConfig& cfg, const fs::path& corpus_path, CorpusFormat format) {
  RunConfig c = cfg;
  stage("config", [&] {
    validate(c);
    if (!fs::is_regular_file(corpus_path)) {
      throw ValidationError("corpus not found: " + corpus_path.string());
    }
    if (!c.group_file.empty()) c.contrast.group_override = load_group_file(c.group_file);
  });
  const Gazetteer g = stage("load", [&] { return load_gazetteer(c.gazetteer); });
  const auto scenarios = stage("load", [&] { return load_scenarios(c.scenarios); });
  const auto stopwords = stage("load", [&] { return load_stopwords(c.stopwords); });

  Manifest base = make_manifest(c, "");
  add_input(base, "corpus", corpus_path);
  add_input(base, "gazetteer", c.gazetteer);
  add_input(base, "scenarios", c.scenarios);
  add_input(base, "stopwords", c.stopwords);
  if (c.qa_mode == QaMode::Replay) add_input(base, "qa_replay", c.qa_replay);
  if (!c.group_file.empty()) add_input(base, "group_file", c.group_file);

  std::string key = base.config_hash;
  for (const auto& [name, digest] : base.inputs) key += "|" + name + "=" + digest;
  EndToEndResult out;
  out.run_dir = c.output_dir / ("run-" + sha256_hex(key).substr(0, 16));
  const fs::path reports = out.run_dir / "reports";
  fs::create_directories(reports);
  auto manifest_for = [&](const char* stage_name) {
    Manifest m = base;
    m.stage = stage_name;
    return m;
  };

  const auto records = stage("ingest", [&] {
    auto rs = load_corpus(corpus_path, format, scenarios, g);
    write_corpus(out.run_dir / "corpus.jsonl", manifest_for("ingest"), rs);
    return rs;
  });
  spdlog::info("ingested {} records", records.size());

  const auto extraction = stage("extract", [&] {
    std::unique_ptr<QaExtractor> qa;
    if (c.qa_mode == QaMode::Replay) qa = std::make_unique<ReplayQaExtractor>(c.qa_replay);
    if (c.qa_mode == QaMode::Live) {
      ClientConfig client = c.client;
      client.jitter_seed = sub_seed(c.seed, SeedStream::Jitter);
      qa = std::make_unique<HttpQaExtractor>(client);
    }
    auto result = extract_corpus(records, scenarios, g, qa.get(), c.qa_scope);
    const RecordIndex idx = index_records(records);
    write_mentions(out.run_dir / "mentions.jsonl", manifest_for("extract"), result.mentions, idx);
    write_json(out.run_dir / "extraction.json", manifest_for("extract"),
               Json{{"report", to_json(result.report)}});
    return result;
  });

  stage("analyze", [&] {
    const MentionSet ms{extraction.mentions, index_records(records)};
    const Analysis a = analyze(ms, scenarios, c);
    const Manifest m = manifest_for("analyze");
    const ClusterAssignment empty_clusters;
    const ClusterAssignment& clusters = a.clusters ? *a.clusters : empty_clusters;

    write_text_file(out.run_dir / "distributions.csv",
                    csv_with_manifest(m, distributions_csv(a.distributions, a.slots)));
    const std::vector<std::pair<std::string, std::string>> files = {
        {"distance_matrix.csv", distance_matrix_csv(a.distributions, a.distances)},
        {"tsne.csv", a.tsne ? tsne_csv(a.distributions, *a.tsne, clusters) : "code,x,y,cluster\n"},
        {"clusters.csv", cluster_table_csv(a.distributions, clusters, a.slots)},
        {"choropleth.csv", choropleth_csv(a.choropleth)},
    };
    for (const auto& [name, body] : files) {
      write_text_file(reports / name, csv_with_manifest(m, body));
      out.reports.push_back(reports / name);
    }

    Json totals = Json::object();
    for (const auto& d : a.distributions) totals[d.country] = d.total_refs;
    Json entropy = Json::object();
    for (const auto& [label, h] : a.entropy) entropy[std::to_string(label)] = h;
    Json heights = Json::array();
    for (const auto& merge : clusters.merge_tree) heights.push_back(merge.height);
    Json tsne{{"perplexity", c.analysis.tsne.perplexity},
              {"iterations", c.analysis.tsne.iterations},
              {"seed", sub_seed(c.seed, SeedStream::Tsne)}};
    if (a.tsne) {
      tsne["final_kl"] = a.tsne->kl_trace.empty() ? Json(nullptr) : Json(a.tsne->kl_trace.back().second);
    } else {
      tsne["skipped"] = a.skipped;
    }
    Json body{{"home_country", c.home_country},
              {"ambiguity", to_string(c.analysis.ambiguity)},
              {"extraction", to_json(extraction.report)},
              {"ratios", to_json(a.ratios)},
              {"distributions", {{"countries", a.distributions.size()},
                                 {"slots", a.slots.size()},
                                 {"min_refs", c.analysis.min_refs},
                                 {"total_refs", totals}}},
              {"clustering", {{"linkage", to_string(c.analysis.linkage)},
                              {"cut", c.analysis.cut},
                              {"cut_mode", to_string(c.analysis.cut_mode)},
                              {"cut_height", clusters.cut_height},
                              {"clusters", clusters.cluster_count()},
                              {"entropy_bits", entropy},
                              {"merge_heights", heights}}},
              {"tsne", tsne},
              {"notes", Json::array({"choropleth: a reference tied to both characters counts in "
                                     "both the dominant and subordinated columns",
                                     "ratios: null marks a zero denominator"})}};
    write_json(reports / "stats.json", m, body);
    out.reports.push_back(reports / "stats.json");
  });

  stage("contrast", [&] {
    const auto contrasts = contrast_corpus(records, g, stopwords, c.contrast);
    write_text_file(reports / "contrast.csv",
                    csv_with_manifest(manifest_for("contrast"), contrast_csv(contrasts)));
    out.reports.push_back(reports / "contrast.csv");
  });

  Manifest run = manifest_for("report");
  run.extra["config"] = to_json(c);
  run.extra["config"].erase("output_dir");
  Json report_names = Json::array();
  for (const auto& p : out.reports) report_names.push_back(p.filename().string());
  run.extra["reports"] = report_names;
  write_json(out.run_dir / "manifest.json", run, Json::object());
  return out;
}

}  // namespace naudit
