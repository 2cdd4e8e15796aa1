#include "narrative_audit/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "narrative_audit/pipeline.hpp"

namespace naudit {
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_level = "warn";
  std::string gazetteer;
  std::string scenarios;

  // prompts expand / generate
  std::string study;
  int samples = 1;
  std::string prompts_file;
  std::string model;
  std::string base_url;

  // shared io
  std::string input;
  std::string format = "native";
  std::string corpus;
  std::string mentions;
  std::string out;
  std::string out_dir;

  // extract
  std::string qa;
  std::string qa_replay;
  std::string qa_scope;
  std::string report;

  // evaluate
  std::string gold;
  std::vector<std::string> preds;
  std::string csv;
  std::optional<int> resamples;
  std::optional<double> level;

  // analyze
  std::string home;
  std::optional<double> min_refs;
  std::optional<double> perplexity;
  std::optional<int> iterations;
  std::optional<double> cut;
  std::string linkage;
  std::string cut_mode;
  std::string ambiguity;

  // contrast
  std::string ngrams;
  std::optional<std::size_t> top;
  std::string stopwords;
  std::string group_file;
};

void configure_logging(const std::string& level) {
  auto logger = spdlog::get("narrative-audit");
  if (!logger) logger = spdlog::stderr_color_mt("narrative-audit");
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    throw ValidationError("unknown log level '" + level + "'");
  }
  spdlog::set_level(lvl);
}

RunConfig effective_config(const Options& o) {
  RunConfig c = o.config.empty() ? default_run_config() : load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.gazetteer.empty()) c.gazetteer = o.gazetteer;
  if (!o.scenarios.empty()) c.scenarios = o.scenarios;
  if (!o.stopwords.empty()) c.stopwords = o.stopwords;
  if (!o.model.empty()) c.client.model = o.model;
  if (!o.base_url.empty()) c.client.base_url = o.base_url;
  if (!o.qa.empty()) c.qa_mode = parse_qa_mode(o.qa);
  if (!o.qa_replay.empty()) c.qa_replay = o.qa_replay;
  if (!o.qa_scope.empty()) c.qa_scope = o.qa_scope == "all" ? QaScope::All : QaScope::Prefiltered;
  if (!o.qa_scope.empty() && o.qa_scope != "all" && o.qa_scope != "prefiltered") {
    throw ValidationError("unknown QA scope '" + o.qa_scope + "' (prefiltered|all)");
  }
  if (o.resamples) c.bootstrap.resamples = *o.resamples;
  if (o.level) c.bootstrap.level = *o.level;
  if (!o.home.empty()) c.home_country = o.home;
  if (o.min_refs) c.analysis.min_refs = *o.min_refs;
  if (o.perplexity) c.analysis.tsne.perplexity = *o.perplexity;
  if (o.iterations) c.analysis.tsne.iterations = *o.iterations;
  if (o.cut) c.analysis.cut = *o.cut;
  if (!o.linkage.empty()) c.analysis.linkage = parse_linkage(o.linkage);
  if (!o.cut_mode.empty()) c.analysis.cut_mode = parse_cut_mode(o.cut_mode);
  if (!o.ambiguity.empty()) c.analysis.ambiguity = parse_ambiguity_mode(o.ambiguity);
  if (!o.ngrams.empty()) {
    c.contrast.ngram_orders.clear();
    std::stringstream ss(o.ngrams);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        c.contrast.ngram_orders.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ValidationError("bad --ngrams value '" + o.ngrams + "'");
      }
    }
  }
  if (o.top) c.contrast.top_k = *o.top;
  if (!o.group_file.empty()) c.group_file = o.group_file;
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  validate(c);
  if (!c.group_file.empty()) c.contrast.group_override = load_group_file(c.group_file);
  return c;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw ValidationError(std::string(what) + " not found: " + path);
}

// Writes to `path`, or to `out` when no path was given.
void emit(const std::string& path, const std::string& body, std::ostream& out) {
  if (path.empty()) {
    out << body;
  } else {
    write_text_file(path, body);
  }
}

int run_prompts_expand(const Options& o, std::ostream& out) {
  const RunConfig c = effective_config(o);
  const Gazetteer g = load_gazetteer(c.gazetteer);
  const auto scenarios = load_scenarios(c.scenarios);
  const StudyKind kind = parse_study_kind(o.study);
  const StudyPlan plan =
      kind == StudyKind::UsAnchored ? us_anchored_plan(o.samples) : global_laden_plan(g, o.samples);
  const auto instances = expand_study(plan, scenarios, g);
  const auto planned = planned_narratives(plan, instances.size());

  Manifest m = make_manifest(c, "prompts expand");
  add_input(m, "gazetteer", c.gazetteer);
  add_input(m, "scenarios", c.scenarios);
  m.extra["study"] = to_string(plan.study_kind);
  m.extra["samples_per_prompt"] = plan.samples_per_prompt;
  m.extra["prompt_instances"] = instances.size();
  m.extra["planned_narratives"] = planned;
  if (!o.out.empty()) {
    std::vector<Json> rows;
    for (const auto& inst : instances) {
      rows.push_back({{"scenario_id", inst.scenario_id},
                      {"power_condition", to_string(inst.power_condition)},
                      {"input_country", inst.input_country},
                      {"text", inst.text}});
    }
    write_jsonl(o.out, m, rows);
  }
  out << manifest_json(m).dump(2) << "\n";
  return 0;
}

std::vector<PromptInstance> read_prompts(const fs::path& path) {
  std::vector<PromptInstance> out;
  for (const auto& row : read_jsonl(path)) {
    try {
      out.push_back({row.value.at("scenario_id").get<std::string>(),
                     parse_condition(row.value.at("power_condition").get<std::string>()),
                     row.value.at("input_country").get<std::string>(),
                     row.value.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return out;
}

int run_generate(const Options& o, std::ostream& out) {
  RunConfig c = effective_config(o);
  if (o.out.empty()) throw ValidationError("--out is required");
  const Gazetteer g = load_gazetteer(c.gazetteer);
  const auto scenarios = load_scenarios(c.scenarios);
  std::vector<PromptInstance> instances;
  if (!o.prompts_file.empty()) {
    require_file(o.prompts_file, "--prompts");
    instances = read_prompts(o.prompts_file);
  } else if (!o.study.empty()) {
    const StudyKind kind = parse_study_kind(o.study);
    instances = expand_study(
        kind == StudyKind::UsAnchored ? us_anchored_plan(o.samples) : global_laden_plan(g, o.samples),
        scenarios, g);
  } else {
    throw ValidationError("generate needs --prompts or --study");
  }
  c.client.jitter_seed = sub_seed(c.seed, SeedStream::Jitter);
  validate(c.client);
  resolve_api_key(c.client);

  if (!fs::exists(o.out) || fs::file_size(o.out) == 0) {
    Manifest m = make_manifest(c, "generate");
    if (!o.prompts_file.empty()) add_input(m, "prompts", o.prompts_file);
    m.extra["model"] = c.client.model;
    write_text_file(o.out, manifest_json(m).dump() + "\n");
  }
  const auto summary = run_generation(instances, o.samples, c.client, o.out);
  Json attempts = Json::array();
  for (const auto& a : summary.attempts) {
    attempts.push_back({{"key", a.key}, {"attempt", a.attempt}, {"http_status", a.http_status},
                        {"outcome", a.outcome}});
  }
  out << Json{{"requested", summary.requested},
              {"completed", summary.completed},
              {"failed", summary.failed},
              {"skipped_existing", summary.skipped_existing},
              {"attempts", attempts.size()}}
             .dump(2)
      << "\n";
  return summary.failed == 0 ? 0 : 2;
}

int run_ingest(const Options& o, std::ostream& out) {
  const RunConfig c = effective_config(o);
  require_file(o.input, "--input");
  if (o.out.empty()) throw ValidationError("--out is required");
  const Gazetteer g = load_gazetteer(c.gazetteer);
  const auto scenarios = load_scenarios(c.scenarios);
  const auto records = load_corpus(o.input, parse_corpus_format(o.format), scenarios, g);
  Manifest m = make_manifest(c, "ingest");
  add_input(m, "input", o.input);
  m.extra["format"] = o.format;
  write_corpus(o.out, m, records);
  out << Json{{"records", records.size()}, {"out", o.out}}.dump(2) << "\n";
  return 0;
}

int run_extract(const Options& o, std::ostream& out) {
  const RunConfig c = effective_config(o);
  require_file(o.corpus, "--corpus");
  if (o.out.empty()) throw ValidationError("--out is required");
  const Gazetteer g = load_gazetteer(c.gazetteer);
  const auto scenarios = load_scenarios(c.scenarios);
  const auto records = read_corpus(o.corpus);

  std::unique_ptr<QaExtractor> qa;
  if (c.qa_mode == QaMode::Replay) qa = std::make_unique<ReplayQaExtractor>(c.qa_replay);
  if (c.qa_mode == QaMode::Live) {
    ClientConfig client = c.client;
    client.jitter_seed = sub_seed(c.seed, SeedStream::Jitter);
    qa = std::make_unique<HttpQaExtractor>(client);
  }
  const auto result = extract_corpus(records, scenarios, g, qa.get(), c.qa_scope);
  Manifest m = make_manifest(c, "extract");
  add_input(m, "corpus", o.corpus);
  if (c.qa_mode == QaMode::Replay) add_input(m, "qa_replay", c.qa_replay);
  m.extra["qa"] = to_string(c.qa_mode);
  write_mentions(o.out, m, result.mentions, index_records(records));
  const Json report = to_json(result.report);
  if (!o.report.empty()) write_json(o.report, m, Json{{"report", report}});
  out << report.dump(2) << "\n";
  return 0;
}

int run_evaluate(const Options& o, std::ostream& out) {
  RunConfig c = effective_config(o);
  require_file(o.gold, "--gold");
  if (o.preds.empty()) throw ValidationError("at least one --pred NAME=FILE is required");
  const auto gold = load_gold(o.gold);
  BootstrapOptions opt = c.bootstrap;
  opt.seed = sub_seed(c.seed, SeedStream::Bootstrap);

  std::vector<std::pair<std::string, std::pair<MetricsReport, MetricsReport>>> rows;
  Manifest m = make_manifest(c, "evaluate");
  add_input(m, "gold", o.gold);
  for (const auto& spec : o.preds) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    require_file(path, "--pred file");
    add_input(m, "pred:" + name, path);
    rows.emplace_back(name, score_extraction(group_by_record(read_mentions(path)), gold, opt));
  }
  const std::string md = render_metrics_markdown(rows, opt);
  if (!o.csv.empty()) write_text_file(o.csv, csv_with_manifest(m, render_metrics_csv(rows)));
  emit(o.out, "<!-- manifest: " + manifest_json(m).at("manifest").dump() + " -->\n" + md, out);
  return 0;
}

int run_analyze(const std::string& what, const Options& o, std::ostream& out) {
  const RunConfig c = effective_config(o);
  require_file(o.mentions, "--mentions");
  MentionSet ms = read_mentions_with_context(o.mentions);
  Manifest m = make_manifest(c, "analyze " + what);
  add_input(m, "mentions", o.mentions);
  if (!o.corpus.empty()) {
    require_file(o.corpus, "--corpus");
    for (auto& [id, meta] : index_records(read_corpus(o.corpus))) ms.records[id] = meta;
    add_input(m, "corpus", o.corpus);
  }
  m.extra["home_country"] = c.home_country;

  if (what == "ratios") {
    const auto r = subordination_stats(ms.mentions, ms.records, c.home_country, c.analysis.ambiguity);
    Json doc = manifest_json(m);
    doc["ratios"] = to_json(r);
    emit(o.out, doc.dump(2) + "\n", out);
    return 0;
  }
  if (what == "choropleth") {
    const auto rows = choropleth_data(ms.mentions, ms.records, c.home_country, c.analysis.ambiguity);
    emit(o.out, csv_with_manifest(m, choropleth_csv(rows)), out);
    return 0;
  }

  const auto scenarios = load_scenarios(c.scenarios);
  add_input(m, "scenarios", c.scenarios);
  const auto slots = character_slots(scenarios);
  const auto dists = build_distributions(ms.mentions, ms.records, scenarios, c.analysis.min_refs,
                                         c.analysis.ambiguity);
  if (what == "distributions") {
    emit(o.out, csv_with_manifest(m, distributions_csv(dists, slots)), out);
    return 0;
  }
  if (dists.empty()) throw ValidationError("no country reaches min_refs; nothing to " + what);
  const auto d = hellinger_matrix(dists);
  const auto clusters = hac_cluster(d, c.analysis.cut, c.analysis.linkage, c.analysis.cut_mode);
  if (what == "cluster") {
    emit(o.out, csv_with_manifest(m, cluster_table_csv(dists, clusters, slots)), out);
  } else if (what == "entropy") {
    Json doc = manifest_json(m);
    for (const auto& [label, h] : cluster_entropy(clusters, dists)) doc["entropy_bits"][std::to_string(label)] = h;
    emit(o.out, doc.dump(2) + "\n", out);
  } else if (what == "tsne") {
    TsneOptions opt = c.analysis.tsne;
    opt.seed = sub_seed(c.seed, SeedStream::Tsne);
    emit(o.out, csv_with_manifest(m, tsne_csv(dists, tsne_embed(d, opt), clusters)), out);
  }
  return 0;
}

int run_contrast(const Options& o, std::ostream& out) {
  const RunConfig c = effective_config(o);
  require_file(o.corpus, "--corpus");
  const Gazetteer g = load_gazetteer(c.gazetteer);
  const auto stopwords = load_stopwords(c.stopwords);
  const auto contrasts = contrast_corpus(read_corpus(o.corpus), g, stopwords, c.contrast);
  Manifest m = make_manifest(c, "contrast");
  add_input(m, "corpus", o.corpus);
  add_input(m, "stopwords", c.stopwords);
  if (!c.group_file.empty()) add_input(m, "group_file", c.group_file);
  emit(o.out, csv_with_manifest(m, contrast_csv(contrasts)), out);
  return 0;
}

int run_report(const Options& o, std::ostream& out) {
  const RunConfig c = effective_config(o);
  require_file(o.corpus, "--corpus");
  const auto result = end_to_end(c, o.corpus, parse_corpus_format(o.format));
  Json reports = Json::array();
  for (const auto& p : result.reports) reports.push_back(p.string());
  out << Json{{"run_dir", result.run_dir.string()}, {"reports", reports}}.dump(2) << "\n";
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audit nationality representation in generated narratives", "narrative-audit"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Options o;
  app.add_option("--config", o.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed (overrides config)");
  app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off");
  app.add_option("--gazetteer", o.gazetteer, "Country gazetteer JSONL");
  app.add_option("--scenarios", o.scenarios, "Scenario JSONL");

  auto* prompts = app.add_subcommand("prompts", "Prompt template expansion");
  prompts->require_subcommand(1);
  auto* expand = prompts->add_subcommand("expand", "Expand a study into prompt instances");
  expand->add_option("--study", o.study, "us | global")->required();
  expand->add_option("--samples", o.samples, "Samples per prompt")->check(CLI::PositiveNumber);
  expand->add_option("--out", o.out, "Write prompt instances as JSONL");

  auto* generate = app.add_subcommand("generate", "Generate narratives through a chat-completion API");
  generate->add_option("--prompts", o.prompts_file, "Prompt JSONL from 'prompts expand'");
  generate->add_option("--study", o.study, "us | global (instead of --prompts)");
  generate->add_option("--samples", o.samples, "Samples per prompt")->check(CLI::PositiveNumber);
  generate->add_option("--model", o.model, "Model name");
  generate->add_option("--base-url", o.base_url, "API base URL");
  generate->add_option("--out", o.out, "Corpus JSONL (appended, resumable)")->required();

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize an existing corpus");
  ingest->add_option("--input", o.input, "Corpus file")->required();
  ingest->add_option("--format", o.format, "native | upstream-study1");
  ingest->add_option("--out", o.out, "Native corpus JSONL")->required();

  auto* extract = app.add_subcommand("extract", "Extract and attribute nationality cues");
  extract->add_option("--corpus", o.corpus, "Native corpus JSONL")->required();
  extract->add_option("--out", o.out, "Mentions JSONL")->required();
  extract->add_option("--qa", o.qa, "none | replay | live");
  extract->add_option("--qa-replay", o.qa_replay, "Recorded QA answers JSONL");
  extract->add_option("--qa-scope", o.qa_scope, "prefiltered | all");
  extract->add_option("--report", o.report, "Extraction report JSON");

  auto* evaluate = app.add_subcommand("evaluate", "Score extracted mentions against gold labels");
  evaluate->add_option("--gold", o.gold, "Gold label JSONL")->required();
  evaluate->add_option("--pred", o.preds, "NAME=mentions.jsonl (repeatable)")->required();
  evaluate->add_option("--out", o.out, "Markdown table (stdout when omitted)");
  evaluate->add_option("--csv", o.csv, "CSV table");
  evaluate->add_option("--resamples", o.resamples, "Bootstrap resamples");
  evaluate->add_option("--level", o.level, "Confidence level");

  auto* analyze = app.add_subcommand("analyze", "Distribution analytics");
  analyze->require_subcommand(1);
  std::vector<std::pair<std::string, CLI::App*>> analyses;
  for (const char* name : {"distributions", "tsne", "cluster", "entropy", "ratios", "choropleth"}) {
    auto* sub = analyze->add_subcommand(name);
    sub->add_option("--mentions", o.mentions, "Mentions JSONL from 'extract'")->required();
    sub->add_option("--corpus", o.corpus, "Native corpus JSONL for record context");
    sub->add_option("--home", o.home, "Home country code");
    sub->add_option("--min-refs", o.min_refs, "Minimum references per country");
    sub->add_option("--perplexity", o.perplexity, "t-SNE perplexity");
    sub->add_option("--iterations", o.iterations, "t-SNE iterations");
    sub->add_option("--cut", o.cut, "HAC cut threshold");
    sub->add_option("--linkage", o.linkage, "average | single | complete");
    sub->add_option("--cut-mode", o.cut_mode, "absolute | relative-to-max");
    sub->add_option("--ambiguous", o.ambiguity, "split | drop");
    sub->add_option("--out", o.out, "Output file (stdout when omitted)");
    analyses.emplace_back(name, sub);
  }

  auto* contrast = app.add_subcommand("contrast", "Rank n-grams by relative TF-IDF difference");
  contrast->add_option("--corpus", o.corpus, "Native corpus JSONL")->required();
  contrast->add_option("--ngrams", o.ngrams, "Comma-separated n-gram orders");
  contrast->add_option("--top", o.top, "Rows per side");
  contrast->add_option("--stopwords", o.stopwords, "Stopword list");
  contrast->add_option("--group-file", o.group_file, "CSV code,Majority|Minority overrides");
  contrast->add_option("--out", o.out, "CSV output (stdout when omitted)");

  auto* report = app.add_subcommand("report", "Run extract, analyze and contrast end to end");
  report->add_option("--corpus", o.corpus, "Corpus file")->required();
  report->add_option("--format", o.format, "native | upstream-study1");
  report->add_option("--out-dir", o.out_dir, "Parent of the run directory");
  report->add_option("--qa", o.qa, "none | replay | live");
  report->add_option("--qa-replay", o.qa_replay, "Recorded QA answers JSONL");

  if (args.size() <= 1) {
    err << app.help();
    return 1;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 1;
  }

  try {
    configure_logging(o.log_level);
    if (expand->parsed()) return run_prompts_expand(o, out);
    if (generate->parsed()) return run_generate(o, out);
    if (ingest->parsed()) return run_ingest(o, out);
    if (extract->parsed()) return run_extract(o, out);
    if (evaluate->parsed()) return run_evaluate(o, out);
    for (const auto& [name, sub] : analyses) {
      if (sub->parsed()) return run_analyze(name, o, out);
    }
    if (contrast->parsed()) return run_contrast(o, out);
    if (report->parsed()) return run_report(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace naudit
