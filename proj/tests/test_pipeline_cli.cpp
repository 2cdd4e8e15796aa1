#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "narrative_audit/cli.hpp"
#include "narrative_audit/error.hpp"
#include "narrative_audit/pipeline.hpp"
#include "support.hpp"

using namespace naudit;
using naudit::testing::data_file;
using naudit::testing::fixture;
using naudit::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "narrative-audit");
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string strip_manifest_line(const std::string& s) {
  if (s.rfind("# manifest:", 0) != 0) return s;
  return s.substr(s.find('\n') + 1);
}

RunConfig mini_config(const fs::path& out_dir) {
  RunConfig c = load_run_config(fixture("mini/config.json"));
  c.output_dir = out_dir;
  return c;
}

const std::vector<std::string> kReportNames{"distance_matrix.csv", "tsne.csv", "clusters.csv",
                                            "choropleth.csv", "stats.json", "contrast.csv"};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config loading") {
  const RunConfig c = load_run_config(fixture("mini/config.json"));
  CHECK(fs::equivalent(c.gazetteer, data_file("countries.jsonl")));
  CHECK(fs::equivalent(c.qa_replay, fixture("mini/qa_replay.jsonl")));
  CHECK(c.qa_mode == QaMode::Replay);
  CHECK(c.seed == 7);
  CHECK(c.analysis.min_refs == 2.0);
  CHECK(c.bootstrap.level == 0.98);
  CHECK_NOTHROW(validate(c));

  const Json j = to_json(c);
  const RunConfig back = run_config_from_json(j, "/");
  CHECK(config_hash(back) == config_hash(c));

  RunConfig moved = c;
  moved.output_dir = "/elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  RunConfig reseeded = c;
  reseeded.seed = 8;
  CHECK(config_hash(reseeded) != config_hash(c));
  CHECK(config_hash(c).size() == 16);

  CHECK_THROWS_AS(run_config_from_json(Json{{"sede", 1}}, "/"), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"analysis", {{"cutt", 0.5}}}}, "/"), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"analysis", {{"linkage", "ward"}}}}, "/"), ValidationError);

  TempDir dir;
  write_text_file(dir / "bad.json", "{\"seed\": ");
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ValidationError);
  write_text_file(dir / "wrongtype.json", "{\"seed\": \"seven\"}");
  CHECK_THROWS_AS(load_run_config(dir / "wrongtype.json"), ValidationError);

  RunConfig missing = c;
  missing.gazetteer = dir / "nope.jsonl";
  CHECK_THROWS_AS(validate(missing), ValidationError);
}

TEST_CASE("seeds and manifests") {
  CHECK(sub_seed(7, SeedStream::Tsne) != sub_seed(7, SeedStream::Bootstrap));
  CHECK(sub_seed(7, SeedStream::Tsne) == sub_seed(7, SeedStream::Tsne));

  const RunConfig c = default_run_config();
  Manifest m = make_manifest(c, "unit");
  add_input(m, "scenarios", data_file("scenarios.jsonl"));
  const Json j = manifest_json(m).at("manifest");
  CHECK(j.at("tool") == "narrative-audit");
  CHECK(j.at("stage") == "unit");
  CHECK(j.at("inputs").at("scenarios").get<std::string>().size() == 64);
  const std::string csv = csv_with_manifest(m, "a,b\n1,2\n");
  CHECK(csv.rfind("# manifest: {", 0) == 0);
  CHECK(strip_manifest_line(csv) == "a,b\n1,2\n");
}

TEST_CASE("mention files carry record context") {
  TempDir dir;
  RecordIndex idx;
  idx["r1"] = {"learning-science", PowerCondition::Neutral, "USA"};
  idx["r2"] = {"labor-doctor-icu", PowerCondition::Laden, "FRA"};
  const std::vector<CueMention> ms{
      {"r1", "Mexican", Span{1, 8}, {"MEX"}, Referent::Subject, ExtractionMethod::QA},
      {"r2", "Korean", std::nullopt, {"KOR", "PRK"}, Referent::Object, ExtractionMethod::QA}};
  write_mentions(dir / "m.jsonl", make_manifest(default_run_config(), "extract"), ms, idx);
  const MentionSet back = read_mentions_with_context(dir / "m.jsonl");
  REQUIRE(back.mentions.size() == 2);
  CHECK(back.mentions[0] == ms[0]);
  CHECK(back.mentions[1] == ms[1]);
  CHECK(back.records.at("r2").input_country == "FRA");
  CHECK(back.records.at("r1").power_condition == PowerCondition::Neutral);
}

TEST_CASE("end-to-end reports are byte-stable and match the snapshots") {
  TempDir a, b;
  const auto ra = end_to_end(mini_config(a.path()), fixture("mini/corpus.csv"), CorpusFormat::UpstreamStudy1);
  const auto rb = end_to_end(mini_config(b.path()), fixture("mini/corpus.csv"), CorpusFormat::UpstreamStudy1);
  REQUIRE(ra.reports.size() == kReportNames.size());
  CHECK(ra.run_dir.filename() == rb.run_dir.filename());

  const bool update = std::getenv("NAUDIT_UPDATE_GOLDEN") != nullptr;
  const fs::path golden = fixture("mini/golden");
  if (update) fs::create_directories(golden);
  for (const auto& name : kReportNames) {
    const std::string first = read_text_file(ra.run_dir / "reports" / name);
    const std::string second = read_text_file(rb.run_dir / "reports" / name);
    CHECK_MESSAGE(first == second, name);
    if (update) {
      write_text_file(golden / name, first);
    } else {
      REQUIRE_MESSAGE(fs::exists(golden / name), "missing snapshot ", name);
      CHECK_MESSAGE(first == read_text_file(golden / name), name);
    }
  }

  // Re-running into the same directory rewrites identical files.
  const auto again = end_to_end(mini_config(a.path()), fixture("mini/corpus.csv"), CorpusFormat::UpstreamStudy1);
  CHECK(again.run_dir == ra.run_dir);
  CHECK(read_text_file(again.run_dir / "reports" / "stats.json") ==
        read_text_file(rb.run_dir / "reports" / "stats.json"));

  const Json stats = Json::parse(strip_manifest_line(read_text_file(ra.run_dir / "reports" / "stats.json")));
  CHECK(stats.at("extraction").at("records") == 100);
  CHECK(stats.at("extraction").at("qa_failed").empty());
  CHECK(stats.at("ratios").at("ratio").is_number());
  CHECK(stats.at("distributions").at("countries").get<int>() >= 3);
  CHECK(stats.at("clustering").at("clusters").get<int>() >= 1);

  const std::string contrast = read_text_file(ra.run_dir / "reports" / "contrast.csv");
  CHECK(contrast.find(",Majority,") != std::string::npos);
  CHECK(contrast.find(",Minority,") != std::string::npos);
}

TEST_CASE("a seed change moves the embedding") {
  TempDir a, b;
  RunConfig ca = mini_config(a.path());
  RunConfig cb = mini_config(b.path());
  cb.seed = ca.seed + 1;
  const auto ra = end_to_end(ca, fixture("mini/corpus.csv"), CorpusFormat::UpstreamStudy1);
  const auto rb = end_to_end(cb, fixture("mini/corpus.csv"), CorpusFormat::UpstreamStudy1);
  CHECK(ra.run_dir.filename() != rb.run_dir.filename());
  CHECK(strip_manifest_line(read_text_file(ra.run_dir / "reports" / "choropleth.csv")) ==
        strip_manifest_line(read_text_file(rb.run_dir / "reports" / "choropleth.csv")));
  CHECK(strip_manifest_line(read_text_file(ra.run_dir / "reports" / "tsne.csv")) !=
        strip_manifest_line(read_text_file(rb.run_dir / "reports" / "tsne.csv")));
}

TEST_CASE("a corpus without nationality cues yields null ratios") {
  TempDir dir;
  std::string rows;
  for (int i = 0; i < 4; ++i) {
    NarrativeRecord r;
    r.model = "m";
    r.scenario_id = "learning-science";
    r.power_condition = i % 2 == 0 ? PowerCondition::Neutral : PowerCondition::Laden;
    r.input_country = "USA";
    r.prompt_text = "p" + std::to_string(i);
    r.story_text = "A quiet afternoon in the library with a patient tutor.";
    r.id = record_id(r.model, r.prompt_text, 0);
    rows += to_json(r).dump() + "\n";
  }
  write_text_file(dir / "corpus.jsonl", rows);
  RunConfig c = default_run_config();
  c.output_dir = dir / "runs";
  const auto result = end_to_end(c, dir / "corpus.jsonl", CorpusFormat::Native);
  const Json stats = Json::parse(strip_manifest_line(read_text_file(result.run_dir / "reports" / "stats.json")));
  CHECK(stats.at("ratios").at("ratio").is_null());
  CHECK(stats.at("ratios").at("neutral_ratio").is_null());
  CHECK(stats.at("distributions").at("countries") == 0);
  CHECK(stats.at("tsne").contains("skipped"));
}

TEST_CASE("stage errors keep their kind and name the stage") {
  TempDir dir;
  write_text_file(dir / "corpus.jsonl", "{\"model\": \"m\"}\n");
  RunConfig c = default_run_config();
  c.output_dir = dir / "runs";
  try {
    end_to_end(c, dir / "corpus.jsonl", CorpusFormat::Native);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("stage ingest") != std::string::npos);
    CHECK(std::string(e.what()).find("line 1:") != std::string::npos);
  }
  CHECK_THROWS_AS(end_to_end(c, dir / "absent.jsonl", CorpusFormat::Native), ValidationError);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"analyze", "ratios"}).code == 1);  // --mentions is required
  CHECK(cli({"extract", "--corpus", "/nonexistent.jsonl", "--out", "/tmp/x.jsonl"}).code == 1);
  CHECK(cli({"--log-level", "loud", "prompts", "expand", "--study", "us"}).code == 1);

  TempDir dir;
  write_text_file(dir / "bad.json", "{\"analysis\": {\"cut\": -1}}");
  const auto bad = cli({"--config", (dir / "bad.json").string(), "prompts", "expand", "--study", "us"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("prompts expand reports the planned cardinality") {
  TempDir dir;
  const auto r = cli({"prompts", "expand", "--study", "global", "--samples", "30", "--out",
                      (dir / "p.jsonl").string()});
  REQUIRE(r.code == 0);
  const Json m = Json::parse(r.out).at("manifest");
  CHECK(m.at("planned_narratives") == 292500);
  CHECK(m.at("prompt_instances") == 9750);
  CHECK(read_jsonl(dir / "p.jsonl").size() == 9750);
}

TEST_CASE("ingest, extract, evaluate and analyze from the command line") {
  TempDir dir;
  const std::string corpus = (dir / "corpus.jsonl").string();
  const std::string mentions = (dir / "mentions.jsonl").string();
  const std::string baseline = (dir / "baseline.jsonl").string();

  REQUIRE(cli({"ingest", "--input", fixture("mini/corpus.csv").string(), "--format",
               "upstream-study1", "--out", corpus}).code == 0);
  CHECK(read_corpus(corpus).size() == 100);

  REQUIRE(cli({"extract", "--corpus", corpus, "--out", mentions, "--qa", "replay", "--qa-replay",
               fixture("mini/qa_replay.jsonl").string(), "--report", (dir / "rep.json").string()})
              .code == 0);

  const auto ratios = cli({"analyze", "ratios", "--mentions", mentions, "--home", "USA"});
  REQUIRE(ratios.code == 0);
  const Json rj = Json::parse(ratios.out);
  CHECK(rj.contains("manifest"));
  CHECK(rj.at("ratios").at("ratio").is_number());

  const auto cluster = cli({"analyze", "cluster", "--mentions", mentions, "--min-refs", "2"});
  CHECK(cluster.code == 0);
  CHECK(cluster.out.find("cluster,size,members,entropy") != std::string::npos);
  CHECK(cli({"analyze", "tsne", "--mentions", mentions, "--min-refs", "2", "--perplexity", "2"}).code == 0);
  CHECK(cli({"analyze", "cluster", "--mentions", mentions, "--linkage", "ward"}).code == 1);

  const auto contrast = cli({"contrast", "--corpus", corpus, "--ngrams", "2", "--top", "3"});
  CHECK(contrast.code == 0);
  CHECK(contrast.out.find("n,side,rank,ngram") != std::string::npos);

  const std::string labeled = (dir / "labeled.jsonl").string();
  REQUIRE(cli({"ingest", "--input", fixture("labeled/corpus.jsonl").string(), "--out", labeled}).code == 0);
  REQUIRE(cli({"extract", "--corpus", labeled, "--out", baseline}).code == 0);
  const auto eval = cli({"evaluate", "--gold", fixture("labeled/gold.jsonl").string(), "--pred",
                         "string-match=" + baseline, "--resamples", "200", "--csv",
                         (dir / "metrics.csv").string()});
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("| string-match |") != std::string::npos);
  CHECK(read_text_file(dir / "metrics.csv").find("string-match,Object,") != std::string::npos);
}

TEST_CASE("report writes the six report files") {
  TempDir dir;
  const auto r = cli({"--config", fixture("mini/config.json").string(), "report", "--corpus",
                      fixture("mini/corpus.csv").string(), "--format", "upstream-study1",
                      "--out-dir", dir.path().string()});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j.at("reports").size() == 6);
  for (const auto& p : j.at("reports")) CHECK(fs::exists(p.get<std::string>()));

  // Global options are also accepted after the subcommand.
  const auto late = cli({"report", "--corpus", fixture("mini/corpus.csv").string(), "--format",
                         "upstream-study1", "--out-dir", dir.path().string(), "--config",
                         fixture("mini/config.json").string()});
  REQUIRE(late.code == 0);
  CHECK(Json::parse(late.out).at("run_dir") == j.at("run_dir"));
}

}  // TEST_SUITE
