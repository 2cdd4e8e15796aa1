#include <doctest.h>

#include <algorithm>
#include <set>

#include "narrative_audit/cue_extraction.hpp"
#include "narrative_audit/eval_harness.hpp"
#include "support.hpp"

using namespace naudit;
using naudit::testing::data_file;
using naudit::testing::fixture;

namespace {

const Gazetteer& gaz() {
  static const Gazetteer g = load_gazetteer(data_file("countries.jsonl"));
  return g;
}

const std::vector<Scenario>& scenarios() {
  static const std::vector<Scenario> s = load_scenarios(data_file("scenarios.jsonl"));
  return s;
}

const std::vector<NarrativeRecord>& labeled() {
  static const std::vector<NarrativeRecord> r = read_corpus(fixture("labeled/corpus.jsonl"));
  return r;
}

NarrativeRecord story(const std::string& text, const std::string& scenario = "labor-doctor-icu") {
  NarrativeRecord r;
  r.id = "r1";
  r.model = "m";
  r.scenario_id = scenario;
  r.input_country = "USA";
  r.prompt_text = "p";
  r.story_text = text;
  return r;
}

const CueMention* find_mention(const std::vector<CueMention>& ms, const CountryCode& code) {
  for (const auto& m : ms) {
    if (std::find(m.countries.begin(), m.countries.end(), code) != m.countries.end()) return &m;
  }
  return nullptr;
}

}  // namespace

TEST_SUITE("cue_extraction") {

TEST_CASE("string match assigns home to subject and the rest to object") {
  const auto r = story("Emily, an American doctor, treated Sofia, a Mexican patient.");
  const auto ms = string_match_scan(r, gaz(), "USA");
  REQUIRE(ms.size() == 2);
  CHECK(ms[0].countries == std::vector<CountryCode>{"USA"});
  CHECK(ms[0].referent == Referent::Subject);
  CHECK(ms[1].countries == std::vector<CountryCode>{"MEX"});
  CHECK(ms[1].referent == Referent::Object);
  CHECK(ms[1].method == ExtractionMethod::StringMatch);
  REQUIRE(ms[1].span);
  CHECK(r.story_text.substr(ms[1].span->begin, ms[1].span->end - ms[1].span->begin) == "Mexican");
}

TEST_CASE("string match cannot tell names and food from people") {
  for (const auto& [text, code] : std::vector<std::pair<std::string, std::string>>{
           {"Michael Jordan posters covered the wall of the American doctor.", "JOR"},
           {"The American doctor ordered Mexican food after the shift.", "MEX"},
           {"The American doctor had moved from Georgia last spring.", "GEO"}}) {
    const auto ms = string_match_scan(story(text), gaz(), "USA");
    const CueMention* m = find_mention(ms, code);
    REQUIRE(m != nullptr);
    CHECK(m->referent == Referent::Object);
  }
}

TEST_CASE("surface-level recall on the labeled fixture is complete") {
  const auto gold = load_gold(fixture("labeled/gold.jsonl"));
  REQUIRE(gold.size() >= 60);
  std::map<std::string, const NarrativeRecord*> by_id;
  for (const auto& r : labeled()) by_id[r.id] = &r;

  std::size_t total = 0, found = 0;
  for (const auto& g : gold) {
    const auto ms = string_match_scan(*by_id.at(g.record_id), gaz(), "USA");
    std::vector<CountryCode> codes = g.gold_subject;
    codes.insert(codes.end(), g.gold_object.begin(), g.gold_object.end());
    for (const auto& code : codes) {
      ++total;
      if (find_mention(ms, code) != nullptr) ++found;
    }
  }
  CHECK(total > 100);
  CHECK(found == total);
}

TEST_CASE("QA response parsing") {
  const auto a = parse_qa_response(
      R"({"country of origin for the doctor": ["American"], "country of origin for the patient": ["Mexican"]})",
      "doctor", "patient");
  CHECK(a.subject_countries == std::vector<std::string>{"American"});
  CHECK(a.object_countries == std::vector<std::string>{"Mexican"});

  // Fenced, trailing commas, keys in reverse order matched by role.
  const auto b = parse_qa_response(
      "```json\n{\"country of origin for the patient\": [\"Kenyan\",],\n"
      " \"country of origin for the doctor\": [],}\n```",
      "doctor", "patient");
  CHECK(b.subject_countries.empty());
  CHECK(b.object_countries == std::vector<std::string>{"Kenyan"});

  // Unknown roles fall back to document order.
  const auto c = parse_qa_response(
      R"({"country of origin for the tutor": ["Irish"], "country of origin for the pupil": []})",
      "doctor", "patient");
  CHECK(c.subject_countries == std::vector<std::string>{"Irish"});

  try {
    parse_qa_response("I think the doctor is American.");
    FAIL("expected a parse error");
  } catch (const QaResponseError& e) {
    CHECK(e.kind() == QaResponseError::Kind::Malformed);
    CHECK(e.raw() == "I think the doctor is American.");
  }
  CHECK_THROWS_AS(parse_qa_response(R"({"country of origin for the doctor": ["American"]})"),
                  QaResponseError);
  CHECK_THROWS_AS(parse_qa_response(R"({"country of origin for the a": "x", "country of origin for the b": []})"),
                  QaResponseError);
  CHECK_THROWS_AS(parse_qa_response("[1, 2]"), QaResponseError);
}

TEST_CASE("QA prompt substitutes placeholders literally") {
  const std::string p = build_qa_prompt("doctor", "patient", "Write a story about STORY.",
                                        "A tale with SUBJECTROLE inside.");
  CHECK(p.find("country of origin for the doctor") != std::string::npos);
  CHECK(p.find("country of origin for the patient") != std::string::npos);
  CHECK(p.find("Write a story about STORY.") != std::string::npos);
  CHECK(p.find("A tale with SUBJECTROLE inside.") != std::string::npos);
  CHECK(p.find("OBJECTROLE") == std::string::npos);
  CHECK_THROWS_AS(build_qa_prompt("", "patient", "p", "s"), ValidationError);
}

TEST_CASE("attribution of QA answers") {
  const auto r = story(
      "Emily, an American doctor, cared for Ana, a Mexican-American patient, and later ate Thai "
      "curry.");
  QAResponse qa{{"American"}, {"Mexican", "American"}};
  const auto a = attribute_referents(r, qa, gaz());
  CHECK(a.unresolved.empty());
  const CueMention* usa = find_mention(a.mentions, "USA");
  const CueMention* mex = find_mention(a.mentions, "MEX");
  const CueMention* tha = find_mention(a.mentions, "THA");
  REQUIRE(usa != nullptr);
  REQUIRE(mex != nullptr);
  REQUIRE(tha != nullptr);
  CHECK(usa->referent == Referent::Both);
  CHECK(mex->referent == Referent::Object);
  CHECK(tha->referent == Referent::NonCharacter);
  CHECK(mex->span.has_value());

  QAResponse odd{{"American"}, {"Atlantean", "Peru"}};
  const auto b = attribute_referents(r, odd, gaz());
  CHECK(b.unresolved == std::vector<std::string>{"Atlantean"});
  const CueMention* per = find_mention(b.mentions, "PER");
  REQUIRE(per != nullptr);
  CHECK_FALSE(per->span.has_value());
  CHECK(per->referent == Referent::Object);
}

TEST_CASE("character story filter") {
  std::map<std::string, std::vector<CueMention>> by_record;
  by_record["a"] = {{"a", "Mexican", Span{0, 7}, {"MEX"}, Referent::Object, ExtractionMethod::QA}};
  by_record["b"] = {{"b", "Thai", Span{0, 4}, {"THA"}, Referent::NonCharacter, ExtractionMethod::QA},
                    {"b", "American", Span{5, 13}, {"USA"}, Referent::Subject, ExtractionMethod::QA}};
  by_record["c"] = {};
  const auto p = filter_character_stories(by_record, "USA");
  CHECK(p.character_stories == std::vector<std::string>{"a"});
  CHECK(p.non_character_stories == std::vector<std::string>{"b", "c"});
}

TEST_CASE("mention json round trip") {
  CueMention m{"r", "Korean", Span{3, 9}, {"KOR", "PRK"}, Referent::Both, ExtractionMethod::QA};
  CHECK(mention_from_json(to_json(m)) == m);
  CueMention spanless{"r", "Peru", std::nullopt, {"PER"}, Referent::Object, ExtractionMethod::QA};
  CHECK(mention_from_json(to_json(spanless)) == spanless);
}

TEST_CASE("replayed extraction on the labeled fixture") {
  ReplayQaExtractor replay(fixture("labeled/qa_replay.jsonl"));
  const auto result = extract_corpus(labeled(), scenarios(), gaz(), &replay);
  CHECK(result.report.records == labeled().size());
  CHECK(result.report.qa_failed.empty());
  CHECK(result.report.prefiltered > 40);
  CHECK(result.report.qa_requests == result.report.prefiltered);

  const auto gold = load_gold(fixture("labeled/gold.jsonl"));
  const auto [subj, obj] = score_extraction(group_by_record(result.mentions), gold);
  CHECK(subj.f1 > 0.95);
  CHECK(obj.precision > 0.95);
  CHECK(obj.recall > 0.95);
}

TEST_CASE("unparseable answers are retried once, then excluded") {
  class Flaky : public QaExtractor {
   public:
    int calls = 0;
    std::map<std::string, std::string> answer(const std::vector<QaRequest>& requests) override {
      ++calls;
      std::map<std::string, std::string> out;
      for (const auto& r : requests) {
        if (r.record_id == "good") {
          out[r.record_id] = R"({"country of origin for the doctor": ["American"], "country of origin for the patient": ["Kenyan"]})";
        } else if (r.record_id == "late" && calls == 2) {
          out[r.record_id] = R"({"country of origin for the doctor": [], "country of origin for the patient": ["Kenyan"]})";
        } else {
          out[r.record_id] = "sorry, I cannot";
        }
      }
      return out;
    }
  };
  std::vector<NarrativeRecord> records;
  for (const std::string id : {"good", "late", "bad"}) {
    auto r = story("An American doctor met a Kenyan patient.");
    r.id = id;
    records.push_back(r);
  }
  auto plain = story("An American doctor finished the shift.");
  plain.id = "plain";
  records.push_back(plain);

  Flaky qa;
  const auto result = extract_corpus(records, scenarios(), gaz(), &qa);
  CHECK(qa.calls == 2);
  CHECK(result.report.prefiltered == 3);
  CHECK(result.report.qa_retried == 2);
  CHECK(result.report.qa_failed == std::vector<std::string>{"bad"});
  CHECK(result.report.character_stories == 2);
  for (const auto& m : result.mentions) CHECK(m.record_id != "bad");
  CHECK(std::any_of(result.mentions.begin(), result.mentions.end(),
                    [](const CueMention& m) { return m.record_id == "plain"; }));
}

TEST_CASE("baseline extraction without QA") {
  const auto result = extract_corpus(labeled(), scenarios(), gaz(), nullptr);
  CHECK(result.report.qa_requests == 0);
  for (const auto& m : result.mentions) CHECK(m.method == ExtractionMethod::StringMatch);
}

}  // TEST_SUITE
