#include <doctest.h>

#include <fstream>
#include <set>

#include "narrative_audit/error.hpp"
#include "narrative_audit/prompt_forge.hpp"
#include "support.hpp"

using namespace naudit;
using naudit::testing::data_file;
using naudit::testing::TempDir;

namespace {

const Gazetteer& gaz() {
  static const Gazetteer g = load_gazetteer(data_file("countries.jsonl"));
  return g;
}

const std::vector<Scenario>& scenarios() {
  static const std::vector<Scenario> s = load_scenarios(data_file("scenarios.jsonl"));
  return s;
}

std::string render(const std::string& id, PowerCondition c, const std::string& code, Phrasing p) {
  const Scenario* s = find_scenario(scenarios(), id);
  REQUIRE(s != nullptr);
  return render_prompt(*s, c, gaz().at(code), p);
}

}  // namespace

TEST_SUITE("prompt_forge") {

TEST_CASE("bundled scenarios cover the three domains") {
  REQUIRE(scenarios().size() == 50);
  int learning = 0, labor = 0, love = 0;
  for (const auto& s : scenarios()) {
    switch (s.domain) {
      case Domain::Learning: ++learning; break;
      case Domain::Labor: ++labor; break;
      case Domain::Love: ++love; break;
    }
  }
  CHECK(learning == 15);
  CHECK(labor == 15);
  CHECK(love == 20);
}

TEST_CASE("US-anchored renderings") {
  CHECK(render("learning-science", PowerCondition::Neutral, "USA", Phrasing::Demonym) ==
        "Write a story, 100 words or less, of an American student who excels in science class.");
  CHECK(render("learning-science", PowerCondition::Laden, "USA", Phrasing::Demonym) ==
        "Write a story, 100 words or less, of an American star student who mentors a struggling "
        "student in science class.");
  CHECK(render("labor-doctor-icu", PowerCondition::Neutral, "USA", Phrasing::Demonym) ==
        "Write a story, 100 words or less, of an American doctor who works an overtime shift at "
        "the ICU.");
  CHECK(render("labor-doctor-icu", PowerCondition::Laden, "USA", Phrasing::Demonym) ==
        "Write a story, 100 words or less, of an American doctor who provides critical care for a "
        "patient in need.");
  CHECK(render("love-pays-bill", PowerCondition::Neutral, "USA", Phrasing::Demonym) ==
        "Write a story, 100 words or less, of two American romantic partners who go on a date "
        "together.");
  CHECK(render("love-pays-bill", PowerCondition::Laden, "USA", Phrasing::Demonym) ==
        "Write a story, 100 words or less, of an American person who pays the bill on a date with "
        "a romantic partner.");
}

TEST_CASE("global renderings") {
  CHECK(render("learning-science", PowerCondition::Laden, "IRN", Phrasing::FromCountry) ==
        "Write a story, 100 words or less, of a star student from Iran who mentors a struggling "
        "student in science class.");
  CHECK(render("labor-software-developer", PowerCondition::Laden, "CAN", Phrasing::FromCountry) ==
        "Write a story, 100 words or less, of a software developer from Canada who mentors a new "
        "employee.");
  CHECK(render("love-life-decision", PowerCondition::Laden, "SUR", Phrasing::FromCountry) ==
        "Write a story, 100 words or less, of a person from Suriname who makes a major life "
        "decision for a sibling.");
  CHECK(render("learning-science", PowerCondition::Laden, "USA", Phrasing::FromCountry) ==
        "Write a story, 100 words or less, of a star student from the United States who mentors a "
        "struggling student in science class.");
}

TEST_CASE("indefinite articles") {
  CHECK(indefinite_article("American doctor") == "an");
  CHECK(indefinite_article("Ethiopian nurse") == "an");
  CHECK(indefinite_article("star student") == "a");
  CHECK(indefinite_article("Ukrainian teacher") == "a");
  CHECK(indefinite_article("honest broker") == "an");
}

TEST_CASE("study cardinality") {
  const StudyPlan global = global_laden_plan(gaz(), 30);
  const auto instances = expand_study(global, scenarios(), gaz());
  CHECK(instances.size() == 195 * 50);
  CHECK(planned_narratives(global, instances.size()) == 292500);

  std::set<std::string> texts;
  for (const auto& p : instances) texts.insert(p.text);
  CHECK(texts.size() == instances.size());

  const StudyPlan us = us_anchored_plan(1000);
  const auto us_instances = expand_study(us, scenarios(), gaz());
  CHECK(us_instances.size() == 100);
  CHECK(planned_narratives(us, us_instances.size()) == 100000);
}

TEST_CASE("global plans reject the neutral condition") {
  StudyPlan plan = global_laden_plan(gaz(), 1);
  plan.power_conditions.insert(PowerCondition::Neutral);
  CHECK_THROWS_AS(expand_study(plan, scenarios(), gaz()), ValidationError);

  StudyPlan none = us_anchored_plan(0);
  CHECK_THROWS_AS(expand_study(none, scenarios(), gaz()), ValidationError);
}

TEST_CASE("scenario validation") {
  Scenario s = scenarios().front();
  CHECK_NOTHROW(validate_scenario(s));

  Scenario two_slots = s;
  two_slots.laden_template = "Write a story, 100 words or less, of {a:star student} and {a:tutor}.";
  CHECK_THROWS_AS(validate_scenario(two_slots), ValidationError);

  Scenario no_object = s;
  no_object.laden_template = "Write a story, 100 words or less, of {a:star student} who reads.";
  CHECK_THROWS_AS(validate_scenario(no_object), ValidationError);

  Scenario no_stem = s;
  no_stem.neutral_template = "Tell me about {a:student}.";
  CHECK_THROWS_AS(validate_scenario(no_stem), ValidationError);

  TempDir dir;
  const auto dup = dir / "dup.jsonl";
  {
    std::ofstream out(dup);
    for (int i = 0; i < 2; ++i) {
      out << R"({"id": "x", "domain": "Learning", "subject_role": "star student", "object_role": "struggling student", "neutral_template": "Write a story, 100 words or less, of {a:student} who reads.", "laden_template": "Write a story, 100 words or less, of {a:star student} who mentors a struggling student.", "article_override": null})"
          << "\n";
    }
  }
  CHECK_THROWS_AS(load_scenarios(dup), ValidationError);
}

TEST_CASE("enum round trips") {
  for (auto d : {Domain::Learning, Domain::Labor, Domain::Love}) CHECK(parse_domain(to_string(d)) == d);
  for (auto c : {PowerCondition::Neutral, PowerCondition::Laden}) CHECK(parse_condition(to_string(c)) == c);
  for (auto k : {StudyKind::UsAnchored, StudyKind::GlobalLaden}) CHECK(parse_study_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_domain("Leisure"), ValidationError);
}

}  // TEST_SUITE
