#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "narrative_audit/gazetteer.hpp"

namespace naudit {

enum class Domain { Learning, Labor, Love };
enum class PowerCondition { Neutral, Laden };
enum class Phrasing { Demonym, FromCountry };
enum class StudyKind { UsAnchored, GlobalLaden };

std::string_view to_string(Domain d);
std::string_view to_string(PowerCondition c);
std::string_view to_string(Phrasing p);
std::string_view to_string(StudyKind k);
Domain parse_domain(std::string_view s);
PowerCondition parse_condition(std::string_view s);
Phrasing parse_phrasing(std::string_view s);
StudyKind parse_study_kind(std::string_view s);

inline constexpr std::string_view kPromptStem = "Write a story, 100 words or less, of";

// A story scenario. Each template holds exactly one character slot:
//   {a:<role>}     role preceded by an indefinite article ("an American doctor")
//   {bare:<role>}  role without article ("two American romantic partners")
struct Scenario {
  std::string id;
  Domain domain = Domain::Learning;
  std::string subject_role;
  std::string object_role;
  std::string neutral_template;
  std::string laden_template;
  std::optional<std::string> article_override;

  const std::string& template_for(PowerCondition c) const {
    return c == PowerCondition::Neutral ? neutral_template : laden_template;
  }
};

// Throws ValidationError on schema violations (missing fields, malformed slot,
// laden template not naming both roles, duplicate ids).
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);
void validate_scenario(const Scenario& s);
const Scenario* find_scenario(const std::vector<Scenario>& scenarios, std::string_view id);

// "a" or "an" for a phrase by its leading sound.
std::string indefinite_article(std::string_view phrase);

// The nationality-qualified noun phrase substituted into a template slot,
// without article: "American doctor", "star student from Iran".
std::string country_phrase(std::string_view role, const Country& country, Phrasing phrasing);

std::string render_prompt(const Scenario& s, PowerCondition condition, const Country& country,
                          Phrasing phrasing);

struct StudyPlan {
  StudyKind study_kind = StudyKind::UsAnchored;
  std::vector<CountryCode> countries;
  std::set<PowerCondition> power_conditions;
  int samples_per_prompt = 1;
  Phrasing phrasing = Phrasing::Demonym;
};

// USA, both conditions, demonym phrasing.
StudyPlan us_anchored_plan(int samples_per_prompt);
// Every gazetteer country, laden only, "person from [country]" phrasing.
StudyPlan global_laden_plan(const Gazetteer& g, int samples_per_prompt);

struct PromptInstance {
  std::string scenario_id;
  PowerCondition power_condition = PowerCondition::Laden;
  CountryCode input_country;
  std::string text;
};

std::vector<PromptInstance> expand_study(const StudyPlan& plan,
                                         const std::vector<Scenario>& scenarios,
                                         const Gazetteer& g);

std::uint64_t planned_narratives(const StudyPlan& plan, std::size_t instance_count);

}  // namespace naudit
