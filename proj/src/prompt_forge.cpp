#include "narrative_audit/prompt_forge.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "narrative_audit/error.hpp"
#include "narrative_audit/jsonl.hpp"

namespace naudit {
namespace {

struct Slot {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past '}'
  bool with_article = true;
  std::string role;
};

std::optional<Slot> find_slot(const std::string& tmpl) {
  std::optional<Slot> found;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string::npos) {
    const auto close = tmpl.find('}', pos);
    if (close == std::string::npos) {
      throw ValidationError("unterminated slot in template: " + tmpl);
    }
    const std::string body = tmpl.substr(pos + 1, close - pos - 1);
    Slot slot{pos, close + 1, true, {}};
    if (body.rfind("a:", 0) == 0) {
      slot.role = body.substr(2);
    } else if (body.rfind("bare:", 0) == 0) {
      slot.with_article = false;
      slot.role = body.substr(5);
    } else {
      throw ValidationError("unknown slot '{" + body + "}' in template: " + tmpl);
    }
    if (slot.role.empty()) throw ValidationError("empty slot role in template: " + tmpl);
    if (found) throw ValidationError("template holds more than one slot: " + tmpl);
    found = slot;
    pos = close + 1;
  }
  return found;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string required_string(const Json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || !obj.at(key).is_string() || obj.at(key).get<std::string>().empty()) {
    throw ValidationError("scenario line " + std::to_string(line) + ": missing or empty '" +
                          key + "'");
  }
  return obj.at(key).get<std::string>();
}

}  // namespace

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::Learning: return "Learning";
    case Domain::Labor: return "Labor";
    case Domain::Love: return "Love";
  }
  return "?";
}

std::string_view to_string(PowerCondition c) {
  return c == PowerCondition::Neutral ? "Neutral" : "Laden";
}

std::string_view to_string(Phrasing p) {
  return p == Phrasing::Demonym ? "Demonym" : "FromCountry";
}

std::string_view to_string(StudyKind k) {
  return k == StudyKind::UsAnchored ? "UsAnchored" : "GlobalLaden";
}

Domain parse_domain(std::string_view s) {
  const auto l = lower_ascii(s);
  if (l == "learning") return Domain::Learning;
  if (l == "labor") return Domain::Labor;
  if (l == "love") return Domain::Love;
  throw ValidationError("unknown domain '" + std::string(s) + "'");
}

PowerCondition parse_condition(std::string_view s) {
  const auto l = lower_ascii(s);
  if (l == "neutral" || l == "power-neutral") return PowerCondition::Neutral;
  if (l == "laden" || l == "power-laden") return PowerCondition::Laden;
  throw ValidationError("unknown power condition '" + std::string(s) + "'");
}

Phrasing parse_phrasing(std::string_view s) {
  const auto l = lower_ascii(s);
  if (l == "demonym") return Phrasing::Demonym;
  if (l == "fromcountry" || l == "from-country") return Phrasing::FromCountry;
  throw ValidationError("unknown phrasing '" + std::string(s) + "'");
}

StudyKind parse_study_kind(std::string_view s) {
  const auto l = lower_ascii(s);
  if (l == "usanchored" || l == "us" || l == "us-anchored") return StudyKind::UsAnchored;
  if (l == "globalladen" || l == "global" || l == "global-laden") return StudyKind::GlobalLaden;
  throw ValidationError("unknown study kind '" + std::string(s) + "'");
}

void validate_scenario(const Scenario& s) {
  for (PowerCondition c : {PowerCondition::Neutral, PowerCondition::Laden}) {
    const auto& tmpl = s.template_for(c);
    if (tmpl.rfind(kPromptStem, 0) != 0) {
      throw ValidationError("scenario " + s.id + ": template must start with the prompt stem");
    }
    if (!find_slot(tmpl)) {
      throw ValidationError("scenario " + s.id + ": " + std::string(to_string(c)) +
                            " template has no character slot");
    }
  }
  const auto laden = find_slot(s.laden_template);
  if (laden->role != s.subject_role) {
    throw ValidationError("scenario " + s.id + ": laden slot role '" + laden->role +
                          "' differs from subject_role '" + s.subject_role + "'");
  }
  std::string rest = s.laden_template;
  rest.erase(laden->begin, laden->end - laden->begin);
  if (rest.find(s.object_role) == std::string::npos) {
    throw ValidationError("scenario " + s.id + ": laden template does not name object_role '" +
                          s.object_role + "'");
  }
  if (s.article_override && *s.article_override != "a" && *s.article_override != "an") {
    throw ValidationError("scenario " + s.id + ": article_override must be 'a' or 'an'");
  }
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  std::vector<Scenario> out;
  std::set<std::string> ids;
  for (const auto& row : read_jsonl(path)) {
    const Json& obj = row.value;
    if (!obj.is_object()) {
      throw ValidationError("scenario line " + std::to_string(row.line) + ": expected an object");
    }
    if (obj.contains("schema")) continue;
    Scenario s;
    s.id = required_string(obj, "id", row.line);
    s.domain = parse_domain(required_string(obj, "domain", row.line));
    s.subject_role = required_string(obj, "subject_role", row.line);
    s.object_role = required_string(obj, "object_role", row.line);
    s.neutral_template = required_string(obj, "neutral_template", row.line);
    s.laden_template = required_string(obj, "laden_template", row.line);
    if (obj.contains("article_override") && obj.at("article_override").is_string()) {
      s.article_override = obj.at("article_override").get<std::string>();
    }
    validate_scenario(s);
    if (!ids.insert(s.id).second) throw ValidationError("duplicate scenario id " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

const Scenario* find_scenario(const std::vector<Scenario>& scenarios, std::string_view id) {
  for (const auto& s : scenarios) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::string indefinite_article(std::string_view phrase) {
  const std::string l = lower_ascii(phrase);
  if (l.empty()) return "a";
  // Vowel letters with a consonant sound, and silent-h words.
  static constexpr std::array<std::string_view, 7> kConsonantSound = {
      "uni", "uk", "ur", "usa", "u.s", "eu", "one"};
  static constexpr std::array<std::string_view, 3> kVowelSound = {"hour", "honest", "honor"};
  for (auto p : kConsonantSound) {
    if (l.rfind(p, 0) == 0) return "a";
  }
  for (auto p : kVowelSound) {
    if (l.rfind(p, 0) == 0) return "an";
  }
  return std::string_view("aeiou").find(l.front()) != std::string_view::npos ? "an" : "a";
}

std::string country_phrase(std::string_view role, const Country& country, Phrasing phrasing) {
  if (phrasing == Phrasing::Demonym) {
    if (country.demonyms.empty()) {
      throw ValidationError("country " + country.code + " has no demonym for Demonym phrasing");
    }
    return country.demonyms.front() + " " + std::string(role);
  }
  if (country.canonical_name.empty()) {
    throw ValidationError("country " + country.code + " has no canonical name");
  }
  std::string phrase = std::string(role) + " from ";
  if (!country.name_article.empty()) phrase += country.name_article + " ";
  return phrase + country.canonical_name;
}

std::string render_prompt(const Scenario& s, PowerCondition condition, const Country& country,
                          Phrasing phrasing) {
  const std::string& tmpl = s.template_for(condition);
  const auto slot = find_slot(tmpl);
  if (!slot) throw ValidationError("scenario " + s.id + " has no character slot");
  std::string phrase = country_phrase(slot->role, country, phrasing);
  if (slot->with_article) {
    const std::string article = s.article_override ? *s.article_override : indefinite_article(phrase);
    phrase = article + " " + phrase;
  }
  std::string out = tmpl;
  out.replace(slot->begin, slot->end - slot->begin, phrase);
  return out;
}

StudyPlan us_anchored_plan(int samples_per_prompt) {
  return StudyPlan{StudyKind::UsAnchored,
                   {"USA"},
                   {PowerCondition::Neutral, PowerCondition::Laden},
                   samples_per_prompt,
                   Phrasing::Demonym};
}

StudyPlan global_laden_plan(const Gazetteer& g, int samples_per_prompt) {
  StudyPlan plan{StudyKind::GlobalLaden, {}, {PowerCondition::Laden}, samples_per_prompt,
                 Phrasing::FromCountry};
  for (const auto& c : g.countries()) plan.countries.push_back(c.code);
  return plan;
}

std::vector<PromptInstance> expand_study(const StudyPlan& plan,
                                         const std::vector<Scenario>& scenarios,
                                         const Gazetteer& g) {
  if (plan.samples_per_prompt < 1) throw ValidationError("samples_per_prompt must be positive");
  if (plan.power_conditions.empty()) throw ValidationError("study plan has no power conditions");
  if (plan.study_kind == StudyKind::GlobalLaden &&
      plan.power_conditions.count(PowerCondition::Neutral) != 0) {
    throw ValidationError("GlobalLaden plans use only the Laden condition");
  }
  std::vector<const Country*> countries;
  for (const auto& code : plan.countries) countries.push_back(&g.at(code));

  std::vector<PromptInstance> out;
  out.reserve(countries.size() * scenarios.size() * plan.power_conditions.size());
  for (const Country* country : countries) {
    for (PowerCondition condition : plan.power_conditions) {
      for (const Scenario& s : scenarios) {
        out.push_back({s.id, condition, country->code,
                       render_prompt(s, condition, *country, plan.phrasing)});
      }
    }
  }
  return out;
}

std::uint64_t planned_narratives(const StudyPlan& plan, std::size_t instance_count) {
  return static_cast<std::uint64_t>(instance_count) *
         static_cast<std::uint64_t>(plan.samples_per_prompt);
}

}  // namespace naudit
