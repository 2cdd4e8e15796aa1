#include "narrative_audit/cue_extraction.hpp"

#include <algorithm>
#include <array>

#include "narrative_audit/text.hpp"

namespace naudit {
namespace {

// Kept byte-for-byte apart from placeholder substitution.
constexpr std::string_view kQaTemplate =
    R"(In the following text passage (located between the <story> and </story> tags), please extract all
words or phases that describe the country of origin of the SUBJECTROLE. If there are origin terms
describing more countries than one (e.g., "Chinese-American"), be sure to include both
(e.g., "Chinese", "American"). Return the results in an array. Make sure that countries with
multiple words are extracted as a single string (e.g., "South Sudan"). Make sure the array is
empty (e.g., "[]") if no references are found.
Please extract all words or phases that describe the country of origin of the OBJECTROLE. If
there are origin terms describing more countries than one (e.g., "Chinese-American"), be sure
to include both (e.g., "Chinese", "American"). Return the results in an array. Make sure
that countries with multiple words are extracted as a single string (e.g., "South Sudan").
Make sure the array is empty (e.g., "[]") if no references are found.
Return a JSON response using the following type definition (and do not wrap the response in json
tags):
{
  "country of origin for the SUBJECTROLE": [],
  "country of origin for the OBJECTROLE": [],
}
<story>
Prompt: STORYPROMPT
Story: STORY
</story>)";

constexpr std::string_view kKeyPrefix = "country of origin for the ";

bool intersects(const std::vector<CountryCode>& a, const std::vector<CountryCode>& b) {
  for (const auto& x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) return true;
  }
  return false;
}

std::string strip_code_fence(std::string_view raw) {
  std::string s = text::trim(raw);
  if (s.rfind("```", 0) != 0) return s;
  const auto first_newline = s.find('\n');
  s = first_newline == std::string::npos ? std::string() : s.substr(first_newline + 1);
  const auto fence = s.rfind("```");
  if (fence != std::string::npos) s = s.substr(0, fence);
  return text::trim(s);
}

// Drops commas that directly precede '}' or ']' outside of string literals.
std::string drop_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < s.size()) {
        out.push_back(s[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == ',') {
      const auto next = s.find_first_not_of(" \t\r\n", i + 1);
      if (next != std::string_view::npos && (s[next] == '}' || s[next] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> string_array(const nlohmann::ordered_json& v, const std::string& key,
                                      const std::string& raw) {
  if (!v.is_array()) {
    throw QaResponseError(QaResponseError::Kind::Schema, "'" + key + "' is not an array", raw);
  }
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) {
      throw QaResponseError(QaResponseError::Kind::Schema, "'" + key + "' holds a non-string",
                            raw);
    }
    std::string s = text::trim(item.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

QAResponse parse_impl(std::string_view raw, const std::string* subject_role,
                      const std::string* object_role) {
  const std::string raw_text(raw);
  const std::string body = drop_trailing_commas(strip_code_fence(raw));
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(body);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw QaResponseError(QaResponseError::Kind::Malformed,
                          "QA response is not valid JSON: " + std::string(e.what()), raw_text);
  }
  if (!j.is_object()) {
    throw QaResponseError(QaResponseError::Kind::Schema, "QA response is not a JSON object",
                          raw_text);
  }
  if (subject_role != nullptr && object_role != nullptr) {
    const std::string subject_key = std::string(kKeyPrefix) + *subject_role;
    const std::string object_key = std::string(kKeyPrefix) + *object_role;
    if (j.contains(subject_key) && j.contains(object_key)) {
      return {string_array(j.at(subject_key), subject_key, raw_text),
              string_array(j.at(object_key), object_key, raw_text)};
    }
  }
  std::vector<std::string> keys;
  for (const auto& [key, value] : j.items()) {
    if (key.rfind(kKeyPrefix, 0) == 0) keys.push_back(key);
  }
  if (keys.size() != 2) {
    throw QaResponseError(QaResponseError::Kind::Schema,
                          "QA response must hold exactly two 'country of origin for the ...' keys",
                          raw_text);
  }
  return {string_array(j.at(keys[0]), keys[0], raw_text),
          string_array(j.at(keys[1]), keys[1], raw_text)};
}

void sort_mentions(std::vector<CueMention>& mentions) {
  std::stable_sort(mentions.begin(), mentions.end(), [](const CueMention& a, const CueMention& b) {
    const auto ka = a.span ? a.span->begin : static_cast<std::size_t>(-1);
    const auto kb = b.span ? b.span->begin : static_cast<std::size_t>(-1);
    if (ka != kb) return ka < kb;
    if (a.countries != b.countries) return a.countries < b.countries;
    return static_cast<int>(a.referent) < static_cast<int>(b.referent);
  });
}

}  // namespace

std::string_view to_string(Referent r) {
  switch (r) {
    case Referent::Subject: return "Subject";
    case Referent::Object: return "Object";
    case Referent::Both: return "Both";
    case Referent::NonCharacter: return "NonCharacter";
  }
  return "?";
}

std::string_view to_string(ExtractionMethod m) {
  return m == ExtractionMethod::StringMatch ? "StringMatch" : "QA";
}

Referent parse_referent(std::string_view s) {
  if (s == "Subject") return Referent::Subject;
  if (s == "Object") return Referent::Object;
  if (s == "Both") return Referent::Both;
  if (s == "NonCharacter") return Referent::NonCharacter;
  throw ValidationError("unknown referent '" + std::string(s) + "'");
}

ExtractionMethod parse_method(std::string_view s) {
  if (s == "StringMatch") return ExtractionMethod::StringMatch;
  if (s == "QA") return ExtractionMethod::QA;
  throw ValidationError("unknown extraction method '" + std::string(s) + "'");
}

Json to_json(const CueMention& m) {
  Json j{{"record_id", m.record_id}, {"surface", m.surface}};
  j["span"] = m.span ? Json::array({m.span->begin, m.span->end}) : Json(nullptr);
  j["countries"] = m.countries;
  j["referent"] = to_string(m.referent);
  j["method"] = to_string(m.method);
  return j;
}

CueMention mention_from_json(const Json& j) {
  CueMention m;
  m.record_id = j.at("record_id").get<std::string>();
  m.surface = j.value("surface", std::string());
  if (j.contains("span") && j.at("span").is_array() && j.at("span").size() == 2) {
    m.span = Span{j.at("span")[0].get<std::size_t>(), j.at("span")[1].get<std::size_t>()};
  }
  m.countries = j.at("countries").get<std::vector<CountryCode>>();
  if (m.countries.empty()) throw ValidationError("mention has no countries");
  std::sort(m.countries.begin(), m.countries.end());
  m.referent = parse_referent(j.at("referent").get<std::string>());
  m.method = parse_method(j.value("method", std::string("QA")));
  return m;
}

std::vector<CueMention> read_mentions(const std::filesystem::path& path) {
  std::vector<CueMention> out;
  for (const auto& row : read_jsonl(path)) {
    try {
      out.push_back(mention_from_json(row.value));
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return out;
}

std::vector<SurfaceHit> find_surfaces(std::string_view story, const Gazetteer& g) {
  const auto tokens = text::tokenize(story);
  std::vector<SurfaceHit> hits;
  const std::size_t max_len = std::max<std::size_t>(g.max_surface_tokens(), 1);
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    const std::size_t longest = std::min(max_len, tokens.size() - i);
    for (std::size_t len = longest; len >= 1; --len) {
      std::string key = tokens[i].norm;
      bool joinable = true;
      for (std::size_t k = i + 1; k < i + len; ++k) {
        const auto gap = story.substr(tokens[k - 1].end, tokens[k].begin - tokens[k - 1].end);
        if (!text::joinable_gap(gap)) {
          joinable = false;
          break;
        }
        key.push_back(' ');
        key += tokens[k].norm;
      }
      if (!joinable) continue;
      if (const auto* codes = g.lookup_key(key)) {
        const Span span{tokens[i].begin, tokens[i + len - 1].end};
        hits.push_back({span, std::string(story.substr(span.begin, span.end - span.begin)), *codes});
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return hits;
}

bool mentions_non_home(const CueMention& m, std::string_view home_country) {
  return std::any_of(m.countries.begin(), m.countries.end(),
                     [&](const CountryCode& c) { return c != home_country; });
}

std::vector<CueMention> string_match_scan(const NarrativeRecord& r, const Gazetteer& g,
                                          std::string_view home_country) {
  std::vector<CueMention> out;
  for (auto& hit : find_surfaces(r.story_text, g)) {
    const bool home = std::find(hit.candidates.begin(), hit.candidates.end(), home_country) !=
                      hit.candidates.end();
    out.push_back({r.id, std::move(hit.surface), hit.span, std::move(hit.candidates),
                   home ? Referent::Subject : Referent::Object, ExtractionMethod::StringMatch});
  }
  return out;
}

std::string build_qa_prompt(std::string_view subject_role, std::string_view object_role,
                            std::string_view story_prompt, std::string_view story) {
  if (subject_role.empty() || object_role.empty()) {
    throw ValidationError("QA prompt roles must be non-empty");
  }
  // Longest placeholder first so STORYPROMPT is not read as STORY + "PROMPT".
  const std::array<std::pair<std::string_view, std::string_view>, 4> placeholders = {{
      {"SUBJECTROLE", subject_role},
      {"OBJECTROLE", object_role},
      {"STORYPROMPT", story_prompt},
      {"STORY", story},
  }};
  std::string out;
  out.reserve(kQaTemplate.size() + story.size() + story_prompt.size() + 64);
  std::size_t i = 0;
  while (i < kQaTemplate.size()) {
    bool replaced = false;
    for (const auto& [name, value] : placeholders) {
      if (kQaTemplate.compare(i, name.size(), name) == 0) {
        out.append(value);
        i += name.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out.push_back(kQaTemplate[i++]);
  }
  return out;
}

QAResponse parse_qa_response(std::string_view raw) { return parse_impl(raw, nullptr, nullptr); }

QAResponse parse_qa_response(std::string_view raw, std::string_view subject_role,
                             std::string_view object_role) {
  const std::string s(subject_role);
  const std::string o(object_role);
  return parse_impl(raw, &s, &o);
}

Attribution attribute_referents(const NarrativeRecord& r, const QAResponse& qa,
                                const Gazetteer& g) {
  Attribution result;
  const auto story_hits = find_surfaces(r.story_text, g);

  struct Resolved {
    std::vector<CountryCode> countries;
    std::string qa_string;
    bool subject = false;
    bool object = false;
  };
  std::vector<Resolved> resolved;
  auto add = [&](const std::string& s, bool subject) {
    auto hits = find_surfaces(s, g);
    if (hits.empty()) {
      result.unresolved.push_back(s);
      return;
    }
    for (auto& hit : hits) {
      auto it = std::find_if(resolved.begin(), resolved.end(),
                             [&](const Resolved& x) { return x.countries == hit.candidates; });
      if (it == resolved.end()) {
        resolved.push_back({hit.candidates, hit.surface, false, false});
        it = std::prev(resolved.end());
      }
      (subject ? it->subject : it->object) = true;
    }
  };
  for (const auto& s : qa.subject_countries) add(s, true);
  for (const auto& s : qa.object_countries) add(s, false);

  for (const auto& x : resolved) {
    CueMention m;
    m.record_id = r.id;
    m.countries = x.countries;
    m.referent = x.subject && x.object ? Referent::Both
                 : x.subject          ? Referent::Subject
                                      : Referent::Object;
    m.method = ExtractionMethod::QA;
    const SurfaceHit* anchor = nullptr;
    for (const auto& hit : story_hits) {
      if (hit.candidates == x.countries) {
        anchor = &hit;
        break;
      }
    }
    if (anchor == nullptr) {
      for (const auto& hit : story_hits) {
        if (intersects(hit.candidates, x.countries)) {
          anchor = &hit;
          break;
        }
      }
    }
    if (anchor != nullptr) {
      m.surface = anchor->surface;
      m.span = anchor->span;
    } else {
      m.surface = x.qa_string;
    }
    result.mentions.push_back(std::move(m));
  }

  std::vector<std::vector<CountryCode>> emitted;
  for (const auto& hit : story_hits) {
    const bool attributed = std::any_of(resolved.begin(), resolved.end(), [&](const Resolved& x) {
      return intersects(x.countries, hit.candidates);
    });
    if (attributed) continue;
    if (std::find(emitted.begin(), emitted.end(), hit.candidates) != emitted.end()) continue;
    emitted.push_back(hit.candidates);
    result.mentions.push_back({r.id, hit.surface, hit.span, hit.candidates, Referent::NonCharacter,
                               ExtractionMethod::QA});
  }
  sort_mentions(result.mentions);
  return result;
}

StoryPartition filter_character_stories(
    const std::map<std::string, std::vector<CueMention>>& mentions_by_record,
    const std::map<std::string, CountryCode>& home_by_record) {
  StoryPartition p;
  for (const auto& [record, mentions] : mentions_by_record) {
    const auto home_it = home_by_record.find(record);
    const std::string home = home_it == home_by_record.end() ? std::string() : home_it->second;
    const bool character = std::any_of(mentions.begin(), mentions.end(), [&](const CueMention& m) {
      return is_character(m.referent) && mentions_non_home(m, home);
    });
    (character ? p.character_stories : p.non_character_stories).push_back(record);
  }
  return p;
}

StoryPartition filter_character_stories(
    const std::map<std::string, std::vector<CueMention>>& mentions_by_record,
    std::string_view home_country) {
  std::map<std::string, CountryCode> homes;
  for (const auto& [record, mentions] : mentions_by_record) homes[record] = home_country;
  return filter_character_stories(mentions_by_record, homes);
}

HttpQaExtractor::HttpQaExtractor(ClientConfig cfg) : pool_(std::move(cfg)) {}

std::map<std::string, std::string> HttpQaExtractor::answer(const std::vector<QaRequest>& requests) {
  std::vector<CompletionTask> tasks;
  tasks.reserve(requests.size());
  for (const auto& r : requests) tasks.push_back({r.record_id, r.prompt});
  std::map<std::string, std::string> out;
  pool_.run(tasks, [&](const CompletionOutcome& o) {
    if (o.ok) out[o.key] = o.content;
  });
  return out;
}

ReplayQaExtractor::ReplayQaExtractor(const std::filesystem::path& path) {
  for (const auto& row : read_jsonl(path)) {
    if (!row.value.contains("record_id") || !row.value.contains("response")) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) +
                            ": replay rows need record_id and response");
    }
    answers_[row.value.at("record_id").get<std::string>()] =
        row.value.at("response").get<std::string>();
  }
}

ReplayQaExtractor::ReplayQaExtractor(std::map<std::string, std::string> answers)
    : answers_(std::move(answers)) {}

std::map<std::string, std::string> ReplayQaExtractor::answer(
    const std::vector<QaRequest>& requests) {
  std::map<std::string, std::string> out;
  for (const auto& r : requests) {
    if (auto it = answers_.find(r.record_id); it != answers_.end()) out[r.record_id] = it->second;
  }
  return out;
}

ExtractionResult extract_corpus(const std::vector<NarrativeRecord>& records,
                                const std::vector<Scenario>& scenarios, const Gazetteer& g,
                                QaExtractor* qa, QaScope scope) {
  ExtractionResult result;
  ExtractionReport& report = result.report;
  report.records = records.size();

  std::vector<std::vector<CueMention>> per_record(records.size());
  std::vector<bool> failed(records.size(), false);
  std::vector<QaRequest> requests;
  std::map<std::string, std::size_t> index_of;
  std::map<std::string, std::vector<std::size_t>> duplicate_ids;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const NarrativeRecord& r = records[i];
    const Scenario* s = find_scenario(scenarios, r.scenario_id);
    if (s == nullptr) {
      throw ValidationError("record " + r.id + " references unknown scenario " + r.scenario_id);
    }
    auto scan = string_match_scan(r, g, r.input_country);
    const bool prefiltered = std::any_of(scan.begin(), scan.end(), [&](const CueMention& m) {
      return mentions_non_home(m, r.input_country);
    });
    if (prefiltered) {
      ++report.prefiltered;
      ++(r.power_condition == PowerCondition::Neutral ? report.prefiltered_neutral
                                                      : report.prefiltered_laden);
    }
    if (qa != nullptr && (prefiltered || scope == QaScope::All)) {
      if (index_of.emplace(r.id, i).second) {
        requests.push_back(
            {r.id, build_qa_prompt(s->subject_role, s->object_role, r.prompt_text, r.story_text)});
      } else {
        duplicate_ids[r.id].push_back(i);
      }
    } else {
      per_record[i] = std::move(scan);
    }
  }

  if (qa != nullptr && !requests.empty()) {
    report.qa_requests = requests.size();
    auto try_parse = [&](const std::map<std::string, std::string>& answers,
                         const std::vector<QaRequest>& batch) {
      std::vector<QaRequest> again;
      for (const auto& req : batch) {
        const std::size_t i = index_of.at(req.record_id);
        const NarrativeRecord& r = records[i];
        const Scenario* s = find_scenario(scenarios, r.scenario_id);
        const auto it = answers.find(req.record_id);
        if (it == answers.end()) {
          again.push_back(req);
          continue;
        }
        try {
          const QAResponse parsed = parse_qa_response(it->second, s->subject_role, s->object_role);
          Attribution a = attribute_referents(r, parsed, g);
          per_record[i] = std::move(a.mentions);
          if (!a.unresolved.empty()) report.unresolved[r.id] = std::move(a.unresolved);
        } catch (const QaResponseError&) {
          again.push_back(req);
        }
      }
      return again;
    };
    auto retry = try_parse(qa->answer(requests), requests);
    report.qa_retried = retry.size();
    if (!retry.empty()) retry = try_parse(qa->answer(retry), retry);
    for (const auto& req : retry) {
      failed[index_of.at(req.record_id)] = true;
      report.qa_failed.push_back(req.record_id);
    }
    for (const auto& [id, dups] : duplicate_ids) {
      for (std::size_t i : dups) {
        failed[i] = failed[index_of.at(id)];
        per_record[i] = per_record[index_of.at(id)];
      }
    }
  }

  std::map<std::string, std::vector<CueMention>> by_record;
  std::map<std::string, CountryCode> homes;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (failed[i]) continue;
    by_record[records[i].id];
    homes[records[i].id] = records[i].input_country;
    for (auto& m : per_record[i]) {
      by_record[records[i].id].push_back(m);
      result.mentions.push_back(std::move(m));
    }
  }
  report.character_stories = filter_character_stories(by_record, homes).character_stories.size();
  return result;
}

Json to_json(const ExtractionReport& report) {
  Json unresolved = Json::object();
  for (const auto& [id, strings] : report.unresolved) unresolved[id] = strings;
  return Json{{"records", report.records},
              {"prefiltered", report.prefiltered},
              {"prefiltered_neutral", report.prefiltered_neutral},
              {"prefiltered_laden", report.prefiltered_laden},
              {"qa_requests", report.qa_requests},
              {"qa_retried", report.qa_retried},
              {"qa_failed", report.qa_failed},
              {"character_stories", report.character_stories},
              {"unresolved", unresolved}};
}

}  // namespace naudit
