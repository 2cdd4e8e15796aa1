#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "narrative_audit/corpus.hpp"
#include "narrative_audit/error.hpp"
#include "narrative_audit/gazetteer.hpp"
#include "narrative_audit/generation_client.hpp"
#include "narrative_audit/prompt_forge.hpp"

namespace naudit {

enum class Referent { Subject, Object, Both, NonCharacter };
enum class ExtractionMethod { StringMatch, QA };

std::string_view to_string(Referent r);
std::string_view to_string(ExtractionMethod m);
Referent parse_referent(std::string_view s);
ExtractionMethod parse_method(std::string_view s);

inline bool is_character(Referent r) { return r != Referent::NonCharacter; }

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct CueMention {
  std::string record_id;
  std::string surface;
  // Byte offsets into the story. Absent only for QA strings that resolve in
  // the gazetteer but have no surface occurrence in the story text.
  std::optional<Span> span;
  std::vector<CountryCode> countries;  // sorted, non-empty
  Referent referent = Referent::Object;
  ExtractionMethod method = ExtractionMethod::StringMatch;

  bool operator==(const CueMention&) const = default;
};

Json to_json(const CueMention& m);
CueMention mention_from_json(const Json& j);
std::vector<CueMention> read_mentions(const std::filesystem::path& path);

// Every gazetteer surface occurring in `text`, longest match first, left to
// right. Hyphenated compounds that are not themselves indexed resolve per
// component ("Vietnamese-American" -> two hits).
struct SurfaceHit {
  Span span;
  std::string surface;
  std::vector<CountryCode> candidates;
};
std::vector<SurfaceHit> find_surfaces(std::string_view text, const Gazetteer& g);

// Naive baseline: mentions resolving to `home_country` go to the subject,
// everything else to the object.
std::vector<CueMention> string_match_scan(const NarrativeRecord& r, const Gazetteer& g,
                                          std::string_view home_country);

// The question-answering extraction prompt with roles, story prompt and story
// substituted literally.
std::string build_qa_prompt(std::string_view subject_role, std::string_view object_role,
                            std::string_view story_prompt, std::string_view story);

struct QAResponse {
  std::vector<std::string> subject_countries;
  std::vector<std::string> object_countries;
};

class QaResponseError : public RuntimeFailure {
 public:
  enum class Kind { Malformed, Schema };
  QaResponseError(Kind kind, const std::string& what, std::string raw)
      : RuntimeFailure(what), kind_(kind), raw_(std::move(raw)) {}
  Kind kind() const noexcept { return kind_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  Kind kind_;
  std::string raw_;
};

// Parses the two-array answer object. Keys are matched by role when roles are
// given; otherwise the two "country of origin for the ..." keys are taken in
// document order. Code fences and trailing commas are tolerated.
QAResponse parse_qa_response(std::string_view raw);
QAResponse parse_qa_response(std::string_view raw, std::string_view subject_role,
                             std::string_view object_role);

struct Attribution {
  std::vector<CueMention> mentions;
  std::vector<std::string> unresolved;  // QA strings with no gazetteer entry
};

Attribution attribute_referents(const NarrativeRecord& r, const QAResponse& qa,
                                const Gazetteer& g);

struct StoryPartition {
  std::vector<std::string> character_stories;
  std::vector<std::string> non_character_stories;
};

// A record is a character story iff it has a Subject/Object/Both mention with
// a candidate outside the home country.
StoryPartition filter_character_stories(
    const std::map<std::string, std::vector<CueMention>>& mentions_by_record,
    const std::map<std::string, CountryCode>& home_by_record);
StoryPartition filter_character_stories(
    const std::map<std::string, std::vector<CueMention>>& mentions_by_record,
    std::string_view home_country);

bool mentions_non_home(const CueMention& m, std::string_view home_country);

// Source of raw QA answers, keyed by record id.
struct QaRequest {
  std::string record_id;
  std::string prompt;
};

class QaExtractor {
 public:
  virtual ~QaExtractor() = default;
  // Returns raw answers for the requests it could serve; missing ids count
  // as failures.
  virtual std::map<std::string, std::string> answer(const std::vector<QaRequest>& requests) = 0;
};

// Calls a chat-completion endpoint through the rate-limited worker pool.
class HttpQaExtractor : public QaExtractor {
 public:
  explicit HttpQaExtractor(ClientConfig cfg);
  std::map<std::string, std::string> answer(const std::vector<QaRequest>& requests) override;

 private:
  ChatCompletionPool pool_;
};

// Serves recorded answers from JSONL rows {record_id, response}.
class ReplayQaExtractor : public QaExtractor {
 public:
  explicit ReplayQaExtractor(const std::filesystem::path& path);
  explicit ReplayQaExtractor(std::map<std::string, std::string> answers);
  std::map<std::string, std::string> answer(const std::vector<QaRequest>& requests) override;

 private:
  std::map<std::string, std::string> answers_;
};

enum class QaScope { Prefiltered, All };

struct ExtractionReport {
  std::size_t records = 0;
  std::size_t prefiltered = 0;
  std::size_t prefiltered_neutral = 0;
  std::size_t prefiltered_laden = 0;
  std::size_t qa_requests = 0;
  std::size_t qa_retried = 0;
  std::vector<std::string> qa_failed;  // excluded from analytics
  std::size_t character_stories = 0;
  std::map<std::string, std::vector<std::string>> unresolved;  // record -> strings
};

struct ExtractionResult {
  std::vector<CueMention> mentions;
  ExtractionReport report;
};

// Two-stage extraction. Records whose string-match scan finds a non-home
// surface are prefiltered and sent to `qa` (retried once when the answer does
// not parse; still-failing records are excluded and listed). Other records keep
// their string-match mentions. With qa == nullptr every record uses the
// string-match baseline.
ExtractionResult extract_corpus(const std::vector<NarrativeRecord>& records,
                                const std::vector<Scenario>& scenarios, const Gazetteer& g,
                                QaExtractor* qa, QaScope scope = QaScope::Prefiltered);

Json to_json(const ExtractionReport& report);

}  // namespace naudit
