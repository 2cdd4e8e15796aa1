#include "narrative_audit/gazetteer.hpp"

#include <algorithm>

#include "narrative_audit/error.hpp"
#include "narrative_audit/jsonl.hpp"
#include "narrative_audit/text.hpp"

namespace naudit {
namespace {

constexpr const char* kSchema = "narrative-audit/gazetteer";

std::vector<std::string> string_list(const Json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) return {};
  const auto& v = obj.at(key);
  if (!v.is_array()) {
    throw ValidationError("gazetteer line " + std::to_string(line) + ": '" + key +
                          "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) {
      throw ValidationError("gazetteer line " + std::to_string(line) + ": '" + key +
                            "' must hold strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

Country parse_country(const Json& obj, std::size_t line) {
  const auto where = "gazetteer line " + std::to_string(line);
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const char* key : {"code", "canonical_name"}) {
    if (!obj.contains(key) || !obj.at(key).is_string() ||
        obj.at(key).get<std::string>().empty()) {
      throw ValidationError(where + ": missing or empty '" + key + "'");
    }
  }
  if (!obj.contains("global_majority") || !obj.at("global_majority").is_boolean()) {
    throw ValidationError(where + ": 'global_majority' must be a boolean");
  }
  Country c;
  c.code = obj.at("code").get<std::string>();
  c.canonical_name = obj.at("canonical_name").get<std::string>();
  c.name_aliases = string_list(obj, "name_aliases", line);
  c.demonyms = string_list(obj, "demonyms", line);
  c.global_majority = obj.at("global_majority").get<bool>();
  if (obj.contains("name_article") && obj.at("name_article").is_string()) {
    c.name_article = obj.at("name_article").get<std::string>();
  }
  if (obj.contains("notes") && obj.at("notes").is_string()) {
    c.notes = obj.at("notes").get<std::string>();
  }
  return c;
}

}  // namespace

Gazetteer Gazetteer::from_countries(std::vector<Country> countries) {
  Gazetteer g;
  g.countries_ = std::move(countries);
  for (std::size_t i = 0; i < g.countries_.size(); ++i) {
    const Country& c = g.countries_[i];
    if (c.demonyms.empty()) {
      throw ValidationError("country " + c.code + " has no demonyms");
    }
    if (!g.by_code_.emplace(c.code, i).second) {
      throw ValidationError("duplicate country code " + c.code);
    }
  }
  std::set<std::string> names;
  for (const Country& c : g.countries_) {
    if (!names.insert(c.canonical_name).second) {
      throw ValidationError("duplicate canonical name " + c.canonical_name);
    }
  }

  auto index = [&g](const std::string& surface, const CountryCode& code, bool demonym) {
    const std::string key = text::surface_key(surface);
    if (key.empty()) return;
    auto& codes = g.surface_index_[key];
    if (std::find(codes.begin(), codes.end(), code) == codes.end()) codes.push_back(code);
    if (demonym) g.demonym_keys_.insert(key);
    const auto tokens = static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
    g.max_tokens_ = std::max(g.max_tokens_, tokens);
  };
  for (const Country& c : g.countries_) {
    index(c.canonical_name, c.code, false);
    for (const auto& a : c.name_aliases) index(a, c.code, false);
    for (const auto& d : c.demonyms) index(d, c.code, true);
  }
  for (auto& [key, codes] : g.surface_index_) std::sort(codes.begin(), codes.end());
  return g;
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("gazetteer file not found: " + path.string());
  }
  const auto rows = read_jsonl(path);
  if (rows.empty()) throw ValidationError("gazetteer file is empty: " + path.string());
  const Json& header = rows.front().value;
  if (!header.is_object() || header.value("schema", "") != kSchema ||
      !header.contains("count") || !header.at("count").is_number_unsigned()) {
    throw ValidationError("gazetteer header must declare schema '" + std::string(kSchema) +
                          "' and a count");
  }
  std::vector<Country> countries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    countries.push_back(parse_country(rows[i].value, rows[i].line));
  }
  const auto declared = header.at("count").get<std::size_t>();
  if (declared != countries.size()) {
    throw ValidationError("gazetteer declares " + std::to_string(declared) +
                          " countries but holds " + std::to_string(countries.size()));
  }
  return from_countries(std::move(countries));
}

const Country* Gazetteer::find(std::string_view code) const {
  const auto it = by_code_.find(std::string(code));
  return it == by_code_.end() ? nullptr : &countries_[it->second];
}

const Country& Gazetteer::at(std::string_view code) const {
  const Country* c = find(code);
  if (c == nullptr) throw ValidationError("unknown country code " + std::string(code));
  return *c;
}

const std::vector<CountryCode>* Gazetteer::lookup_key(const std::string& key) const {
  if (auto it = surface_index_.find(key); it != surface_index_.end()) return &it->second;
  // Plural demonyms ("Nigerians", "Filipinos").
  if (key.size() > 1 && key.back() == 's') {
    const std::string singular = key.substr(0, key.size() - 1);
    if (demonym_keys_.count(singular) != 0) return &surface_index_.at(singular);
  }
  return nullptr;
}

std::optional<SurfaceMatch> Gazetteer::resolve(std::string_view surface) const {
  const auto* codes = lookup_key(text::surface_key(surface));
  if (codes == nullptr) return std::nullopt;
  return SurfaceMatch{std::string(surface), *codes, codes->size() > 1};
}

bool Gazetteer::is_global_majority(std::string_view code) const {
  return at(code).global_majority;
}

std::string Gazetteer::to_jsonl() const {
  std::string out =
      Json{{"schema", kSchema}, {"version", 1}, {"count", countries_.size()}}.dump() + "\n";
  for (const Country& c : countries_) {
    Json row{{"code", c.code},
             {"canonical_name", c.canonical_name},
             {"name_aliases", c.name_aliases},
             {"demonyms", c.demonyms},
             {"global_majority", c.global_majority}};
    if (!c.name_article.empty()) row["name_article"] = c.name_article;
    row["notes"] = c.notes ? Json(*c.notes) : Json(nullptr);
    out += row.dump() + "\n";
  }
  return out;
}

Gazetteer load_gazetteer(const std::filesystem::path& path) { return Gazetteer::load(path); }

std::optional<SurfaceMatch> resolve_surface(const Gazetteer& g, std::string_view surface) {
  return g.resolve(surface);
}

bool is_global_majority(const Gazetteer& g, std::string_view code) {
  return g.is_global_majority(code);
}

}  // namespace naudit
