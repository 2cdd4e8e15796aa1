#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace naudit {

// ISO 3166-1 alpha-3 code.
using CountryCode = std::string;

struct Country {
  CountryCode code;
  std::string canonical_name;
  std::vector<std::string> name_aliases;
  std::vector<std::string> demonyms;
  bool global_majority = false;
  // "the" for names that take a definite article ("from the United States").
  std::string name_article;
  std::optional<std::string> notes;
};

struct SurfaceMatch {
  std::string surface;
  std::vector<CountryCode> candidates;  // sorted, non-empty
  bool ambiguous = false;               // candidates.size() > 1
};

// Immutable registry of recognized nations and the surface forms that name them.
class Gazetteer {
 public:
  static Gazetteer load(const std::filesystem::path& path);
  static Gazetteer from_countries(std::vector<Country> countries);

  const std::vector<Country>& countries() const { return countries_; }
  std::size_t size() const { return countries_.size(); }

  const Country* find(std::string_view code) const;
  // Throws ValidationError for unknown codes.
  const Country& at(std::string_view code) const;

  std::optional<SurfaceMatch> resolve(std::string_view surface) const;
  // Lookup by an already-normalized token key (see text::surface_key).
  const std::vector<CountryCode>* lookup_key(const std::string& key) const;

  bool is_global_majority(std::string_view code) const;

  // Largest number of tokens in any indexed surface.
  std::size_t max_surface_tokens() const { return max_tokens_; }
  const std::map<std::string, std::vector<CountryCode>>& surface_index() const {
    return surface_index_;
  }

  std::string to_jsonl() const;

 private:
  std::vector<Country> countries_;
  std::unordered_map<std::string, std::size_t> by_code_;
  std::map<std::string, std::vector<CountryCode>> surface_index_;
  std::set<std::string> demonym_keys_;
  std::size_t max_tokens_ = 0;
};

Gazetteer load_gazetteer(const std::filesystem::path& path);
std::optional<SurfaceMatch> resolve_surface(const Gazetteer& g, std::string_view surface);
bool is_global_majority(const Gazetteer& g, std::string_view code);

}  // namespace naudit
