#include "narrative_audit/corpus_contrast.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "narrative_audit/cue_extraction.hpp"
#include "narrative_audit/error.hpp"
#include "narrative_audit/text.hpp"

namespace naudit {

Stopwords load_stopwords(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  Stopwords words;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = text::trim(line);
    if (!line.empty()) words.insert(text::normalize(line));
  }
  return words;
}

std::vector<std::string> tokenize_and_ngrams(std::string_view text, int n,
                                             const Stopwords& stopwords, const Gazetteer& g) {
  if (n < 1) throw ValidationError("n-gram order must be positive");
  const auto tokens = text::tokenize(text);
  const auto hits = find_surfaces(text, g);

  struct Kept {
    const std::string* norm;
    bool blocked;
  };
  std::vector<Kept> kept;
  std::size_t h = 0;
  for (const auto& t : tokens) {
    while (h < hits.size() && hits[h].span.end <= t.begin) ++h;
    const bool in_surface = h < hits.size() && hits[h].span.begin < t.end;
    if (stopwords.count(t.norm) != 0) continue;
    const bool resolves = g.lookup_key(t.norm) != nullptr;
    kept.push_back({&t.norm, in_surface || resolves});
  }

  std::vector<std::string> out;
  const auto order = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + order <= kept.size(); ++i) {
    bool blocked = false;
    std::string gram;
    for (std::size_t k = i; k < i + order; ++k) {
      blocked = blocked || kept[k].blocked;
      if (k > i) gram += ' ';
      gram += *kept[k].norm;
    }
    if (!blocked) out.push_back(std::move(gram));
  }
  return out;
}

std::string_view to_string(CorpusLabel l) {
  return l == CorpusLabel::Majority ? "Majority" : "Minority";
}

CorpusLabel parse_corpus_label(std::string_view s) {
  const std::string v = text::normalize(text::trim(s));
  if (v == "majority") return CorpusLabel::Majority;
  if (v == "minority") return CorpusLabel::Minority;
  throw ValidationError("unknown corpus group '" + std::string(s) + "' (Majority|Minority)");
}

void CorpusDoc::add(const std::vector<std::string>& ngrams) {
  for (const auto& g : ngrams) ngram_counts[g] += 1.0;
  total_ngrams += static_cast<double>(ngrams.size());
}

double tfidf_score(const std::string& term, const CorpusDoc& doc,
                   const std::vector<const CorpusDoc*>& corpus) {
  if (corpus.empty()) throw ValidationError("tf-idf needs a non-empty collection");
  const auto it = doc.ngram_counts.find(term);
  if (it == doc.ngram_counts.end() || doc.total_ngrams <= 0.0) return 0.0;
  std::size_t df = 0;
  for (const CorpusDoc* d : corpus) {
    const auto jt = d->ngram_counts.find(term);
    if (jt != d->ngram_counts.end() && jt->second > 0.0) ++df;
  }
  const double tf = it->second / doc.total_ngrams;
  const double idf = std::log((1.0 + static_cast<double>(corpus.size())) /
                              (1.0 + static_cast<double>(df))) + 1.0;
  return tf * idf;
}

ContrastResult contrast_rank(const CorpusDoc& a, const CorpusDoc& b, std::size_t top_k) {
  const std::vector<const CorpusDoc*> corpus{&a, &b};
  std::set<std::string> vocab;
  for (const auto& [t, c] : a.ngram_counts) vocab.insert(t);
  for (const auto& [t, c] : b.ngram_counts) vocab.insert(t);

  ContrastResult r;
  for (const auto& t : vocab) {
    const double sa = tfidf_score(t, a, corpus);
    const double sb = tfidf_score(t, b, corpus);
    if (sa + sb <= 0.0) continue;
    const ContrastRow row{t, sa, sb, (sa - sb) / (sa + sb)};
    if (row.relative_diff > 0.0) {
      r.side_a.push_back(row);
    } else if (row.relative_diff < 0.0) {
      r.side_b.push_back(row);
    }
  }
  auto order = [](const ContrastRow& x, const ContrastRow& y) {
    const double ax = std::abs(x.relative_diff), ay = std::abs(y.relative_diff);
    if (ax != ay) return ax > ay;
    const double mx = std::max(x.score_majority, x.score_minority);
    const double my = std::max(y.score_majority, y.score_minority);
    if (mx != my) return mx > my;
    return x.ngram < y.ngram;
  };
  for (auto* side : {&r.side_a, &r.side_b}) {
    std::sort(side->begin(), side->end(), order);
    if (side->size() > top_k) side->resize(top_k);
  }
  return r;
}

std::map<CountryCode, CorpusLabel> load_group_file(const std::filesystem::path& path) {
  std::map<CountryCode, CorpusLabel> out;
  const auto rows = parse_csv(read_text_file(path));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i].fields;
    if (row.empty() || (row.size() == 1 && text::trim(row[0]).empty())) continue;
    if (i == 0 && row.size() >= 2 && text::normalize(row[0]) == "code") continue;
    if (row.size() != 2) {
      throw ValidationError(path.string() + ":" + std::to_string(rows[i].line) +
                            ": expected 'code,Majority|Minority'");
    }
    out[text::trim(row[0])] = parse_corpus_label(row[1]);
  }
  return out;
}

std::vector<OrderContrast> contrast_corpus(const std::vector<NarrativeRecord>& records,
                                           const Gazetteer& g, const Stopwords& stopwords,
                                           const ContrastOptions& opt) {
  if (opt.ngram_orders.empty()) throw ValidationError("at least one n-gram order is required");
  for (const auto& [code, label] : opt.group_override) {
    if (g.find(code) == nullptr) throw ValidationError("group file names unknown country " + code);
  }
  std::vector<OrderContrast> out;
  for (int n : opt.ngram_orders) {
    OrderContrast oc;
    oc.n = n;
    oc.majority.label = CorpusLabel::Majority;
    oc.minority.label = CorpusLabel::Minority;
    out.push_back(std::move(oc));
  }
  for (const auto& r : records) {
    CorpusLabel label;
    if (const auto it = opt.group_override.find(r.input_country); it != opt.group_override.end()) {
      label = it->second;
    } else {
      if (g.find(r.input_country) == nullptr) {
        throw ValidationError("record " + r.id + " has unknown input country " + r.input_country);
      }
      label = g.is_global_majority(r.input_country) ? CorpusLabel::Majority : CorpusLabel::Minority;
    }
    for (auto& oc : out) {
      auto grams = tokenize_and_ngrams(r.story_text, oc.n, stopwords, g);
      (label == CorpusLabel::Majority ? oc.majority : oc.minority).add(grams);
    }
  }
  for (auto& oc : out) oc.result = contrast_rank(oc.majority, oc.minority, opt.top_k);
  return out;
}

std::string contrast_csv(const std::vector<OrderContrast>& contrasts) {
  std::ostringstream os;
  os << "n,side,rank,ngram,score_majority,score_minority,relative_diff\n";
  for (const auto& oc : contrasts) {
    for (const auto& [side, rows] : {std::pair{"Majority", &oc.result.side_a},
                                     std::pair{"Minority", &oc.result.side_b}}) {
      for (std::size_t i = 0; i < rows->size(); ++i) {
        const auto& row = (*rows)[i];
        os << oc.n << ',' << side << ',' << (i + 1) << ',' << csv_escape(row.ngram) << ','
           << format_fixed(row.score_majority, 8) << ',' << format_fixed(row.score_minority, 8)
           << ',' << format_fixed(row.relative_diff, 6) << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace naudit
