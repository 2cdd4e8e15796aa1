#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "narrative_audit/corpus.hpp"
#include "narrative_audit/gazetteer.hpp"

namespace naudit {

using Stopwords = std::set<std::string>;

// One lowercase word per line; '#' starts a comment.
Stopwords load_stopwords(const std::filesystem::path& path);

// Lowercased word n-grams (tokens joined by a space) after stopword removal.
// Tokens that belong to a gazetteer surface in the original text, or resolve
// on their own, exclude every n-gram that contains them.
std::vector<std::string> tokenize_and_ngrams(std::string_view text, int n,
                                             const Stopwords& stopwords, const Gazetteer& g);

enum class CorpusLabel { Majority, Minority };
std::string_view to_string(CorpusLabel l);
CorpusLabel parse_corpus_label(std::string_view s);

struct CorpusDoc {
  CorpusLabel label = CorpusLabel::Majority;
  std::map<std::string, double> ngram_counts;
  double total_ngrams = 0.0;

  void add(const std::vector<std::string>& ngrams);
};

// tf(t, d) * (ln((1 + |D|) / (1 + df(t))) + 1), tf = count / total_ngrams.
double tfidf_score(const std::string& term, const CorpusDoc& doc,
                   const std::vector<const CorpusDoc*>& corpus);

struct ContrastRow {
  std::string ngram;
  double score_majority = 0.0;  // score in a
  double score_minority = 0.0;  // score in b
  double relative_diff = 0.0;   // (a - b) / (a + b)
};

struct ContrastResult {
  std::vector<ContrastRow> side_a;  // relative_diff > 0, most distinctive first
  std::vector<ContrastRow> side_b;  // relative_diff < 0
};

// Ranked by |relative_diff|, then by the larger score, then lexicographically.
ContrastResult contrast_rank(const CorpusDoc& a, const CorpusDoc& b, std::size_t top_k);

// Country code -> corpus label overrides; CSV rows "code,Majority|Minority".
std::map<CountryCode, CorpusLabel> load_group_file(const std::filesystem::path& path);

struct ContrastOptions {
  std::vector<int> ngram_orders{1, 2, 3};
  std::size_t top_k = 10;
  std::map<CountryCode, CorpusLabel> group_override;
};

struct OrderContrast {
  int n = 1;
  CorpusDoc majority;
  CorpusDoc minority;
  ContrastResult result;
};

// Splits records by their input country's group and contrasts each n-order.
std::vector<OrderContrast> contrast_corpus(const std::vector<NarrativeRecord>& records,
                                           const Gazetteer& g, const Stopwords& stopwords,
                                           const ContrastOptions& opt);

// Columns: n, side, rank, ngram, score_majority, score_minority, relative_diff.
std::string contrast_csv(const std::vector<OrderContrast>& contrasts);

}  // namespace naudit
