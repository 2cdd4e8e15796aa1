#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "narrative_audit/corpus.hpp"
#include "narrative_audit/cue_extraction.hpp"
#include "narrative_audit/prompt_forge.hpp"

namespace naudit {

enum class SlotPosition { Neutral, Dominant, Subordinated };
std::string_view to_string(SlotPosition p);

struct CharacterSlot {
  std::string scenario_id;
  SlotPosition position = SlotPosition::Neutral;
};

// Position-major slot layout: all neutral slots in scenario order, then all
// dominant, then all subordinated. 3 x |scenarios| slots.
std::vector<CharacterSlot> character_slots(const std::vector<Scenario>& scenarios);
std::string slot_label(const CharacterSlot& s);

// Per-record metadata the analytics need from the corpus.
struct RecordMeta {
  std::string scenario_id;
  PowerCondition power_condition = PowerCondition::Laden;
  CountryCode input_country;
};
using RecordIndex = std::map<std::string, RecordMeta>;
RecordIndex index_records(const std::vector<NarrativeRecord>& records);

enum class AmbiguityMode { Split, Drop };
AmbiguityMode parse_ambiguity_mode(std::string_view s);

struct CountryDistribution {
  CountryCode country;
  std::vector<double> counts;
  std::vector<double> probs;
  double total_refs = 0.0;
};

// Character mentions mapped onto slots. Each (record, candidate set, slot) is
// counted once; an ambiguous mention adds 1/k to each of its k candidates (or
// nothing under Drop). Both adds to both laden slots, or once to the neutral
// slot in a neutral story. Countries with total_refs < min_refs are left out.
std::vector<CountryDistribution> build_distributions(const std::vector<CueMention>& mentions,
                                                     const RecordIndex& records,
                                                     const std::vector<Scenario>& scenarios,
                                                     double min_refs,
                                                     AmbiguityMode mode = AmbiguityMode::Split);

// (1/sqrt 2) * || sqrt p - sqrt q ||_2. Inputs must be equal-length and sum
// to 1 within 1e-6.
double hellinger(const std::vector<double>& p, const std::vector<double>& q);

using DistanceMatrix = std::vector<std::vector<double>>;

DistanceMatrix hellinger_matrix(const std::vector<CountryDistribution>& dists);

// Throws ValidationError unless square, symmetric and zero on the diagonal.
void validate_distance_matrix(const DistanceMatrix& d);

struct TsneOptions {
  double perplexity = 3.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 4.0;
  int exaggeration_iterations = 100;
  int momentum_switch = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::uint64_t seed = 0;
  int kl_every = 50;
};

struct TsneResult {
  std::vector<std::array<double, 2>> points;
  // (iteration, KL(P || Q)) sampled every kl_every iterations, unexaggerated.
  std::vector<std::pair<int, double>> kl_trace;
};

// Exact t-SNE on precomputed distances. Affinities use squared distances.
TsneResult tsne_embed(const DistanceMatrix& d, const TsneOptions& opt = {});

enum class Linkage { Average, Single, Complete };
enum class CutMode { Absolute, RelativeToMax };
std::string_view to_string(Linkage l);
std::string_view to_string(CutMode m);
Linkage parse_linkage(std::string_view s);
CutMode parse_cut_mode(std::string_view s);

// One agglomeration step. Leaves are 0..n-1; the cluster formed at step k
// has id n + k.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct ClusterAssignment {
  std::vector<int> labels;  // per input index; ids start at 1, ordered by first member
  std::vector<Merge> merge_tree;
  double cut_height = 0.0;  // absolute height actually applied
  int cluster_count() const;
};

ClusterAssignment hac_cluster(const DistanceMatrix& d, double cut = 0.7,
                              Linkage linkage = Linkage::Average,
                              CutMode mode = CutMode::Absolute);

// Base-2 Shannon entropy of a non-negative weight vector (normalized first).
double entropy_bits(const std::vector<double>& weights);

// Entropy of each cluster's summed member counts. `dists` aligns with labels.
std::map<int, double> cluster_entropy(const ClusterAssignment& a,
                                      const std::vector<CountryDistribution>& dists);

struct RatioValue {
  double value = 0.0;
  bool defined = false;  // false when the denominator is zero
};
Json to_json(const RatioValue& r);

struct SubordinationReport {
  double dominant_refs = 0.0;
  double subordinated_refs = 0.0;
  double both_refs = 0.0;
  RatioValue ratio;  // subordinated / dominant
  double neutral_character_refs = 0.0;
  double neutral_non_character_refs = 0.0;
  RatioValue neutral_ratio;  // non-character / character
};

SubordinationReport subordination_from_counts(double dominant, double subordinated, double both,
                                              double neutral_character,
                                              double neutral_non_character);

// Laden stories: each non-home (record, candidate set) counts once, as
// dominant (Subject only), subordinated (Object only) or both. Neutral
// stories: a story counts as character when a non-home nationality is tied to
// a character, and as non-character when it only appears outside characters.
SubordinationReport subordination_stats(const std::vector<CueMention>& mentions,
                                        const RecordIndex& records, std::string_view home_country,
                                        AmbiguityMode mode = AmbiguityMode::Split);
Json to_json(const SubordinationReport& r);

struct ChoroplethRow {
  CountryCode code;
  double pct_dominant = 0.0;
  double pct_subordinated = 0.0;
};

// Share of non-home laden character references per position. A unit counted
// as both contributes to both columns.
std::vector<ChoroplethRow> choropleth_data(const std::vector<CueMention>& mentions,
                                           const RecordIndex& records,
                                           std::string_view home_country,
                                           AmbiguityMode mode = AmbiguityMode::Split);

// CSV exports.
std::string distance_matrix_csv(const std::vector<CountryDistribution>& dists,
                                const DistanceMatrix& d);
std::string tsne_csv(const std::vector<CountryDistribution>& dists, const TsneResult& t,
                     const ClusterAssignment& a);
std::string cluster_table_csv(const std::vector<CountryDistribution>& dists,
                              const ClusterAssignment& a,
                              const std::vector<CharacterSlot>& slots);
std::string choropleth_csv(const std::vector<ChoroplethRow>& rows);
std::string distributions_csv(const std::vector<CountryDistribution>& dists,
                              const std::vector<CharacterSlot>& slots);

}  // namespace naudit
