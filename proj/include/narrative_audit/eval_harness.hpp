#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "narrative_audit/cue_extraction.hpp"

namespace naudit {

enum class Role { Subject, Object };
std::string_view to_string(Role r);

struct GoldLabel {
  std::string record_id;
  std::vector<CountryCode> gold_subject;
  std::vector<CountryCode> gold_object;
};

// Throws ValidationError on duplicate record ids or malformed rows.
std::vector<GoldLabel> load_gold(const std::filesystem::path& path);
void check_unique(const std::vector<GoldLabel>& gold);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

// Precision and recall are 1 when their denominator is empty and nothing was
// missed (no predictions and no gold), 0 when the denominator is empty otherwise.
double precision(const Confusion& c);
double recall(const Confusion& c);
double f1_score(const Confusion& c);

// Matches predicted candidate sets against a gold multiset one-to-one.
// Unambiguous predictions are matched first; an ambiguous prediction matches
// any remaining gold country among its candidates.
Confusion match_role(const std::vector<std::vector<CountryCode>>& predicted,
                     std::vector<CountryCode> gold);

// Distinct candidate sets a record's mentions assign to `role`. Subject takes
// Subject and Both referents, Object takes Object and Both.
std::vector<std::vector<CountryCode>> role_predictions(const std::vector<CueMention>& mentions,
                                                       Role role);

struct RecordOutcome {
  std::string record_id;
  Confusion subject;
  Confusion object;
};

// One outcome per gold record, in gold order. Records without predictions
// count as empty predictions.
std::vector<RecordOutcome> per_record_outcomes(
    const std::map<std::string, std::vector<CueMention>>& predictions,
    const std::vector<GoldLabel>& gold);

double micro_f1(std::span<const Confusion> outcomes);

struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Percentile bootstrap over records; half the width of the central `level`
// interval of micro F1.
double bootstrap_ci(std::span<const Confusion> outcomes, const BootstrapOptions& opt);

struct MetricsReport {
  Role role = Role::Subject;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ci_half_width = 0.0;
  Confusion support;
};

std::pair<MetricsReport, MetricsReport> score_extraction(
    const std::map<std::string, std::vector<CueMention>>& predictions,
    const std::vector<GoldLabel>& gold, const BootstrapOptions& opt = {});

std::map<std::string, std::vector<CueMention>> group_by_record(
    const std::vector<CueMention>& mentions);

// Table with Precision / Recall / F1 column pairs split by subject and object.
std::string render_metrics_markdown(
    const std::vector<std::pair<std::string, std::pair<MetricsReport, MetricsReport>>>& rows,
    const BootstrapOptions& opt);
std::string render_metrics_csv(
    const std::vector<std::pair<std::string, std::pair<MetricsReport, MetricsReport>>>& rows);

}  // namespace naudit
