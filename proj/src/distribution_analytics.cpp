#include "narrative_audit/distribution_analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "narrative_audit/error.hpp"
#include "narrative_audit/text.hpp"

namespace naudit {
namespace {

constexpr double kSumTolerance = 1e-6;

std::string joined(const std::vector<CountryCode>& codes, char sep) {
  std::string out;
  for (const auto& c : codes) {
    if (!out.empty()) out += sep;
    out += c;
  }
  return out;
}

const RecordMeta& meta_for(const RecordIndex& records, const std::string& id) {
  const auto it = records.find(id);
  if (it == records.end()) throw ValidationError("mention references unknown record " + id);
  return it->second;
}

// Share of a mention's unit weight that falls outside the home country.
double non_home_weight(const std::vector<CountryCode>& candidates, std::string_view home,
                       AmbiguityMode mode) {
  if (mode == AmbiguityMode::Drop && candidates.size() > 1) return 0.0;
  const auto outside = std::count_if(candidates.begin(), candidates.end(),
                                     [&](const CountryCode& c) { return c != home; });
  return static_cast<double>(outside) / static_cast<double>(candidates.size());
}

struct UnitRoles {
  bool subject = false;
  bool object = false;
};

// Laden character units keyed by (record, candidate set).
std::map<std::pair<std::string, std::vector<CountryCode>>, UnitRoles> laden_units(
    const std::vector<CueMention>& mentions, const RecordIndex& records) {
  std::map<std::pair<std::string, std::vector<CountryCode>>, UnitRoles> units;
  for (const auto& m : mentions) {
    if (!is_character(m.referent)) continue;
    if (meta_for(records, m.record_id).power_condition != PowerCondition::Laden) continue;
    auto& u = units[{m.record_id, m.countries}];
    if (m.referent == Referent::Subject || m.referent == Referent::Both) u.subject = true;
    if (m.referent == Referent::Object || m.referent == Referent::Both) u.object = true;
  }
  return units;
}

// Uniform in [0, 1) from the top 53 bits; portable across standard libraries.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = unit_uniform(rng);
  } while (u1 <= 0.0);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Row-conditional Gaussian affinities whose entropy matches log(perplexity).
std::vector<double> conditional_affinities(const std::vector<double>& sq, std::size_t n,
                                           double perplexity) {
  std::vector<double> p(n * n, 0.0);
  const double target = std::log(perplexity);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-sq[i * n + j] * beta);
        sum += row[j];
        weighted += sq[i * n + j] * row[j];
      }
      if (sum <= 0.0) sum = std::numeric_limits<double>::min();
      const double h = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double diff = h - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
      }
    }
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j];
  }
  return p;
}

double kl_divergence(const std::vector<double>& p, const std::vector<std::array<double, 2>>& y) {
  const std::size_t n = y.size();
  double z = 0.0;
  std::vector<double> num(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
      z += num[i * n + j];
    }
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < n * n; ++k) {
    if (p[k] <= 0.0 || num[k] <= 0.0) continue;
    const double q = std::max(num[k] / z, 1e-12);
    kl += p[k] * std::log(p[k] / q);
  }
  return kl;
}

}  // namespace

std::string_view to_string(SlotPosition p) {
  switch (p) {
    case SlotPosition::Neutral: return "neutral";
    case SlotPosition::Dominant: return "dominant";
    case SlotPosition::Subordinated: return "subordinated";
  }
  return "neutral";
}

std::vector<CharacterSlot> character_slots(const std::vector<Scenario>& scenarios) {
  std::vector<CharacterSlot> slots;
  slots.reserve(scenarios.size() * 3);
  for (auto pos : {SlotPosition::Neutral, SlotPosition::Dominant, SlotPosition::Subordinated}) {
    for (const auto& s : scenarios) slots.push_back({s.id, pos});
  }
  return slots;
}

std::string slot_label(const CharacterSlot& s) {
  return s.scenario_id + "/" + std::string(to_string(s.position));
}

RecordIndex index_records(const std::vector<NarrativeRecord>& records) {
  RecordIndex idx;
  for (const auto& r : records) {
    idx.emplace(r.id, RecordMeta{r.scenario_id, r.power_condition, r.input_country});
  }
  return idx;
}

AmbiguityMode parse_ambiguity_mode(std::string_view s) {
  if (s == "split") return AmbiguityMode::Split;
  if (s == "drop") return AmbiguityMode::Drop;
  throw ValidationError("unknown ambiguity mode '" + std::string(s) + "' (split|drop)");
}

std::vector<CountryDistribution> build_distributions(const std::vector<CueMention>& mentions,
                                                     const RecordIndex& records,
                                                     const std::vector<Scenario>& scenarios,
                                                     double min_refs, AmbiguityMode mode) {
  std::map<std::string, std::size_t> scenario_pos;
  for (std::size_t i = 0; i < scenarios.size(); ++i) scenario_pos.emplace(scenarios[i].id, i);
  const std::size_t n = scenarios.size();
  const std::size_t width = 3 * n;

  std::set<std::tuple<std::string, std::vector<CountryCode>, std::size_t>> seen;
  std::map<CountryCode, std::vector<double>> counts;
  for (const auto& m : mentions) {
    if (!is_character(m.referent)) continue;
    const RecordMeta& meta = meta_for(records, m.record_id);
    const auto sit = scenario_pos.find(meta.scenario_id);
    if (sit == scenario_pos.end()) {
      throw ValidationError("mention in record " + m.record_id + " references unknown scenario " +
                            meta.scenario_id);
    }
    std::vector<std::size_t> slots;
    if (meta.power_condition == PowerCondition::Neutral) {
      slots.push_back(sit->second);
    } else {
      if (m.referent == Referent::Subject || m.referent == Referent::Both) slots.push_back(n + sit->second);
      if (m.referent == Referent::Object || m.referent == Referent::Both) slots.push_back(2 * n + sit->second);
    }
    if (mode == AmbiguityMode::Drop && m.countries.size() > 1) continue;
    const double w = 1.0 / static_cast<double>(m.countries.size());
    for (std::size_t slot : slots) {
      if (!seen.emplace(m.record_id, m.countries, slot).second) continue;
      for (const auto& c : m.countries) {
        auto& v = counts[c];
        if (v.empty()) v.assign(width, 0.0);
        v[slot] += w;
      }
    }
  }

  std::vector<CountryDistribution> out;
  for (auto& [code, v] : counts) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total <= 0.0 || total < min_refs) continue;
    CountryDistribution d;
    d.country = code;
    d.total_refs = total;
    d.probs.resize(width);
    for (std::size_t i = 0; i < width; ++i) d.probs[i] = v[i] / total;
    d.counts = std::move(v);
    out.push_back(std::move(d));
  }
  return out;
}

double hellinger(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ValidationError("hellinger: length mismatch");
  if (p.empty()) throw ValidationError("hellinger: empty vectors");
  double sp = 0.0, sq = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw ValidationError("hellinger: negative probability");
    sp += p[i];
    sq += q[i];
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    acc += d * d;
  }
  if (std::abs(sp - 1.0) > kSumTolerance || std::abs(sq - 1.0) > kSumTolerance) {
    throw ValidationError("hellinger: inputs must sum to 1");
  }
  return std::clamp(std::sqrt(acc) / std::sqrt(2.0), 0.0, 1.0);
}

DistanceMatrix hellinger_matrix(const std::vector<CountryDistribution>& dists) {
  const std::size_t n = dists.size();
  DistanceMatrix d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i][j] = d[j][i] = hellinger(dists[i].probs, dists[j].probs);
    }
  }
  return d;
}

void validate_distance_matrix(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i].size() != n) throw ValidationError("distance matrix is not square");
    if (d[i][i] != 0.0) throw ValidationError("distance matrix diagonal must be zero");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!std::isfinite(d[i][j]) || d[i][j] < 0.0) {
        throw ValidationError("distance matrix entries must be finite and non-negative");
      }
      if (std::abs(d[i][j] - d[j][i]) > 1e-12) throw ValidationError("distance matrix is not symmetric");
    }
  }
}

TsneResult tsne_embed(const DistanceMatrix& d, const TsneOptions& opt) {
  validate_distance_matrix(d);
  const std::size_t n = d.size();
  if (n < 2) throw ValidationError("t-SNE needs at least 2 points");
  if (!(opt.perplexity > 0.0) || opt.perplexity >= static_cast<double>(n - 1)) {
    throw ValidationError("t-SNE perplexity must lie in (0, n - 1); n = " + std::to_string(n));
  }
  if (opt.iterations < 1 || opt.learning_rate <= 0.0 || opt.kl_every < 1) {
    throw ValidationError("t-SNE iterations, learning rate and KL interval must be positive");
  }

  std::vector<double> sq(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sq[i * n + j] = d[i][j] * d[i][j];
  }
  const auto cond = conditional_affinities(sq, n, opt.perplexity);
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p[i * n + j] = std::max((cond[i * n + j] + cond[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
    }
  }

  std::mt19937_64 rng(opt.seed);
  std::vector<std::array<double, 2>> y(n);
  for (auto& pt : y) {
    pt[0] = 1e-4 * standard_normal(rng);
    pt[1] = 1e-4 * standard_normal(rng);
  }
  std::vector<std::array<double, 2>> update(n, {0.0, 0.0});
  std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
  std::vector<double> num(n * n, 0.0);
  TsneResult result;

  for (int it = 0; it < opt.iterations; ++it) {
    const double exaggeration = it < opt.exaggeration_iterations ? opt.early_exaggeration : 1.0;
    const double momentum = it < opt.momentum_switch ? opt.initial_momentum : opt.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0];
        const double dy = y[i][1] - y[j][1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = v;
        z += 2.0 * v;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 2> grad{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num[i * n + j] / z, 1e-12);
        const double mult = 4.0 * (exaggeration * p[i * n + j] - q) * num[i * n + j];
        grad[0] += mult * (y[i][0] - y[j][0]);
        grad[1] += mult * (y[i][1] - y[j][1]);
      }
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad[k] > 0.0) == (update[i][k] > 0.0);
        gains[i][k] = same_sign ? gains[i][k] * 0.8 : gains[i][k] + 0.2;
        gains[i][k] = std::max(gains[i][k], 0.01);
        update[i][k] = momentum * update[i][k] - opt.learning_rate * gains[i][k] * grad[k];
      }
    }
    std::array<double, 2> mean{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      y[i][0] += update[i][0];
      y[i][1] += update[i][1];
      mean[0] += y[i][0];
      mean[1] += y[i][1];
    }
    for (auto& pt : y) {
      pt[0] -= mean[0] / static_cast<double>(n);
      pt[1] -= mean[1] / static_cast<double>(n);
    }
    if ((it + 1) % opt.kl_every == 0) result.kl_trace.emplace_back(it + 1, kl_divergence(p, y));
  }
  result.points = std::move(y);
  return result;
}

std::string_view to_string(Linkage l) {
  switch (l) {
    case Linkage::Average: return "average";
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
  }
  return "average";
}

std::string_view to_string(CutMode m) {
  return m == CutMode::Absolute ? "absolute" : "relative-to-max";
}

Linkage parse_linkage(std::string_view s) {
  if (s == "average") return Linkage::Average;
  if (s == "single") return Linkage::Single;
  if (s == "complete") return Linkage::Complete;
  throw ValidationError("unknown linkage '" + std::string(s) + "' (average|single|complete)");
}

CutMode parse_cut_mode(std::string_view s) {
  if (s == "absolute") return CutMode::Absolute;
  if (s == "relative-to-max") return CutMode::RelativeToMax;
  throw ValidationError("unknown cut mode '" + std::string(s) + "' (absolute|relative-to-max)");
}

int ClusterAssignment::cluster_count() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

ClusterAssignment hac_cluster(const DistanceMatrix& d, double cut, Linkage linkage, CutMode mode) {
  if (d.empty()) throw ValidationError("cannot cluster an empty distance matrix");
  validate_distance_matrix(d);
  if (cut < 0.0 || !std::isfinite(cut)) throw ValidationError("cut threshold must be non-negative");
  const std::size_t n = d.size();

  DistanceMatrix work = d;
  std::vector<std::size_t> id(n), size(n, 1);
  std::vector<bool> active(n, true);
  std::iota(id.begin(), id.end(), 0);
  ClusterAssignment a;

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && work[i][j] < best) {
          best = work[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      double v = 0.0;
      switch (linkage) {
        case Linkage::Average:
          v = (static_cast<double>(size[bi]) * work[bi][k] + static_cast<double>(size[bj]) * work[bj][k]) /
              static_cast<double>(size[bi] + size[bj]);
          break;
        case Linkage::Single: v = std::min(work[bi][k], work[bj][k]); break;
        case Linkage::Complete: v = std::max(work[bi][k], work[bj][k]); break;
      }
      work[bi][k] = work[k][bi] = v;
    }
    a.merge_tree.push_back({std::min(id[bi], id[bj]), std::max(id[bi], id[bj]), best,
                            size[bi] + size[bj]});
    size[bi] += size[bj];
    id[bi] = n + step;
    active[bj] = false;
  }

  const double max_height = a.merge_tree.empty() ? 0.0 : a.merge_tree.back().height;
  a.cut_height = mode == CutMode::Absolute ? cut : cut * max_height;

  // Union every merge at or below the cut; heights are monotone for these
  // linkages so this equals thresholding cophenetic distance.
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < a.merge_tree.size(); ++k) {
    const Merge& m = a.merge_tree[k];
    if (m.height > a.cut_height + 1e-12) continue;
    parent[find(m.left)] = n + k;
    parent[find(m.right)] = n + k;
  }
  std::map<std::size_t, int> root_label;
  a.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    auto [it, inserted] = root_label.emplace(r, static_cast<int>(root_label.size()) + 1);
    a.labels[i] = it->second;
  }
  return a;
}

double entropy_bits(const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("entropy of an empty distribution");
  double h = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ValidationError("entropy weights must be non-negative");
    if (w == 0.0) continue;
    const double p = w / total;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

std::map<int, double> cluster_entropy(const ClusterAssignment& a,
                                      const std::vector<CountryDistribution>& dists) {
  if (a.labels.size() != dists.size()) {
    throw ValidationError("cluster labels and distributions differ in length");
  }
  std::map<int, std::vector<double>> sums;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    auto& s = sums[a.labels[i]];
    if (s.empty()) s.assign(dists[i].counts.size(), 0.0);
    if (s.size() != dists[i].counts.size()) throw ValidationError("distribution widths differ");
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += dists[i].counts[k];
  }
  std::map<int, double> out;
  for (const auto& [label, s] : sums) {
    if (std::accumulate(s.begin(), s.end(), 0.0) <= 0.0) {
      throw ValidationError("cluster " + std::to_string(label) + " has no references");
    }
    out[label] = entropy_bits(s);
  }
  return out;
}

Json to_json(const RatioValue& r) { return r.defined ? Json(r.value) : Json(nullptr); }

SubordinationReport subordination_from_counts(double dominant, double subordinated, double both,
                                              double neutral_character,
                                              double neutral_non_character) {
  SubordinationReport r;
  r.dominant_refs = dominant;
  r.subordinated_refs = subordinated;
  r.both_refs = both;
  r.neutral_character_refs = neutral_character;
  r.neutral_non_character_refs = neutral_non_character;
  r.ratio = dominant > 0.0 ? RatioValue{subordinated / dominant, true} : RatioValue{};
  r.neutral_ratio = neutral_character > 0.0
                        ? RatioValue{neutral_non_character / neutral_character, true}
                        : RatioValue{};
  return r;
}

SubordinationReport subordination_stats(const std::vector<CueMention>& mentions,
                                        const RecordIndex& records, std::string_view home_country,
                                        AmbiguityMode mode) {
  double dominant = 0.0, subordinated = 0.0, both = 0.0;
  for (const auto& [key, roles] : laden_units(mentions, records)) {
    const double w = non_home_weight(key.second, home_country, mode);
    if (w <= 0.0) continue;
    if (roles.subject && roles.object) {
      both += w;
    } else if (roles.subject) {
      dominant += w;
    } else {
      subordinated += w;
    }
  }

  std::map<std::string, std::pair<bool, bool>> neutral;  // record -> (character, non-character)
  for (const auto& m : mentions) {
    if (meta_for(records, m.record_id).power_condition != PowerCondition::Neutral) continue;
    if (non_home_weight(m.countries, home_country, mode) <= 0.0) continue;
    auto& flags = neutral[m.record_id];
    (is_character(m.referent) ? flags.first : flags.second) = true;
  }
  double neutral_character = 0.0, neutral_non_character = 0.0;
  for (const auto& [id, flags] : neutral) {
    if (flags.first) {
      neutral_character += 1.0;
    } else {
      neutral_non_character += 1.0;
    }
  }
  return subordination_from_counts(dominant, subordinated, both, neutral_character,
                                   neutral_non_character);
}

Json to_json(const SubordinationReport& r) {
  return Json{{"dominant_refs", r.dominant_refs},
              {"subordinated_refs", r.subordinated_refs},
              {"both_refs", r.both_refs},
              {"laden_character_refs", r.dominant_refs + r.subordinated_refs + r.both_refs},
              {"ratio", to_json(r.ratio)},
              {"neutral_character_refs", r.neutral_character_refs},
              {"neutral_non_character_refs", r.neutral_non_character_refs},
              {"neutral_ratio", to_json(r.neutral_ratio)}};
}

std::vector<ChoroplethRow> choropleth_data(const std::vector<CueMention>& mentions,
                                           const RecordIndex& records,
                                           std::string_view home_country, AmbiguityMode mode) {
  std::map<CountryCode, std::pair<double, double>> weight;
  double total_dominant = 0.0, total_subordinated = 0.0;
  for (const auto& [key, roles] : laden_units(mentions, records)) {
    const auto& candidates = key.second;
    if (mode == AmbiguityMode::Drop && candidates.size() > 1) continue;
    const double w = 1.0 / static_cast<double>(candidates.size());
    for (const auto& c : candidates) {
      if (c == home_country) continue;
      auto& cell = weight[c];
      if (roles.subject) {
        cell.first += w;
        total_dominant += w;
      }
      if (roles.object) {
        cell.second += w;
        total_subordinated += w;
      }
    }
  }
  std::vector<ChoroplethRow> rows;
  for (const auto& [code, w] : weight) {
    rows.push_back({code, total_dominant > 0.0 ? 100.0 * w.first / total_dominant : 0.0,
                    total_subordinated > 0.0 ? 100.0 * w.second / total_subordinated : 0.0});
  }
  return rows;
}

std::string distance_matrix_csv(const std::vector<CountryDistribution>& dists,
                                const DistanceMatrix& d) {
  std::ostringstream os;
  os << "code";
  for (const auto& c : dists) os << ',' << c.country;
  os << '\n';
  for (std::size_t i = 0; i < dists.size(); ++i) {
    os << dists[i].country;
    for (std::size_t j = 0; j < dists.size(); ++j) os << ',' << format_fixed(d[i][j], 6);
    os << '\n';
  }
  return os.str();
}

std::string tsne_csv(const std::vector<CountryDistribution>& dists, const TsneResult& t,
                     const ClusterAssignment& a) {
  std::ostringstream os;
  os << "code,x,y,cluster\n";
  for (std::size_t i = 0; i < dists.size(); ++i) {
    os << dists[i].country << ',' << format_fixed(t.points[i][0], 6) << ','
       << format_fixed(t.points[i][1], 6) << ',' << a.labels[i] << '\n';
  }
  return os.str();
}

std::string cluster_table_csv(const std::vector<CountryDistribution>& dists,
                              const ClusterAssignment& a,
                              const std::vector<CharacterSlot>& slots) {
  const auto entropy = cluster_entropy(a, dists);
  std::ostringstream os;
  os << "cluster,size,members,entropy,modal_slot,modal_share\n";
  for (const auto& [label, h] : entropy) {
    std::vector<CountryCode> members;
    std::vector<double> sum(slots.size(), 0.0);
    for (std::size_t i = 0; i < dists.size(); ++i) {
      if (a.labels[i] != label) continue;
      members.push_back(dists[i].country);
      for (std::size_t k = 0; k < sum.size() && k < dists[i].counts.size(); ++k) sum[k] += dists[i].counts[k];
    }
    const auto modal = std::max_element(sum.begin(), sum.end()) - sum.begin();
    const double total = std::accumulate(sum.begin(), sum.end(), 0.0);
    os << label << ',' << members.size() << ',' << joined(members, ';') << ','
       << format_fixed(h, 4) << ',' << slot_label(slots[static_cast<std::size_t>(modal)]) << ','
       << format_fixed(total > 0.0 ? sum[static_cast<std::size_t>(modal)] / total : 0.0, 4) << '\n';
  }
  return os.str();
}

std::string choropleth_csv(const std::vector<ChoroplethRow>& rows) {
  std::ostringstream os;
  os << "code,pct_dominant,pct_subordinated\n";
  for (const auto& r : rows) {
    os << r.code << ',' << format_fixed(r.pct_dominant, 3) << ','
       << format_fixed(r.pct_subordinated, 3) << '\n';
  }
  return os.str();
}

std::string distributions_csv(const std::vector<CountryDistribution>& dists,
                              const std::vector<CharacterSlot>& slots) {
  std::ostringstream os;
  os << "code,total_refs";
  for (const auto& s : slots) os << ',' << slot_label(s);
  os << '\n';
  for (const auto& d : dists) {
    os << d.country << ',' << format_fixed(d.total_refs, 3);
    for (double c : d.counts) os << ',' << format_fixed(c, 3);
    os << '\n';
  }
  return os.str();
}

}  // namespace naudit
