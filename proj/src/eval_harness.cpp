#include "narrative_audit/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "narrative_audit/hashing.hpp"

namespace naudit {
namespace {

// Unbiased draw in [0, n) by rejection; the standard distributions are not
// specified bit-for-bit across library implementations.
std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::string fmt3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

std::string_view to_string(Role r) { return r == Role::Subject ? "Subject" : "Object"; }

std::vector<GoldLabel> load_gold(const std::filesystem::path& path) {
  std::vector<GoldLabel> gold;
  for (const auto& row : read_jsonl(path)) {
    const Json& j = row.value;
    try {
      GoldLabel g;
      g.record_id = j.at("record_id").get<std::string>();
      g.gold_subject = j.at("gold_subject").get<std::vector<CountryCode>>();
      g.gold_object = j.at("gold_object").get<std::vector<CountryCode>>();
      gold.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) +
                            ": malformed gold label: " + e.what());
    }
  }
  check_unique(gold);
  return gold;
}

void check_unique(const std::vector<GoldLabel>& gold) {
  std::set<std::string> seen;
  for (const auto& g : gold) {
    if (!seen.insert(g.record_id).second) {
      throw ValidationError("duplicate gold record_id " + g.record_id);
    }
  }
}

double precision(const Confusion& c) {
  if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const Confusion& c) {
  if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f1_score(const Confusion& c) {
  const double p = precision(c);
  const double r = recall(c);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Confusion match_role(const std::vector<std::vector<CountryCode>>& predicted,
                     std::vector<CountryCode> gold) {
  std::sort(gold.begin(), gold.end());
  Confusion c;
  std::vector<const std::vector<CountryCode>*> ambiguous;
  for (const auto& p : predicted) {
    if (p.size() != 1) {
      ambiguous.push_back(&p);
      continue;
    }
    auto it = std::find(gold.begin(), gold.end(), p.front());
    if (it != gold.end()) {
      gold.erase(it);
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto* p : ambiguous) {
    auto it = std::find_if(gold.begin(), gold.end(), [&](const CountryCode& g) {
      return std::find(p->begin(), p->end(), g) != p->end();
    });
    if (it != gold.end()) {
      gold.erase(it);
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = gold.size();
  return c;
}

std::vector<std::vector<CountryCode>> role_predictions(const std::vector<CueMention>& mentions,
                                                       Role role) {
  std::vector<std::vector<CountryCode>> out;
  for (const auto& m : mentions) {
    const bool in_role = m.referent == Referent::Both ||
                         (role == Role::Subject && m.referent == Referent::Subject) ||
                         (role == Role::Object && m.referent == Referent::Object);
    if (!in_role) continue;
    if (std::find(out.begin(), out.end(), m.countries) == out.end()) out.push_back(m.countries);
  }
  return out;
}

std::vector<RecordOutcome> per_record_outcomes(
    const std::map<std::string, std::vector<CueMention>>& predictions,
    const std::vector<GoldLabel>& gold) {
  check_unique(gold);
  static const std::vector<CueMention> kNone;
  std::vector<RecordOutcome> out;
  out.reserve(gold.size());
  for (const auto& g : gold) {
    const auto it = predictions.find(g.record_id);
    const auto& mentions = it == predictions.end() ? kNone : it->second;
    out.push_back({g.record_id, match_role(role_predictions(mentions, Role::Subject), g.gold_subject),
                   match_role(role_predictions(mentions, Role::Object), g.gold_object)});
  }
  return out;
}

double micro_f1(std::span<const Confusion> outcomes) {
  Confusion total;
  for (const auto& c : outcomes) total += c;
  return f1_score(total);
}

double bootstrap_ci(std::span<const Confusion> outcomes, const BootstrapOptions& opt) {
  if (outcomes.size() < 2) throw ValidationError("bootstrap needs at least 2 records");
  if (opt.resamples < 100) throw ValidationError("bootstrap needs at least 100 resamples");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  std::vector<double> scores(static_cast<std::size_t>(opt.resamples));
  for (int b = 0; b < opt.resamples; ++b) {
    std::mt19937_64 rng(mix_seed(opt.seed, static_cast<std::uint64_t>(b)));
    Confusion total;
    for (std::size_t k = 0; k < outcomes.size(); ++k) total += outcomes[bounded(rng, outcomes.size())];
    scores[static_cast<std::size_t>(b)] = f1_score(total);
  }
  std::sort(scores.begin(), scores.end());
  const double tail = (1.0 - opt.level) / 2.0;
  return (quantile(scores, 1.0 - tail) - quantile(scores, tail)) / 2.0;
}

std::pair<MetricsReport, MetricsReport> score_extraction(
    const std::map<std::string, std::vector<CueMention>>& predictions,
    const std::vector<GoldLabel>& gold, const BootstrapOptions& opt) {
  const auto outcomes = per_record_outcomes(predictions, gold);
  auto report = [&](Role role) {
    std::vector<Confusion> per;
    per.reserve(outcomes.size());
    for (const auto& o : outcomes) per.push_back(role == Role::Subject ? o.subject : o.object);
    MetricsReport m;
    m.role = role;
    for (const auto& c : per) m.support += c;
    m.precision = precision(m.support);
    m.recall = recall(m.support);
    m.f1 = f1_score(m.support);
    BootstrapOptions role_opt = opt;
    role_opt.seed = mix_seed(opt.seed, role == Role::Subject ? 0 : 1);
    m.ci_half_width = per.size() >= 2 ? bootstrap_ci(per, role_opt) : 0.0;
    return m;
  };
  return {report(Role::Subject), report(Role::Object)};
}

std::map<std::string, std::vector<CueMention>> group_by_record(
    const std::vector<CueMention>& mentions) {
  std::map<std::string, std::vector<CueMention>> out;
  for (const auto& m : mentions) out[m.record_id].push_back(m);
  return out;
}

std::string render_metrics_markdown(
    const std::vector<std::pair<std::string, std::pair<MetricsReport, MetricsReport>>>& rows,
    const BootstrapOptions& opt) {
  std::ostringstream os;
  os << "Micro-averaged over mentions; CI is the percentile bootstrap half-width at "
     << static_cast<int>(std::lround(opt.level * 100)) << "% (" << opt.resamples
     << " resamples, seed " << opt.seed << ").\n\n";
  os << "| Model | Precision Subj. | Precision Obj. | Recall Subj. | Recall Obj. | F1 Subj. | F1 Obj. "
        "| CI Subj. | CI Obj. |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& [name, reports] : rows) {
    const auto& [s, o] = reports;
    os << "| " << name << " | " << fmt3(s.precision) << " | " << fmt3(o.precision) << " | "
       << fmt3(s.recall) << " | " << fmt3(o.recall) << " | " << fmt3(s.f1) << " | " << fmt3(o.f1)
       << " | ±" << fmt3(s.ci_half_width) << " | ±" << fmt3(o.ci_half_width) << " |\n";
  }
  return os.str();
}

std::string render_metrics_csv(
    const std::vector<std::pair<std::string, std::pair<MetricsReport, MetricsReport>>>& rows) {
  std::ostringstream os;
  os << "model,role,precision,recall,f1,ci_half_width,tp,fp,fn\n";
  for (const auto& [name, reports] : rows) {
    for (const MetricsReport* m : {&reports.first, &reports.second}) {
      os << csv_escape(name) << ',' << to_string(m->role) << ',' << fmt3(m->precision) << ','
         << fmt3(m->recall) << ',' << fmt3(m->f1) << ',' << fmt3(m->ci_half_width) << ','
         << m->support.tp << ',' << m->support.fp << ',' << m->support.fn << '\n';
    }
  }
  return os.str();
}

}  // namespace naudit
