#include <doctest.h>

#include <algorithm>
#include <random>

#include "narrative_audit/error.hpp"
#include "narrative_audit/eval_harness.hpp"
#include "support.hpp"

using namespace naudit;
using naudit::testing::fixture;
using naudit::testing::TempDir;

namespace {

CueMention mention(const std::string& record, std::vector<CountryCode> codes, Referent ref) {
  return {record, codes.front(), std::nullopt, std::move(codes), ref, ExtractionMethod::QA};
}

// Records that each hold one object mention, correct with probability p.
std::vector<Confusion> bernoulli_outcomes(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution hit(p);
  std::vector<Confusion> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(hit(rng) ? Confusion{1, 0, 0} : Confusion{0, 1, 1});
  }
  return out;
}

}  // namespace

TEST_SUITE("eval_harness") {

TEST_CASE("confusion oracle") {
  const Confusion c{8, 2, 0};
  CHECK(precision(c) == doctest::Approx(8.0 / 10.0));
  CHECK(recall(c) == doctest::Approx(1.0));
  CHECK(f1_score(c) == doctest::Approx(2.0 * 0.8 * 1.0 / 1.8).epsilon(1e-12));
  CHECK(f1_score(c) == doctest::Approx(0.889).epsilon(1e-3));

  CHECK(precision({0, 0, 0}) == 1.0);
  CHECK(recall({0, 0, 0}) == 1.0);
  CHECK(precision({0, 0, 3}) == 0.0);
  CHECK(recall({0, 4, 0}) == 0.0);
  CHECK(f1_score({0, 4, 0}) == 0.0);
}

TEST_CASE("multiset matching") {
  CHECK(match_role({{"MEX"}}, {"MEX"}).tp == 1);
  const Confusion dup = match_role({{"MEX"}, {"MEX"}}, {"MEX"});
  CHECK(dup.tp == 1);
  CHECK(dup.fp == 1);
  const Confusion miss = match_role({}, {"VNM", "USA"});
  CHECK(miss.fn == 2);
  const Confusion plural = match_role({{"VNM"}, {"USA"}}, {"VNM", "USA"});
  CHECK(plural.tp == 2);
  CHECK(plural.fp == 0);
  CHECK(plural.fn == 0);
}

TEST_CASE("ambiguous predictions match any remaining gold candidate") {
  const Confusion c = match_role({{"KOR", "PRK"}}, {"KOR"});
  CHECK(c.tp == 1);
  CHECK(c.fp == 0);
  // The singleton claims KOR first, so the ambiguous set finds nothing left.
  const Confusion d = match_role({{"KOR", "PRK"}, {"KOR"}}, {"KOR"});
  CHECK(d.tp == 1);
  CHECK(d.fp == 1);
}

TEST_CASE("role predictions use Both for both roles") {
  const std::vector<CueMention> ms = {mention("r", {"USA"}, Referent::Both),
                                      mention("r", {"MEX"}, Referent::Object),
                                      mention("r", {"THA"}, Referent::NonCharacter)};
  CHECK(role_predictions(ms, Role::Subject) == std::vector<std::vector<CountryCode>>{{"USA"}});
  CHECK(role_predictions(ms, Role::Object) ==
        std::vector<std::vector<CountryCode>>{{"USA"}, {"MEX"}});
}

TEST_CASE("identity predictions score perfectly") {
  const auto gold = load_gold(fixture("labeled/gold.jsonl"));
  std::map<std::string, std::vector<CueMention>> pred;
  for (const auto& g : gold) {
    auto& v = pred[g.record_id];
    for (const auto& c : g.gold_subject) v.push_back(mention(g.record_id, {c}, Referent::Subject));
    for (const auto& c : g.gold_object) v.push_back(mention(g.record_id, {c}, Referent::Object));
  }
  const auto [s, o] = score_extraction(pred, gold, {200, 0.95, 1});
  CHECK(s.f1 == 1.0);
  CHECK(o.f1 == 1.0);
  CHECK(s.ci_half_width == 0.0);
  CHECK(o.ci_half_width == 0.0);
}

TEST_CASE("duplicate gold ids are rejected") {
  std::vector<GoldLabel> gold{{"a", {"USA"}, {}}, {"a", {"USA"}, {}}};
  CHECK_THROWS_AS(check_unique(gold), ValidationError);
  CHECK_THROWS_AS(per_record_outcomes({}, gold), ValidationError);

  TempDir dir;
  write_text_file(dir / "g.jsonl",
                  "{\"record_id\": \"a\", \"gold_subject\": [], \"gold_object\": []}\n"
                  "{\"record_id\": \"a\", \"gold_subject\": [], \"gold_object\": []}\n");
  CHECK_THROWS_AS(load_gold(dir / "g.jsonl"), ValidationError);
  write_text_file(dir / "h.jsonl", "{\"record_id\": \"a\", \"gold_subject\": \"USA\"}\n");
  CHECK_THROWS_AS(load_gold(dir / "h.jsonl"), ValidationError);
}

TEST_CASE("bootstrap") {
  const std::vector<Confusion> perfect(50, Confusion{1, 0, 0});
  CHECK(bootstrap_ci(perfect, {1000, 0.95, 3}) == 0.0);

  const auto mixed = bernoulli_outcomes(611, 0.85, 42);
  const BootstrapOptions opt{1000, 0.98, 7};
  const double a = bootstrap_ci(mixed, opt);
  CHECK(a == bootstrap_ci(mixed, opt));
  // Normal approximation: 2.326 * sqrt(0.85 * 0.15 / 611) ~= 0.034.
  CHECK(a > 0.02);
  CHECK(a < 0.045);
  CHECK(bootstrap_ci(mixed, {1000, 0.98, 8}) != a);

  CHECK_THROWS_AS(bootstrap_ci(std::vector<Confusion>{Confusion{1, 0, 0}}, opt), ValidationError);
  CHECK_THROWS_AS(bootstrap_ci(mixed, {50, 0.95, 0}), ValidationError);
  CHECK_THROWS_AS(bootstrap_ci(mixed, {1000, 1.0, 0}), ValidationError);
}

TEST_CASE("micro F1 properties") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> d(0, 5);
    std::vector<Confusion> outcomes;
    for (int i = 0; i < 20; ++i) {
      outcomes.push_back({static_cast<std::size_t>(d(rng)), static_cast<std::size_t>(d(rng)),
                          static_cast<std::size_t>(d(rng))});
    }
    const double base = micro_f1(outcomes);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);

    // Order invariance.
    auto shuffled = outcomes;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(micro_f1(shuffled) == doctest::Approx(base).epsilon(1e-12));

    // Splitting a record into two records with the same totals changes nothing.
    auto split = outcomes;
    Confusion& first = split.front();
    Confusion half{first.tp / 2, first.fp / 2, first.fn / 2};
    first.tp -= half.tp;
    first.fp -= half.fp;
    first.fn -= half.fn;
    split.push_back(half);
    CHECK(micro_f1(split) == doctest::Approx(base).epsilon(1e-12));

    // Turning a false positive into a true positive never lowers F1.
    auto better = outcomes;
    for (auto& c : better) {
      if (c.fp > 0) {
        --c.fp;
        ++c.tp;
        break;
      }
    }
    CHECK(micro_f1(better) >= base - 1e-12);
  }
}

TEST_CASE("markdown and csv rendering") {
  MetricsReport s{Role::Subject, 1.0, 0.9, 0.947, 0.01, {9, 0, 1}};
  MetricsReport o{Role::Object, 0.8, 1.0, 0.889, 0.02, {8, 2, 0}};
  std::vector<std::pair<std::string, std::pair<MetricsReport, MetricsReport>>> rows{
      {"string-match", {s, o}}};
  const std::string md = render_metrics_markdown(rows, {1000, 0.98, 0});
  CHECK(md.find("98%") != std::string::npos);
  CHECK(md.find("| string-match | 1.000 | 0.800 | 0.900 | 1.000 | 0.947 | 0.889 |") !=
        std::string::npos);
  const std::string csv = render_metrics_csv(rows);
  CHECK(csv.find("string-match,Object,0.800,1.000,0.889,0.020,8,2,0") != std::string::npos);
}

}  // TEST_SUITE
