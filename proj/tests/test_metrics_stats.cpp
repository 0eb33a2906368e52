#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mdaforge/cwe.hpp"
#include "mdaforge/error.hpp"
#include "mdaforge/metrics.hpp"
#include "mdaforge/rng.hpp"
#include "mdaforge/stats.hpp"

using namespace mdaforge;

namespace {

double binary_mcc(double tp, double fn, double fp, double tn) {
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  return den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
}

double binary_kappa(double tp, double fn, double fp, double tn) {
  const double n = tp + fn + fp + tn;
  const double acc = (tp + tn) / n;
  const double q = ((tp + fn) * (tp + fp) + (fn + tn) * (fp + tn)) / (n * n);
  if (1.0 - q == 0.0) return acc == 1.0 ? 1.0 : 0.0;
  return (acc - q) / (1.0 - q);
}

std::vector<double> around(double mean, double sigma, std::size_t n, Rng& rng) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(mean + sigma * (2.0 * rng.uniform() - 1.0) * std::sqrt(3.0));
  return v;
}

std::vector<double> pooled(const std::vector<ScoreGroup>& groups, std::size_t from, std::size_t to) {
  std::vector<double> out;
  for (std::size_t i = from; i < to; ++i) out.insert(out.end(), groups[i].scores.begin(), groups[i].scores.end());
  return out;
}

// Independent re-derivation of the split rule: the best split of a sorted
// list of groups, by between-group sum of squares.
std::size_t best_split(const std::vector<ScoreGroup>& sorted) {
  const auto all = pooled(sorted, 0, sorted.size());
  const double grand = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
  double best = -1.0;
  std::size_t at = 1;
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const auto left = pooled(sorted, 0, k), right = pooled(sorted, k, sorted.size());
    const double ml = std::accumulate(left.begin(), left.end(), 0.0) / static_cast<double>(left.size());
    const double mr = std::accumulate(right.begin(), right.end(), 0.0) / static_cast<double>(right.size());
    const double b = static_cast<double>(left.size()) * (ml - grand) * (ml - grand) +
                     static_cast<double>(right.size()) * (mr - grand) * (mr - grand);
    if (b > best) {
      best = b;
      at = k;
    }
  }
  return at;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("accuracy examples") {
    CHECK(accuracy(ConfusionMatrix::from_counts({{3, 0}, {0, 4}})) == 1.0);
    CHECK(accuracy(ConfusionMatrix::from_counts({{0, 3}, {4, 0}})) == 0.0);
    CHECK(accuracy(ConfusionMatrix::from_counts({{5, 1, 0}, {0, 4, 1}, {1, 0, 8}})) == 17.0 / 20.0);
    CHECK_THROWS_AS(accuracy(ConfusionMatrix(3)), Error);
  }

  TEST_CASE("hand-computed three-class mcc and kappa") {
    // Row sums (6, 5, 9) equal column sums, so both come to 198/258 = 33/43.
    const auto cm = ConfusionMatrix::from_counts({{5, 1, 0}, {0, 4, 1}, {1, 0, 8}});
    CHECK(mcc(cm) == doctest::Approx(33.0 / 43.0).epsilon(1e-15));
    CHECK(kappa(cm) == doctest::Approx(33.0 / 43.0).epsilon(1e-15));
  }

  TEST_CASE("mcc and kappa edge cases") {
    const auto perfect = ConfusionMatrix::from_counts({{3, 0, 0}, {0, 2, 0}, {0, 0, 4}});
    CHECK(mcc(perfect) == 1.0);
    CHECK(kappa(perfect) == 1.0);
    CHECK(mcc(ConfusionMatrix::from_counts({{0, 5}, {0, 5}})) == 0.0);
    CHECK(kappa(ConfusionMatrix::from_counts({{0, 5}, {0, 5}})) == 0.0);
    CHECK(kappa(ConfusionMatrix::from_counts({{4, 0}, {0, 0}})) == 1.0);
    // Independent truth and prediction: counts are the outer product of marginals.
    const auto indep = ConfusionMatrix::from_counts({{6, 9, 3}, {4, 6, 2}, {10, 15, 5}});
    CHECK(std::fabs(kappa(indep)) <= 1e-12);
    CHECK(std::fabs(mcc(indep)) <= 1e-12);
  }

  TEST_CASE("two-class matrices agree with the binary formulas") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
      const auto tp = static_cast<std::int64_t>(rng.below(60)), fn = static_cast<std::int64_t>(rng.below(60));
      const auto fp = static_cast<std::int64_t>(rng.below(60)), tn = static_cast<std::int64_t>(rng.below(60));
      if (tp + fn + fp + tn == 0) continue;
      const auto cm = ConfusionMatrix::from_counts({{tp, fn}, {fp, tn}});
      const double bm = binary_mcc(tp, fn, fp, tn), bk = binary_kappa(tp, fn, fp, tn);
      CHECK(std::fabs(mcc(cm) - bm) <= 1e-12);
      CHECK(std::fabs(kappa(cm) - bk) <= 1e-12);
    }
  }

  TEST_CASE("class relabeling leaves the metrics unchanged") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::vector<std::int64_t>> counts(4, std::vector<std::int64_t>(4));
      for (auto& row : counts) {
        for (auto& c : row) c = static_cast<std::int64_t>(rng.below(20));
      }
      std::vector<std::size_t> perm{0, 1, 2, 3};
      rng.shuffle(perm);
      std::vector<std::vector<std::int64_t>> permuted(4, std::vector<std::int64_t>(4));
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) permuted[perm[i]][perm[j]] = counts[i][j];
      }
      const auto a = ConfusionMatrix::from_counts(counts), b = ConfusionMatrix::from_counts(permuted);
      CHECK(accuracy(a) == accuracy(b));
      CHECK(mcc(a) == doctest::Approx(mcc(b)).epsilon(1e-12));
      CHECK(kappa(a) == doctest::Approx(kappa(b)).epsilon(1e-12));
      CHECK(mcc(a) >= -1.0);
      CHECK(mcc(a) <= 1.0);
    }
  }

  TEST_CASE("per-class precision, recall and F1") {
    const auto two = ConfusionMatrix::from_counts({{5, 1}, {2, 4}});
    const auto s = per_class_prf(two, 0);
    CHECK(s.precision == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
    CHECK(s.recall == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(s.f1 == doctest::Approx(10.0 / 13.0).epsilon(1e-15));
    const auto absent = per_class_prf(ConfusionMatrix::from_counts({{2, 0, 0}, {0, 3, 0}, {0, 0, 0}}), 2);
    CHECK(absent.precision == 0.0);
    CHECK(absent.recall == 0.0);
    CHECK(absent.f1 == 0.0);
    const auto diag = ConfusionMatrix::from_counts({{2, 0}, {0, 3}});
    for (std::size_t k = 0; k < 2; ++k) {
      const auto d = per_class_prf(diag, k);
      CHECK(d.precision == 1.0);
      CHECK(d.recall == 1.0);
      CHECK(d.f1 == 1.0);
    }
  }

  TEST_CASE("severity weights") {
    const auto w = SeverityWeights::standard();
    CHECK(w.total() == doctest::Approx(49.73).epsilon(1e-15));
    CHECK(w.weight("CWE-89") == doctest::Approx(22.11 / 49.73).epsilon(1e-15));
    CHECK(w.weight("CWE-89") == doctest::Approx(0.4446).epsilon(1e-4));
    CHECK(w.weight("CWE-20") == 0.0);
    std::map<std::string, ClassScores> all_one, only_sqli, none;
    for (const auto& [id, score] : w.scores) {
      all_one[id] = {1.0, 1.0, 1.0};
      only_sqli[id] = id == "CWE-89" ? ClassScores{1.0, 1.0, 1.0} : ClassScores{};
      none[id] = {};
    }
    CHECK(std::fabs(severity_weighted_prf(all_one, w).f1 - 1.0) <= 1e-12);
    CHECK(severity_weighted_prf(only_sqli, w).f1 == doctest::Approx(22.11 / 49.73).epsilon(1e-15));
    CHECK(severity_weighted_prf(none, w).f1 == 0.0);
    CHECK(severity_weighted_prf({}, w).f1 == 0.0);
  }

  TEST_CASE("evaluate_predictions over registry labels") {
    const auto& reg = CweRegistry::standard();
    const int sqli = *reg.index_of("CWE-89"), os = *reg.index_of("CWE-78"), ovf = *reg.index_of("CWE-190");
    const std::vector<int> truth{sqli, sqli, os, os, ovf, ovf};
    const std::vector<int> pred{sqli, sqli, os, ovf, ovf, ovf};
    const RunResult r = evaluate_predictions(truth, pred);
    CHECK(r.acc == 5.0 / 6.0);
    CHECK(r.per_class.size() == 44);
    CHECK(r.per_class.at("CWE-89").f1 == 1.0);
    CHECK(r.per_class.at("CWE-78").recall == 0.5);
    CHECK(r.confusion.total() == 6);
    const auto j = r.to_json();
    CHECK(j["metrics"]["acc"] == r.acc);
    CHECK(j["confusion"].size() == 44);
    CHECK_THROWS_AS(evaluate_predictions(truth, std::vector<int>{sqli}), Error);
  }
}

TEST_SUITE("stats") {
  TEST_CASE("Cohen's d examples") {
    const std::vector<double> a{2.0, 4.0}, b{1.0, 3.0};
    const auto e = cohens_d(a, b);
    CHECK(std::fabs(e.d - 1.0 / std::sqrt(2.0)) <= 1e-9);
    CHECK(e.magnitude == Magnitude::kMedium);
    CHECK(cohens_d(a, a).d == 0.0);
    CHECK(cohens_d(a, a).magnitude == Magnitude::kNegligible);
    const std::vector<double> ones{1, 1, 1}, zeros{0, 0, 0};
    CHECK(cohens_d(ones, zeros).d == std::numeric_limits<double>::infinity());
    CHECK(cohens_d(zeros, ones).d == -std::numeric_limits<double>::infinity());
    CHECK(cohens_d(ones, zeros).magnitude == Magnitude::kLarge);
    CHECK(cohens_d(ones, ones).d == 0.0);
    CHECK_THROWS_AS(cohens_d(std::vector<double>{1.0}, b), Error);
  }

  TEST_CASE("magnitude thresholds, 0.8 is medium") {
    CHECK(classify_effect(0.2) == Magnitude::kNegligible);
    CHECK(classify_effect(0.2000001) == Magnitude::kSmall);
    CHECK(classify_effect(0.5) == Magnitude::kSmall);
    CHECK(classify_effect(-0.8) == Magnitude::kMedium);
    CHECK(classify_effect(0.8000001) == Magnitude::kLarge);
    CHECK(std::string(magnitude_label(Magnitude::kLarge)) == "L");
  }

  TEST_CASE("Cohen's d is antisymmetric") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const auto a = around(rng.uniform(), 0.1, 2 + rng.below(6), rng);
      const auto b = around(rng.uniform(), 0.1, 2 + rng.below(6), rng);
      const auto ab = cohens_d(a, b), ba = cohens_d(b, a);
      CHECK(ab.d == -ba.d);
      CHECK(ab.magnitude == ba.magnitude);
    }
  }

  TEST_CASE("single and identical groups share rank 1") {
    const auto one = scott_knott_esd({{"a", {0.5, 0.6, 0.7}}});
    CHECK(one.ranks.size() == 1);
    CHECK(one.rank_of("a") == 1);
    const auto same = scott_knott_esd({{"a", {0.5, 0.6, 0.7}}, {"b", {0.5, 0.6, 0.7}}, {"c", {0.5, 0.6, 0.7}}});
    CHECK(same.ranks.size() == 1);
    for (const char* m : {"a", "b", "c"}) CHECK(same.rank_of(m) == 1);
    CHECK_THROWS_AS(same.rank_of("z"), Error);
    CHECK_THROWS_AS(scott_knott_esd({}), Error);
    CHECK_THROWS_AS(scott_knott_esd({{"a", {0.5}}}), Error);
  }

  TEST_CASE("a wide gap always separates") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const auto t = scott_knott_esd(
          {{"low", around(0.70, 0.01, 8, rng)}, {"high", around(0.95, 0.01, 8, rng)}, {"mid", around(0.93, 0.01, 8, rng)}});
      CHECK(t.rank_of("low") > t.rank_of("high"));
      CHECK(t.rank_of("low") > t.rank_of("mid"));
      CHECK(t.rows.front().method == "high");
      CHECK(t.rows.back().method == "low");
    }
  }

  TEST_CASE("gap above ten sigma gives distinct ranks") {
    Rng rng(11);
    std::vector<ScoreGroup> groups;
    for (int g = 0; g < 5; ++g) groups.push_back({"m" + std::to_string(g), around(0.1 * g, 0.005, 6, rng)});
    const auto t = scott_knott_esd(groups);
    CHECK(t.ranks.size() == 5);
    for (int g = 0; g < 5; ++g) CHECK(t.rank_of("m" + std::to_string(g)) == 5 - g);
  }

  TEST_CASE("rank table invariant under positive affine maps") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      Rng rng(seed);
      std::vector<ScoreGroup> groups;
      for (int g = 0; g < 6; ++g) groups.push_back({"m" + std::to_string(g), around(rng.uniform(), 0.05, 5, rng)});
      const auto base = scott_knott_esd(groups);
      for (auto [scale, shift] : {std::pair{3.0, 0.25}, std::pair{0.5, -1.0}, std::pair{1.0, 10.0}}) {
        auto moved = groups;
        for (auto& g : moved) {
          for (double& s : g.scores) s = scale * s + shift;
        }
        const auto t = scott_knott_esd(moved);
        REQUIRE(t.ranks.size() == base.ranks.size());
        for (std::size_t r = 0; r < t.ranks.size(); ++r) CHECK(t.ranks[r].methods == base.ranks[r].methods);
      }
    }
  }

  TEST_CASE("ranks partition the input and no rank has a passing split left") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      Rng rng(seed);
      std::vector<ScoreGroup> groups;
      const std::size_t n = 2 + rng.below(6);
      for (std::size_t g = 0; g < n; ++g) {
        groups.push_back({"m" + std::to_string(g), around(rng.uniform() * 0.3, 0.05, 3 + rng.below(5), rng)});
      }
      const auto t = scott_knott_esd(groups);
      std::vector<std::string> seen;
      int expected_rank = 1;
      double prev_mean = std::numeric_limits<double>::infinity();
      for (const auto& rank : t.ranks) {
        CHECK(rank.rank == expected_rank++);
        seen.insert(seen.end(), rank.methods.begin(), rank.methods.end());
        std::vector<ScoreGroup> members;
        for (const auto& m : rank.methods) {
          members.push_back(*std::find_if(groups.begin(), groups.end(), [&](const ScoreGroup& g) { return g.method == m; }));
          CHECK(members.back().mean() <= prev_mean);
          prev_mean = members.back().mean();
        }
        if (members.size() >= 2) {
          const std::size_t k = best_split(members);
          const auto left = pooled(members, 0, k), right = pooled(members, k, members.size());
          CHECK(std::fabs(cohens_d(left, right).d) <= kNegligibleEffect);
        }
      }
      std::sort(seen.begin(), seen.end());
      std::vector<std::string> all;
      for (const auto& g : groups) all.push_back(g.method);
      std::sort(all.begin(), all.end());
      CHECK(seen == all);
    }
  }

  TEST_CASE("table output") {
    Rng rng(5);
    const auto t = scott_knott_esd({{"copilot", around(0.9, 0.01, 5, rng)}, {"source-only", around(0.6, 0.01, 5, rng)}});
    const auto j = t.to_json();
    CHECK(j["ranks"].size() == 2);
    CHECK(t.rows.size() == 2);
    REQUIRE(t.rows[0].d_vs_next.has_value());
    CHECK(t.rows[0].d_vs_next->magnitude == Magnitude::kLarge);
    CHECK_FALSE(t.rows[1].d_vs_next.has_value());
    const std::string text = t.to_text();
    CHECK(text.find("copilot") != std::string::npos);
    CHECK(text.find("source-only") != std::string::npos);
  }
}
