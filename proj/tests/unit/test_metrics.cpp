#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "asdkit/error.hpp"
#include "asdkit/metrics.hpp"
#include "asdkit/util.hpp"

using namespace asdkit;
using namespace asdkit::metrics;

namespace {

std::vector<ScoredSample> make_samples(const std::vector<double>& normal, const std::vector<double>& anomalous) {
  std::vector<ScoredSample> s;
  for (double v : normal) s.push_back({v, false, ""});
  for (double v : anomalous) s.push_back({v, true, ""});
  return s;
}

MetricReport report(const std::string& type, int id, double auc_v, double pauc_v) {
  MetricReport r;
  r.machine = {type, id};
  r.auc = auc_v;
  r.pauc = pauc_v;
  r.n_normal = 10;
  r.n_anomalous = 10;
  return r;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("hard threshold counts only strict positives") {
    CHECK(hard_threshold(0.5) == 1);
    CHECK(hard_threshold(0.0) == 0);
    CHECK(hard_threshold(-1.0) == 0);
  }

  TEST_CASE("auc of fully separated scores is one") {
    CHECK(auc(make_samples({1, 2, 3}, {4, 5})) == 1.0);
  }

  TEST_CASE("auc counts pairs") {
    const auto s = make_samples({0.1, 0.35, 0.4, 0.8}, {0.5, 0.9});
    CHECK(auc(s) == 0.875);
    CHECK(auc(s) == testing::auc_double_loop({0.1, 0.35, 0.4, 0.8}, {0.5, 0.9}));
  }

  TEST_CASE("tied scores earn nothing by default and half with the half rule") {
    const auto s = make_samples({2, 2, 2}, {2, 2});
    CHECK(auc(s) == 0.0);
    CHECK(auc(s, TieRule::kHalf) == 0.5);
    CHECK(auc(make_samples({1, 2}, {2}), TieRule::kHalf) == 0.75);
  }

  TEST_CASE("auc requires both classes") {
    CHECK_THROWS_AS(auc(make_samples({1, 2}, {})), DataError);
    CHECK_THROWS_AS(auc(make_samples({}, {1})), DataError);
    CHECK_THROWS_WITH(auc(make_samples({}, {1})), doctest::Contains("normal"));
  }

  TEST_CASE("pauc restricts to the highest-scoring normals") {
    const auto s = make_samples({0.1, 0.35, 0.4, 0.8}, {0.5, 0.9});
    CHECK(pauc(s, 0.5) == 0.75);
    CHECK(pauc(s, 1.0) == auc(s));
  }

  TEST_CASE("pauc with an empty normal prefix is an error") {
    std::vector<double> normal(9, 0.0);
    for (int i = 0; i < 9; ++i) normal[i] = i;
    CHECK_THROWS_AS(pauc(make_samples(normal, {10}), 0.1), DataError);
    CHECK_THROWS_AS(pauc(make_samples({1}, {2}), 0.0), ConfigError);
    CHECK_THROWS_AS(pauc(make_samples({1}, {2}), 1.5), ConfigError);
  }

  TEST_CASE("pauc normal count floors p times N") {
    CHECK(pauc_normal_count(0.1, 9) == 0);
    CHECK(pauc_normal_count(0.1, 10) == 1);
    CHECK(pauc_normal_count(0.1, 100) == 10);
    CHECK(pauc_normal_count(0.29, 100) == 29);
    CHECK(pauc_normal_count(0.15, 20) == 3);
    CHECK(pauc_normal_count(1.0, 7) == 7);
  }

  TEST_CASE("auc and pauc agree with the double loop on random sets with ties") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const auto nn = 1 + rng.below(60), na = 1 + rng.below(60);
      std::vector<double> normal, anomalous;
      for (std::uint64_t i = 0; i < nn; ++i) normal.push_back(static_cast<double>(rng.below(15)));
      for (std::uint64_t i = 0; i < na; ++i) anomalous.push_back(static_cast<double>(rng.below(15)) + 0.5 * rng.below(2));
      const auto s = make_samples(normal, anomalous);
      CHECK(std::abs(auc(s) - testing::auc_double_loop(normal, anomalous)) <= 1e-12);
      const std::uint64_t num = 1 + rng.below(10);
      if (num * nn / 10 == 0) continue;
      CHECK(std::abs(pauc(s, static_cast<double>(num) / 10.0) -
                     testing::pauc_double_loop(normal, anomalous, num, 10)) <= 1e-12);
    }
  }

  TEST_CASE("class swap with negated scores preserves auc") {
    Rng rng(5);
    std::vector<double> normal, anomalous;
    for (int i = 0; i < 40; ++i) normal.push_back(rng.normal());
    for (int i = 0; i < 30; ++i) anomalous.push_back(rng.normal() + 0.5);
    std::vector<double> neg_n, neg_a;
    for (double v : anomalous) neg_n.push_back(-v);
    for (double v : normal) neg_a.push_back(-v);
    CHECK(auc(make_samples(normal, anomalous)) == auc(make_samples(neg_n, neg_a)));
  }

  TEST_CASE("roc curve of separated scores passes through (0, 1)") {
    const auto c = roc_curve(make_samples({1, 2, 3}, {4, 5}));
    CHECK(std::any_of(c.begin(), c.end(), [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; }));
    CHECK(c.front().fpr == 0.0);
    CHECK(c.front().tpr == 0.0);
    CHECK(c.back().fpr == 1.0);
    CHECK(c.back().tpr == 1.0);
  }

  TEST_CASE("roc curve of one sample per class has three points") {
    CHECK(roc_curve(make_samples({1}, {2})).size() == 3);
  }

  TEST_CASE("roc curve is monotone and its area matches auc without ties") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> normal, anomalous;
      for (std::uint64_t i = 0, n = 1 + rng.below(80); i < n; ++i) normal.push_back(rng.normal());
      for (std::uint64_t i = 0, n = 1 + rng.below(80); i < n; ++i) anomalous.push_back(rng.normal() + 0.7);
      const auto s = make_samples(normal, anomalous);
      const auto c = roc_curve(s);
      for (std::size_t i = 1; i < c.size(); ++i) {
        CHECK(c[i].fpr >= c[i - 1].fpr);
        CHECK(c[i].tpr >= c[i - 1].tpr);
      }
      CHECK(std::abs(trapezoid_area(c) - auc(s)) <= 1e-12);
    }
  }

  TEST_CASE("evaluate fills a report") {
    const auto r = evaluate({"fan", 2}, make_samples({0.1, 0.35, 0.4, 0.8}, {0.5, 0.9}), 0.5);
    CHECK(r.auc == 0.875);
    CHECK(r.pauc == 0.75);
    CHECK(r.n_normal == 4);
    CHECK(r.n_anomalous == 2);
    CHECK(r.machine == MachineKey{"fan", 2});
  }

  TEST_CASE("report json round trip keeps every field") {
    const auto r = evaluate({"pump", 4}, make_samples({0.1, 0.35, 0.4, 0.8}, {0.5, 0.9}), 0.5);
    const std::string one = report_to_json(r);
    CHECK(one.find("\"machine_type\"") != std::string::npos);
    CHECK(one.find("\"n_anomalous\"") != std::string::npos);
    const std::vector<MetricReport> both{r, report("fan", 1, 0.5, 0.25)};
    const auto back = reports_from_json(reports_to_json(both));
    REQUIRE(back.size() == 2);
    CHECK(back[0].machine == r.machine);
    CHECK(back[0].auc == r.auc);
    CHECK(back[0].pauc == r.pauc);
    CHECK(back[0].p == r.p);
    CHECK(back[0].n_normal == r.n_normal);
    CHECK(back[1].auc == 0.5);
    CHECK_THROWS_AS(reports_from_json("{nope"), DataError);
  }

  TEST_CASE("summary csv has one row per machine") {
    const std::vector<MetricReport> rs{report("fan", 0, 0.9, 0.8), report("fan", 2, 0.7, 0.6)};
    const std::string csv = reports_to_csv(rs);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.rfind("machine_type,machine_id,auc,pauc", 0) == 0);
  }

  TEST_CASE("single system ranks first everywhere") {
    SystemResults res;
    res["only"][{"fan", 0}] = report("fan", 0, 0.7, 0.6);
    res["only"][{"pump", 0}] = report("pump", 0, 0.8, 0.5);
    const auto board = rank_systems(res);
    REQUIRE(board.size() == 1);
    CHECK(board[0].average_rank == 1.0);
    CHECK(board[0].type_rank.at("fan") == 1.0);
    CHECK(board[0].type_rank.at("pump") == 1.0);
  }

  TEST_CASE("a system that wins every type ranks first") {
    SystemResults res;
    for (const std::string t : {"fan", "pump", "valve"}) {
      res["a"][{t, 0}] = report(t, 0, 0.9, 0.8);
      res["b"][{t, 0}] = report(t, 0, 0.6, 0.5);
    }
    const auto board = rank_systems(res);
    CHECK(board[0].system == "a");
    CHECK(board[0].average_rank == 1.0);
    CHECK(board[1].average_rank == 2.0);
  }

  TEST_CASE("three systems match a hand-enumerated ranking") {
    SystemResults res;
    // fan metric (mean of auc, pauc over IDs): a 0.75, b 0.85, c 0.75 -> b 1, a 2.5, c 2.5
    res["a"][{"fan", 0}] = report("fan", 0, 0.8, 0.7);
    res["b"][{"fan", 0}] = report("fan", 0, 0.9, 0.8);
    res["c"][{"fan", 0}] = report("fan", 0, 0.7, 0.8);
    // pump over two IDs: a 0.6, b 0.5, c 0.7 -> c 1, a 2, b 3
    res["a"][{"pump", 1}] = report("pump", 1, 0.6, 0.6);
    res["a"][{"pump", 2}] = report("pump", 2, 0.6, 0.6);
    res["b"][{"pump", 1}] = report("pump", 1, 0.4, 0.4);
    res["b"][{"pump", 2}] = report("pump", 2, 0.6, 0.6);
    res["c"][{"pump", 1}] = report("pump", 1, 0.7, 0.7);
    res["c"][{"pump", 2}] = report("pump", 2, 0.8, 0.6);
    const auto board = rank_systems(res);
    REQUIRE(board.size() == 3);
    // a: (2.5 + 2) / 2 = 2.25; b: (1 + 3) / 2 = 2; c: (2.5 + 1) / 2 = 1.75
    CHECK(board[0].system == "c");
    CHECK(board[0].average_rank == doctest::Approx(1.75));
    CHECK(board[1].system == "b");
    CHECK(board[1].average_rank == doctest::Approx(2.0));
    CHECK(board[2].system == "a");
    CHECK(board[2].average_rank == doctest::Approx(2.25));
    CHECK(board[0].type_metric.at("pump") == doctest::Approx(0.7));
  }

  TEST_CASE("auc weighting changes the blend") {
    SystemResults res;
    res["a"][{"fan", 0}] = report("fan", 0, 0.9, 0.1);
    res["b"][{"fan", 0}] = report("fan", 0, 0.5, 0.6);
    CHECK(rank_systems(res, {1.0})[0].system == "a");
    CHECK(rank_systems(res, {0.0})[0].system == "b");
    CHECK_THROWS_AS(rank_systems(res, {1.5}), ConfigError);
  }

  TEST_CASE("systems covering different machines cannot be ranked") {
    SystemResults res;
    res["a"][{"fan", 0}] = report("fan", 0, 0.9, 0.8);
    res["b"][{"fan", 1}] = report("fan", 1, 0.9, 0.8);
    CHECK_THROWS_AS(rank_systems(res), DataError);
    CHECK_THROWS_WITH(rank_systems(res), doctest::Contains("fan_id_01"));
  }

  TEST_CASE("leaderboard outputs name every system") {
    SystemResults res;
    res["a"][{"fan", 0}] = report("fan", 0, 0.9, 0.8);
    res["b"][{"fan", 0}] = report("fan", 0, 0.5, 0.4);
    const auto board = rank_systems(res);
    const auto json = leaderboard_to_json(board);
    const auto csv = leaderboard_to_csv(board);
    for (const std::string name : {"\"a\"", "\"b\""}) CHECK(json.find(name) != std::string::npos);
    CHECK(csv.find("\na,fan,") != std::string::npos);
  }
}
