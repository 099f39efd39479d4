#include "asdkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>

#include "json.hpp"

#include "asdkit/error.hpp"

namespace asdkit::metrics {
namespace {

struct LabeledScores {
  std::vector<double> normal;
  std::vector<double> anomalous;
};

LabeledScores split_by_label(std::span<const ScoredSample> samples) {
  LabeledScores s;
  for (const auto& x : samples) {
    if (!std::isfinite(x.score)) throw NumericError("non-finite anomaly score for '" + x.name + "'");
    (x.anomalous ? s.anomalous : s.normal).push_back(x.score);
  }
  if (s.normal.empty()) throw DataError("AUC needs at least one normal sample; none given");
  if (s.anomalous.empty()) throw DataError("AUC needs at least one anomalous sample; none given");
  return s;
}

// Sum over anomalies of (#normals strictly below) and (#normals tied), with
// `normals` sorted ascending.
struct PairCounts {
  std::uint64_t wins = 0;
  std::uint64_t ties = 0;
};

PairCounts count_pairs(const std::vector<double>& normals_sorted, const std::vector<double>& anomalous) {
  PairCounts c;
  for (double a : anomalous) {
    const auto lo = std::lower_bound(normals_sorted.begin(), normals_sorted.end(), a);
    const auto hi = std::upper_bound(lo, normals_sorted.end(), a);
    c.wins += static_cast<std::uint64_t>(lo - normals_sorted.begin());
    c.ties += static_cast<std::uint64_t>(hi - lo);
  }
  return c;
}

double ratio(const PairCounts& c, std::uint64_t pairs, TieRule ties) {
  if (ties == TieRule::kZero) return static_cast<double>(c.wins) / static_cast<double>(pairs);
  // 2 wins + ties is exact in integers; halve once at the end.
  return static_cast<double>(2 * c.wins + c.ties) / static_cast<double>(2 * pairs);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double auc(std::span<const ScoredSample> samples, TieRule ties) {
  LabeledScores s = split_by_label(samples);
  std::sort(s.normal.begin(), s.normal.end());
  const auto pairs = static_cast<std::uint64_t>(s.normal.size()) * s.anomalous.size();
  return ratio(count_pairs(s.normal, s.anomalous), pairs, ties);
}

std::size_t pauc_normal_count(double p, std::size_t n_normal) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("pAUC fraction p must be in (0, 1], got " + std::to_string(p));
  const double x = p * static_cast<double>(n_normal);
  return static_cast<std::size_t>(std::floor(x + 1e-9 * std::max(1.0, x)));
}

double pauc(std::span<const ScoredSample> samples, double p, TieRule ties) {
  LabeledScores s = split_by_label(samples);
  const std::size_t k = pauc_normal_count(p, s.normal.size());
  if (k == 0) {
    throw DataError("pAUC undefined: floor(" + std::to_string(p) + " * " + std::to_string(s.normal.size()) +
                    ") = 0 normal samples");
  }
  // Keep the k highest-scoring normals.
  std::sort(s.normal.begin(), s.normal.end());
  std::vector<double> top(s.normal.end() - static_cast<std::ptrdiff_t>(k), s.normal.end());
  const auto pairs = static_cast<std::uint64_t>(k) * s.anomalous.size();
  return ratio(count_pairs(top, s.anomalous), pairs, ties);
}

std::vector<RocPoint> roc_curve(std::span<const ScoredSample> samples) {
  const LabeledScores s = split_by_label(samples);
  std::vector<std::pair<double, bool>> all;
  all.reserve(samples.size());
  for (const auto& x : samples) all.emplace_back(x.score, x.anomalous);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double n_neg = static_cast<double>(s.normal.size());
  const double n_pos = static_cast<double>(s.anomalous.size());
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t fp = 0, tp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double thr = all[i].first;
    for (; i < all.size() && all[i].first == thr; ++i) (all[i].second ? tp : fp) += 1;
    curve.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

MetricReport evaluate(const MachineKey& machine, std::span<const ScoredSample> samples, double p, TieRule ties) {
  MetricReport r;
  r.machine = machine;
  r.p = p;
  r.auc = auc(samples, ties);
  r.pauc = pauc(samples, p, ties);
  for (const auto& x : samples) (x.anomalous ? r.n_anomalous : r.n_normal) += 1;
  return r;
}

namespace {

nlohmann::ordered_json report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["machine_type"] = r.machine.machine_type;
  j["machine_id"] = r.machine.machine_id;
  j["auc"] = r.auc;
  j["pauc"] = r.pauc;
  j["p"] = r.p;
  j["n_normal"] = r.n_normal;
  j["n_anomalous"] = r.n_anomalous;
  return j;
}

}  // namespace

std::string report_to_json(const MetricReport& r) { return report_json(r).dump(2) + "\n"; }

std::string reports_to_json(std::span<const MetricReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(2) + "\n";
}

std::vector<MetricReport> reports_from_json(const std::string& text) {
  std::vector<MetricReport> out;
  try {
    const auto arr = nlohmann::json::parse(text);
    for (const auto& j : arr) {
      MetricReport r;
      r.machine.machine_type = j.at("machine_type").get<std::string>();
      r.machine.machine_id = j.at("machine_id").get<int>();
      r.auc = j.at("auc").get<double>();
      r.pauc = j.at("pauc").get<double>();
      r.p = j.at("p").get<double>();
      r.n_normal = j.at("n_normal").get<std::size_t>();
      r.n_anomalous = j.at("n_anomalous").get<std::size_t>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metric report JSON: ") + e.what());
  }
  return out;
}

std::string reports_to_csv(std::span<const MetricReport> reports) {
  std::string out = "machine_type,machine_id,auc,pauc,n_normal,n_anomalous\n";
  for (const auto& r : reports) {
    out += r.machine.machine_type + "," + std::to_string(r.machine.machine_id) + "," + fmt_double(r.auc) + "," +
           fmt_double(r.pauc) + "," + std::to_string(r.n_normal) + "," + std::to_string(r.n_anomalous) + "\n";
  }
  return out;
}

std::vector<LeaderboardEntry> rank_systems(const SystemResults& results, RankWeighting weighting) {
  if (!(weighting.auc_weight >= 0.0 && weighting.auc_weight <= 1.0)) {
    throw ConfigError("rank weighting auc_weight must be in [0, 1]");
  }
  if (results.empty()) return {};
  const auto& reference = results.begin()->second;
  for (const auto& [system, reports] : results) {
    std::string missing;
    for (const auto& [key, r] : reference) {
      if (!reports.contains(key)) missing += " " + system + ":" + key.stem();
    }
    for (const auto& [key, r] : reports) {
      if (!reference.contains(key)) missing += " " + results.begin()->first + ":" + key.stem();
    }
    if (!missing.empty()) throw DataError("systems cover different machines; missing" + missing);
  }

  std::vector<LeaderboardEntry> board;
  std::set<std::string> types;
  for (const auto& [system, reports] : results) {
    LeaderboardEntry e;
    e.system = system;
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& [key, r] : reports) {
      auto& [sum, n] = acc[key.machine_type];
      sum += weighting.auc_weight * r.auc + (1.0 - weighting.auc_weight) * r.pauc;
      ++n;
      types.insert(key.machine_type);
    }
    for (const auto& [type, sn] : acc) e.type_metric[type] = sn.first / sn.second;
    board.push_back(std::move(e));
  }

  for (const auto& type : types) {
    // Rank = 1 + #strictly better + (#tied others) / 2, the mean of tied positions.
    for (auto& e : board) {
      const double mine = e.type_metric.at(type);
      int better = 0, tied = 0;
      for (const auto& other : board) {
        const double theirs = other.type_metric.at(type);
        if (theirs > mine) ++better;
        if (theirs == mine) ++tied;
      }
      e.type_rank[type] = 1.0 + better + (tied - 1) / 2.0;
    }
  }
  for (auto& e : board) {
    double sum = 0.0;
    for (const auto& [type, rank] : e.type_rank) sum += rank;
    e.average_rank = e.type_rank.empty() ? 0.0 : sum / static_cast<double>(e.type_rank.size());
  }
  std::stable_sort(board.begin(), board.end(), [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
    if (a.average_rank != b.average_rank) return a.average_rank < b.average_rank;
    return a.system < b.system;
  });
  return board;
}

std::string leaderboard_to_json(std::span<const LeaderboardEntry> board) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : board) {
    nlohmann::ordered_json j;
    j["system"] = e.system;
    j["average_rank"] = e.average_rank;
    nlohmann::ordered_json types = nlohmann::ordered_json::object();
    for (const auto& [type, metric] : e.type_metric) {
      types[type] = {{"metric", metric}, {"rank", e.type_rank.at(type)}};
    }
    j["machine_types"] = types;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

std::string leaderboard_to_csv(std::span<const LeaderboardEntry> board) {
  std::string out = "system,machine_type,metric,rank,average_rank\n";
  for (const auto& e : board) {
    for (const auto& [type, metric] : e.type_metric) {
      out += e.system + "," + type + "," + fmt_double(metric) + "," + fmt_double(e.type_rank.at(type)) + "," +
             fmt_double(e.average_rank) + "\n";
    }
  }
  return out;
}

}  // namespace asdkit::metrics
